"""Correlated patterned Gaussian random matrices and their trace statistics.

The subpackages build Toeplitz, circulant, reverse circulant, symmetric
circulant and Hankel matrices whose diagonal vectors carry an arbitrary
Gaussian covariance, compute exact moments of ``Tr(X^p)`` by Wick pairing,
evaluate the norm and variance bounds used in the CLT argument, and run
reproducible Monte Carlo experiments.
"""

from .covariance import CovarianceFamily, DiagonalCovariance, build_diagonal_cov, factor_psd
from .errors import *  # noqa: F401,F403
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    ks_statistic,
    opnorm_scaling_scan,
    run_experiment,
    tv_histogram,
)
from .linalg import spectral_norm
from .patterns import EntryAddress, PatternKind, diagonal_layout, entry_index, positions_of
from .sampler import NoiseStream, PatternedMatrix, SampleSpec, sample_matrix, trace_power
from .series import build_series, nu_param, sigma_param
from .wick import MomentReport, exact_trace_moments, gaussian_product_moment, pair_partitions

__version__ = "0.1.0"
