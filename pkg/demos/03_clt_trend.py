"""
Gaussian fluctuations of Tr X^p
===============================

Standardized ``Tr X^p`` drifts towards N(0, 1) as ``n`` grows.  Odd powers of
a classical Hankel matrix are the counterexample: their skewness stays put.
"""

# %%
import warnings

import numpy as np
from scipy import stats

from rmt_lab import CovarianceFamily, ExperimentConfig, SampleSpec, run_experiment
from rmt_lab.harness import PGrowthWarning, simulate_trials

warnings.simplefilter("ignore", PGrowthWarning)

cfg = ExperimentConfig("toeplitz", CovarianceFamily.full(), [16, 64, 128], 2, 5000, norm_trials=0,
                       with_bounds=False)
for r in run_experiment(cfg).records:
    print(f"n={r.n:4d}  ks={r.ks:.4f}  tv_hist={r.tv_hist:.4f}  ({r.standardization})")

# %% Hankel, p = 3, full correlation
for n in (32, 128):
    w, _ = simulate_trials(SampleSpec("hankel", n, CovarianceFamily.full()), 3, 0, 0, 4000, 0, 1)
    print(f"n={n:4d}  skew={stats.skew(w):.3f}")
