"""
Exact trace moments against simulation
======================================

``Tr X^p`` is a polynomial in Gaussian entries, so its mean and variance
follow from pair partitions.  Compare with a direct simulation.
"""

# %%
import numpy as np

from rmt_lab import CovarianceFamily, SampleSpec, exact_trace_moments
from rmt_lab.harness import simulate_trials

trials = 200_000
for kind in ("toeplitz", "circulant", "hankel"):
    spec = SampleSpec(kind, 5, CovarianceFamily.constant_off_diagonal(0.5))
    for p in (2, 3):
        exact = exact_trace_moments(spec, p)
        w, _ = simulate_trials(spec, p, 0, 0, trials, 0, 1)
        print(f"{kind:10s} p={p}  mean {exact.mean:8.4f} vs {w.mean():8.4f}   "
              f"var {exact.variance:8.4f} vs {w.var(ddof=1):8.4f}")

# %% variance grows linearly in n under a covariance floor
for n in (8, 16, 32, 64):
    r = exact_trace_moments(SampleSpec("toeplitz", n, CovarianceFamily.full()), 2)
    print(n, round(r.variance / n, 4))
