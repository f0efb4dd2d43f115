"""
Operator norm and the bound pipeline
====================================

sigma and nu are read off the entry covariance; the mean operator norm is
simulated and set against them.
"""

# %%
import math

from rmt_lab import CovarianceFamily, SampleSpec
from rmt_lab.bounds import chatterjee_rhs, decay_norm_bound, monomial_ab, tropp_sandwich
from rmt_lab.harness import simulate_trials
from rmt_lab.series import nu_param, sigma_param
from rmt_lab.wick import exact_trace_moments

for fam in (CovarianceFamily.full(), CovarianceFamily.power_decay(0.5)):
    print(fam.label)
    for n in (16, 64, 128):
        spec = SampleSpec("toeplitz", n, fam)
        s, nu = sigma_param(spec), nu_param(spec)
        _, lam = simulate_trials(spec, 1, 0, 0, 500, 500, 1)
        lo, hi = tropp_sandwich(s, n)
        print(f"  n={n:4d} E||X||={lam.mean():.3f} in [{lo:.3f}, {hi:.3f}]  "
              f"sigma={s:.3f} nu={nu:.4f} shape={decay_norm_bound(s, nu, n):.3f}")

# %% the total-variation bound for p = 2 shrinks with n
for n in (16, 32, 64):
    spec = SampleSpec("toeplitz", n, CovarianceFamily.constant_off_diagonal(0.5))
    _, lam = simulate_trials(spec, 2, 0, 0, 2000, 2000, 1)
    a, b = monomial_ab(2, lam)
    var = exact_trace_moments(spec, 2).variance
    sig = nu_param(spec, mode="bound") * n
    print(n, round(chatterjee_rhs(sig, a, b, var, n), 4), " 1/sqrt(n) =", round(1 / math.sqrt(n), 4))
