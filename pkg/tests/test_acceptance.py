"""Acceptance criteria, each at its stated tolerance.

Every criterion logs one ``criterion N PASS|FAIL ...`` line, printed in the
terminal summary.  Criterion 7 reruns the committed pilot matrix (about
17 minutes on one core).
"""

import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from rmt_lab.covariance import CovarianceFamily as F
from rmt_lab.covariance import build_diagonal_cov, factor_psd
from rmt_lab.harness import ExperimentConfig, PGrowthWarning, opnorm_scaling_scan, run_experiment, simulate_trials
from rmt_lab.patterns import PatternKind, entry_index
from rmt_lab.sampler import SampleSpec, assemble, draw_noise, entry_covariance_exact, sample_matrices, trace_powers
from rmt_lab.series import per_diagonal_norm, sigma_param, square_sums
from rmt_lab.wick import entry_covariance_matrix, exact_trace_moments
from rmt_lab.bounds import gershgorin_norm_bound, tropp_sandwich, variance_floor

import make_goldens
import test_patterns

KINDS = [k.value for k in PatternKind]
FAMILIES4 = [F.wigner(), F.full(), F.constant_off_diagonal(0.5), F.geometric_decay(0.5)]
UNIT_FAMILIES = FAMILIES4 + [F.power_decay(0.5)]
GOLDEN = json.loads((Path(__file__).parent / "goldens" / "clt_pilot.json").read_text())

pytestmark = pytest.mark.filterwarnings("ignore::rmt_lab.harness.PGrowthWarning")


def _log(log, num, ok, text):
    log(f"criterion {num} {'PASS' if ok else 'FAIL'}: {text}")


def test_criterion_1_oracle_equivalence(acceptance_log):
    trials = 10**6
    worst = 0.0
    for kind in KINDS:
        z = draw_noise(2024, np.arange(trials), SampleSpec(kind, 4, F.wigner()).noise_size)
        for fam in FAMILIES4:
            spec = SampleSpec(kind, 4, fam)
            for p in (2, 3):
                w = np.concatenate([trace_powers(assemble(spec, z[a:a + 100_000]), p)
                                    for a in range(0, trials, 100_000)])
                exact = exact_trace_moments(spec, p)
                var = w.var(ddof=1)
                se_var = math.sqrt((np.mean((w - w.mean()) ** 4) - var**2) / trials)
                worst = max(worst, abs(w.mean() - exact.mean) / math.sqrt(var / trials),
                            abs(var - exact.variance) / se_var)
    ok = worst <= 5
    _log(acceptance_log, 1, ok, f"Wick vs 1e6-trial Monte Carlo, 40 combos, worst |z| = {worst:.2f} (limit 5)")
    assert ok


def test_criterion_2_covariance_fidelity(acceptance_log):
    n, samples = 5, 200_000
    worst = 0.0
    for kind in KINDS:
        for fam in FAMILIES4:
            spec = SampleSpec(kind, n, fam)
            x = sample_matrices(spec, 31, np.arange(samples)).reshape(samples, n * n)
            emp = x.T @ x / samples
            sd = np.sqrt(np.maximum((x**2).T @ (x**2) / samples - emp**2, 0.0)) / math.sqrt(samples)
            exact = entry_covariance_matrix(spec) / n
            # two routes to the exact covariance must agree before it is used
            assert exact[3, 7] == entry_covariance_exact(spec, (1, 4), (2, 3))
            gap = np.abs(emp - exact)
            zero = sd == 0
            assert np.all(gap[zero] < 1e-12)
            worst = max(worst, float(np.max(gap[~zero] / sd[~zero])))
    recon = 0.0
    for fam in UNIT_FAMILIES + [F.wigner(v=2.0), F.constant_off_diagonal(0.3, v=0.7), F.geometric_decay(0.9, v=1.5)]:
        for dim in range(1, 65):
            cov = build_diagonal_cov(fam, dim, 64)
            a = factor_psd(cov)
            recon = max(recon, float(np.max(np.abs(a @ a.T - cov.entries))))
    ok = worst <= 5 and recon < 1e-8
    _log(acceptance_log, 2, ok, f"entry covariances worst |z| = {worst:.2f} (limit 5); "
                                f"max |AA^T - C| = {recon:.1e} (limit 1e-8)")
    assert ok


def test_criterion_3_bound_suite(acceptance_log):
    tol = 1e-8
    checks = []
    for kind in KINDS:
        for fam in UNIT_FAMILIES + [F.constant_off_diagonal(0.5, v=1.7)]:
            for n in (4, 8):
                spec = SampleSpec(kind, n, fam)
                g = gershgorin_norm_bound(entry_covariance_matrix(spec))
                checks.append(g <= 2 * spec.max_variance() * n + tol)
    for n in (8, 16, 33):
        for fam in UNIT_FAMILIES:
            spec = SampleSpec("toeplitz", n, fam)
            for k in spec.layout.ids:
                v = per_diagonal_norm(spec, k)
                if k == 0:
                    checks.append(abs(v - 1) <= tol)
                elif k <= n / 2:
                    checks.append(v <= 4 + tol)
                else:
                    checks.append(v <= 1 + tol)
    for kind in ("circulant", "reverse_circulant"):
        for fam in UNIT_FAMILIES:
            for n in (8, 16, 33):
                spec = SampleSpec(kind, n, fam)
                for k in spec.layout.ids:
                    left, right = square_sums(spec, k)
                    checks.append(np.max(np.abs(left - np.eye(n))) <= tol)
                    checks.append(np.max(np.abs(right - np.eye(n))) <= tol)
    ok = all(checks)
    _log(acceptance_log, 3, ok, f"Gershgorin <= 2Mn, per-diagonal norms, circulant square sums = I: "
                                f"{sum(checks)}/{len(checks)} checks hold")
    assert ok


def test_criterion_4_variance_floor(acceptance_log):
    checks, margin = [], math.inf
    for kind in ("toeplitz", "circulant", "symmetric_circulant"):
        for gamma in (0.5, 1.0):
            fam = F.full() if gamma == 1.0 else F.constant_off_diagonal(gamma)
            for n in (16, 25):
                var = exact_trace_moments(SampleSpec(kind, n, fam), 2).variance
                floor = variance_floor(2, gamma, n)
                checks.append(var >= floor)
                margin = min(margin, var / floor)
    for kind in KINDS:
        for fam in (F.wigner(), F.power_decay(0.5)):
            for p in (2, 3):
                var = exact_trace_moments(SampleSpec(kind, 4, fam), p).variance
                checks.append(var >= 1.0)
    ok = all(checks)
    _log(acceptance_log, 4, ok, f"exact Var(W) above both floors in {sum(checks)}/{len(checks)} cases; "
                                f"smallest Var/floor in the gamma regime = {margin:.1f}")
    assert ok


def test_criterion_5_tropp_sandwich(acceptance_log):
    trials, cases, bad = 2000, 0, []
    for kind in KINDS:
        for fam in UNIT_FAMILIES:
            for n in (8, 32):
                spec = SampleSpec(kind, n, fam)
                _, lam = simulate_trials(spec, 1, 5, 0, trials, trials, 1)
                se = lam.std(ddof=1) / math.sqrt(trials)
                lo, hi = tropp_sandwich(sigma_param(spec), n)
                cases += 1
                if not (lo - 3 * se <= lam.mean() <= hi + 3 * se):
                    bad.append((kind, fam.label, n))
    ok = not bad
    _log(acceptance_log, 5, ok, f"E||X|| inside the sigma sandwich for {cases - len(bad)}/{cases} cases")
    assert ok, bad


def test_criterion_6_norm_scaling(acceptance_log):
    results = []
    for fam in (F.full(), F.power_decay(0.5)):
        for kind in KINDS:
            table = opnorm_scaling_scan(kind, fam, [16, 64, 256], 1000, master_seed=0)
            results.append((kind, fam.label, table.trend_ok))
    ok = all(r[2] for r in results)
    _log(acceptance_log, 6, ok, f"scaling trend holds for {sum(bool(r[2]) for r in results)}/{len(results)} scans "
                                "(ratio within 20% for full correlation, mean within 10% for power decay)")
    assert ok, [r for r in results if not r[2]]


# ---------------------------------------------------------------------------
# CLT trend


@pytest.fixture(scope="module")
def clt_runs(acceptance_log):
    out = {}
    for kind, regime, p in make_goldens.clt_combos():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PGrowthWarning)
            small, big = run_experiment(make_goldens.clt_config(kind, regime, p)).records
        out[(kind, regime, p)] = (small, big)
    golden = {(g["kind"], g["regime"], g["p"]): g for g in GOLDEN["combos"]}
    passed = [key for key, (s, b) in out.items()
              if b.ks < s.ks and b.tv_hist < golden[key]["tv_256"] + 0.005]
    failed = sorted(set(out) - set(passed))
    text = f"KS(n=256) < KS(n=16) and tv_hist under golden + 0.005 for {len(passed)}/{len(out)} combos"
    if failed:
        text += "; failing: " + ", ".join(f"{k} {r} p={p}" for k, r, p in failed)
    _log(acceptance_log, 7, not failed, text)
    return out


def _clt_params():
    params = []
    for g in GOLDEN["combos"]:
        key = (g["kind"], g["regime"], g["p"])
        marks = []
        if g["p"] == 1 and not g["ks_256"] < g["ks_16"]:
            # W is an exact linear Gaussian for p = 1, so there is no trend to observe
            marks.append(pytest.mark.xfail(strict=True, reason="p=1 statistic is exactly Gaussian at every n"))
        params.append(pytest.param(key, marks=marks, id="-".join(map(str, key))))
    return params


@pytest.mark.parametrize("key", _clt_params())
def test_criterion_7_clt_trend(clt_runs, key):
    small, big = clt_runs[key]
    golden = next(g for g in GOLDEN["combos"] if (g["kind"], g["regime"], g["p"]) == key)
    assert big.tv_hist < golden["tv_256"] + 0.005
    assert big.ks < small.ks


def test_criterion_8_chatterjee_pipeline(acceptance_log):
    cfg = ExperimentConfig("toeplitz", F.constant_off_diagonal(0.5), [16, 64], 2, 2000, master_seed=0)
    rep = run_experiment(cfg)
    r16, r64 = (rep.record(n).bound_report["chatterjee_rhs"]["value"] for n in (16, 64))
    ok = r64 < r16
    _log(acceptance_log, 8, ok, f"assembled TV bound right side {r16:.3f} at n=16 -> {r64:.3f} at n=64")
    assert ok


def test_criterion_9_index_goldens(acceptance_log):
    total = mismatched = 0
    for kind, n, text in test_patterns.GOLDENS:
        expected = test_patterns.parse_display(text)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                total += 1
                mismatched += tuple(entry_index(kind, n, i, j)) != expected[i - 1][j - 1]
    ok = mismatched == 0
    _log(acceptance_log, 9, ok, f"{total - mismatched}/{total} displayed index-map entries reproduced "
                                "(41 symmetric circulant + 27 n=3)")
    assert ok


def test_criterion_10_determinism(acceptance_log):
    outputs = []
    for workers in (1, 2, 4):
        cfg = ExperimentConfig("hankel", F.power_decay(0.5), [16, 48], 2, 3000, master_seed=77, norm_trials=700)
        rep = run_experiment(cfg, workers=workers)
        outputs.append((rep.to_json(), rep.to_csv()))
    ok = all(o == outputs[0] for o in outputs)
    _log(acceptance_log, 10, ok, "JSON and CSV byte-identical for 1, 2 and 4 workers")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
