import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import ndtr, ndtri

from rmt_lab.covariance import CovarianceFamily as F
from rmt_lab.errors import BadParameter, CapExceeded, EvenPOnly, TooFewSamples
from rmt_lab.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    PGrowthWarning,
    opnorm_scaling_scan,
    run_experiment,
    simulate_trials,
    spectral_norm,
    tv_histogram,
    ks_statistic,
    worker_count,
)
from rmt_lab.sampler import NoiseStream, SampleSpec, sample_matrix

import oracles

pytestmark = pytest.mark.filterwarnings("ignore::rmt_lab.harness.PGrowthWarning")


def test_ks_examples():
    m = 100
    z = ndtri((np.arange(1, m + 1) - 0.5) / m)
    assert ks_statistic(z) <= 0.005 + 1e-12
    assert ks_statistic(np.zeros(10)) == pytest.approx(0.5)
    with pytest.raises(TooFewSamples):
        ks_statistic([0.1])


def test_ks_null_distribution():
    hits = sum(ks_statistic(np.random.default_rng(s).standard_normal(10_000)) < 1.63 / 100 for s in range(200))
    assert hits >= 196


@given(st.lists(st.floats(-6, 6), min_size=2, max_size=200))
@settings(max_examples=100, deadline=None)
def test_ks_dual_route(vals):
    z = np.array(vals)
    assert ks_statistic(z) == pytest.approx(oracles.ks_direct(z), abs=1e-12)


def test_tv_examples():
    edges = np.linspace(-5, 5, 65)
    # one point per 1e-6 of mass, spread inside each cell: empirical = exact cell masses
    cdf = ndtr(edges)
    q = np.concatenate([[cdf[0]], np.diff(cdf), [1 - cdf[-1]]])
    counts = np.round(q * 1e6).astype(int)
    mids = np.concatenate([[-6.0], (edges[:-1] + edges[1:]) / 2, [6.0]])
    z = np.repeat(mids, counts)
    assert tv_histogram(z) < 1e-5
    z = np.full(1000, 0.01)
    cell = ndtr(edges[33]) - ndtr(edges[32])
    assert tv_histogram(z) == pytest.approx(1 - cell)
    z = np.random.default_rng(0).standard_normal(100_000)
    assert tv_histogram(z) < 0.02
    with pytest.raises(BadParameter):
        tv_histogram(z, bins=1)
    with pytest.raises(TooFewSamples):
        tv_histogram([])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=300))
@settings(max_examples=60, deadline=None)
def test_tv_in_unit_interval(vals):
    assert 0.0 <= tv_histogram(np.array(vals)) <= 1.0


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(5)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)
    x = np.random.default_rng(4).standard_normal((6, 6))
    assert spectral_norm(x) == pytest.approx(np.linalg.svd(x, compute_uv=False)[0], abs=1e-8)
    pm = sample_matrix(SampleSpec("hankel", 7, F.full()), NoiseStream(0, 0))
    assert spectral_norm(pm) == pytest.approx(np.linalg.norm(pm.entries, 2), abs=1e-8)


def test_config_validation():
    with pytest.raises(EvenPOnly):
        ExperimentConfig("reverse_circulant", F.constant_off_diagonal(0.5), [16], 3, 200)
    with pytest.raises(EvenPOnly):
        ExperimentConfig("hankel", F.full(), [16], 1, 200)
    # the decay regime covers odd p on every kind
    ExperimentConfig("hankel", F.power_decay(0.5), [16], 3, 200)
    for bad in (dict(p=0), dict(trials=1), dict(n_list=[]), dict(standardization="robust"),
                dict(bins=1), dict(master_seed=-1)):
        kw = dict(kind="toeplitz", family=F.wigner(), n_list=[4], p=2, trials=200) | bad
        with pytest.raises(BadParameter):
            ExperimentConfig(**kw)
    with pytest.raises(BadParameter):
        ExperimentConfig.from_dict({"kind": "toeplitz", "family": {"kind": "wigner"}, "n_list": [4],
                                    "p": 2, "trials": 10, "colour": "red"})


def test_config_round_trip():
    cfg = ExperimentConfig("circulant", {"kind": "geometric_decay", "rho": 0.5}, [4, 8], 2, 300, master_seed=9)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()


def test_wigner_toeplitz_contract_shape():
    rep = run_experiment(ExperimentConfig("toeplitz", F.wigner(), [64], 2, 10_000, norm_trials=200))
    r = rep.record(64)
    assert 0 <= r.ks <= 1 and 0 <= r.tv_hist <= 1
    assert r.standardization == "exact" and r.norm_count == 200
    assert set(r.bound_report) == {"gershgorin", "chatterjee_rhs", "variance_floor",
                                   "tropp_lower", "tropp_upper", "decay_shape"}


def test_few_trials_skip_distributional():
    r = run_experiment(ExperimentConfig("toeplitz", F.wigner(), [8], 2, 50)).record(8)
    assert r.ks is None and r.tv_hist is None
    assert r.sample_var > 0


@pytest.mark.parametrize("workers", [2, 3])
def test_determinism_across_workers(workers):
    cfg = ExperimentConfig("symmetric_circulant", F.constant_off_diagonal(0.5), [4, 40], 3, 3000,
                           master_seed=123, norm_trials=500)
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=workers)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("RMT_LAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("RMT_LAB_THREADS", "zero")
    with pytest.raises(BadParameter):
        worker_count()
    monkeypatch.delenv("RMT_LAB_THREADS")
    assert worker_count() >= 1


@pytest.mark.parametrize("kind", ["toeplitz", "circulant", "reverse_circulant", "symmetric_circulant", "hankel"])
@pytest.mark.parametrize("p", [1, 2])
def test_standardization_consistency(kind, p):
    trials = 20_000
    cfg = ExperimentConfig(kind, F.geometric_decay(0.5), [12], p, trials, master_seed=5,
                           norm_trials=0, with_bounds=False)
    r = run_experiment(cfg).record(12)
    assert r.standardization == "exact"
    assert abs(r.sample_mean - r.exact_mean) <= 5 * math.sqrt(r.exact_var / trials)
    tol = 5 * math.sqrt(2 / trials)
    assert 1 - tol <= r.sample_var / r.exact_var <= 1 + tol


def test_standardization_consistency_p3():
    trials = 20_000
    r = run_experiment(ExperimentConfig("toeplitz", F.wigner(), [6], 3, trials, master_seed=2,
                                        norm_trials=0, with_bounds=False)).record(6)
    assert abs(r.sample_mean - r.exact_mean) <= 5 * math.sqrt(r.exact_var / trials)
    tol = 2 * 5 * math.sqrt(2 / trials)
    assert 1 - tol <= r.sample_var / r.exact_var <= 1 + tol


def test_empirical_standardization_and_caps():
    r = run_experiment(ExperimentConfig("circulant", F.wigner(), [80], 3, 400, norm_trials=0)).record(80)
    assert r.standardization == "empirical" and r.exact_var is None
    r2 = run_experiment(ExperimentConfig("circulant", F.wigner(), [8], 2, 400, standardization="empirical",
                                         norm_trials=0)).record(8)
    assert r2.standardization == "empirical" and r2.exact_var is not None
    with pytest.raises(CapExceeded):
        run_experiment(ExperimentConfig("circulant", F.wigner(), [80], 3, 400, standardization="exact"))


def test_calibration_is_disjoint():
    spec = SampleSpec("toeplitz", 6, F.wigner())
    w_main, _ = simulate_trials(spec, 2, 0, 0, 400, 0, 1)
    w_cal, _ = simulate_trials(spec, 2, 0, 400, 500, 0, 1)
    w_all, _ = simulate_trials(spec, 2, 0, 0, 500, 0, 1)
    assert np.allclose(np.concatenate([w_main, w_cal]), w_all, rtol=1e-12)


def test_p_growth_warning():
    with pytest.warns(PGrowthWarning):
        run_experiment(ExperimentConfig("toeplitz", F.wigner(), [8], 3, 20, norm_trials=0))
    with warnings.catch_warnings():
        warnings.simplefilter("error", PGrowthWarning)
        run_experiment(ExperimentConfig("toeplitz", F.wigner(), [64], 2, 20, norm_trials=0))


def test_report_serialization():
    rep = run_experiment(ExperimentConfig("hankel", F.power_decay(0.5), [5, 9], 2, 300, norm_trials=100))
    d = json.loads(rep.to_json())
    assert [r["n"] for r in d["records"]] == [5, 9]
    assert "wall_time" not in d["records"][0]
    assert "wall_time" in json.loads(rep.to_json(stamp=True))["records"][0]
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 3
    row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert row["kind"] == "hankel" and row["family"] == "power_decay" and row["gamma_or_alpha"] == "0.5"
    assert float(row["sample_var"]) == rep.records[0].sample_var
    for rec in d["records"]:
        for name, entry in rec["bound_report"].items():
            if "satisfied" in entry:
                assert "compared_to" in entry


def test_bound_report_contents():
    r = run_experiment(ExperimentConfig("toeplitz", F.constant_off_diagonal(0.5), [16], 2, 2000,
                                        norm_trials=2000)).record(16)
    br = r.bound_report
    assert br["gershgorin"]["satisfied"] and br["gershgorin"]["compared_to"] == 32
    assert br["variance_floor"]["compared_to"] == r.exact_var
    assert br["tropp_lower"]["satisfied"] and br["tropp_upper"]["satisfied"]
    assert br["decay_shape"]["inputs"]["certified"] is False
    assert br["chatterjee_rhs"]["value"] > 0


def test_scaling_scan_single_row():
    t = opnorm_scaling_scan("toeplitz", F.full(), [16], 50)
    assert len(t.rows) == 1 and t.trend_ok is None
    n, m, ratio, se = t.rows[0]
    assert ratio == pytest.approx(m / math.sqrt(math.log(16)))
    with pytest.raises(BadParameter):
        opnorm_scaling_scan("toeplitz", F.full(), [16, 8], 50)


def test_hankel_odd_p_contrast():
    spec = SampleSpec("hankel", 128, F.full())
    w, _ = simulate_trials(spec, 3, 0, 0, 4000, 0, worker_count())
    z = (w - w.mean()) / w.std()
    assert abs(stats.skew(z)) > 0.1


@pytest.mark.slow
def test_full_correlation_toeplitz_ks_decreasing():
    cfg = ExperimentConfig("toeplitz", F.full(), [32, 64, 128], 2, 10_000, norm_trials=0, with_bounds=False)
    ks = [r.ks for r in run_experiment(cfg).records]
    assert ks[0] > ks[1] > ks[2]


def test_odd_p_empirical_centers_at_zero():
    cfg = ExperimentConfig("circulant", F.wigner(), [5], 3, 400, standardization="empirical",
                           norm_trials=0, with_bounds=False)
    r = run_experiment(cfg).record(5)
    spec = SampleSpec("circulant", 5, F.wigner())
    w, _ = simulate_trials(spec, 3, 0, 0, 400, 0, 1)
    wc, _ = simulate_trials(spec, 3, 0, 400, 500, 0, 1)
    assert r.ks == pytest.approx(ks_statistic(w / math.sqrt(np.mean(wc**2))), abs=1e-15)
    assert r.exact_mean == 0.0
