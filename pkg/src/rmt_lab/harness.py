"""Monte Carlo experiments on ``W_n = Tr(X_n^p)``.

Trials are cut into fixed index ranges (chunk boundaries depend only on
``n``), evaluated on a thread pool and written back by chunk index, so a
report is bit-for-bit the same for any worker count.  ``RMT_LAB_THREADS``
caps the pool size.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import bounds as bd
from . import series, wick
from .covariance import CovarianceFamily
from .errors import BadParameter, EvenPOnly, TooFewSamples
from .linalg import batch_spectral_norms, spectral_norm
from .patterns import PatternKind
from .sampler import SampleSpec, assemble, draw_noise, trace_powers

__all__ = [
    "ExperimentConfig",
    "NRecord",
    "ExperimentReport",
    "ScalingTable",
    "PGrowthWarning",
    "run_experiment",
    "ks_statistic",
    "tv_histogram",
    "spectral_norm",
    "opnorm_scaling_scan",
    "worker_count",
    "simulate_trials",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "kind", "family", "gamma_or_alpha", "n", "p", "trials", "sample_mean", "sample_var",
    "exact_mean", "exact_var", "ks", "tv_hist", "mean_opnorm", "sigma_param", "nu_param",
    "gershgorin", "chatterjee_rhs", "variance_floor", "seed",
)
STANDARDIZATIONS = ("auto", "exact", "empirical")
MIN_DIST_TRIALS = 100
CHUNK_ELEMENTS = 2**21


class PGrowthWarning(UserWarning):
    """p is large compared with log n / log log n."""


def worker_count():
    env = os.environ.get("RMT_LAB_THREADS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise BadParameter(f"RMT_LAB_THREADS must be an integer, got {env!r}") from None
        if w < 1:
            raise BadParameter("RMT_LAB_THREADS must be >= 1")
        return w
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# diagnostics


def ks_statistic(z):
    """Kolmogorov distance between the empirical CDF of ``z`` and Phi."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 2:
        raise TooFewSamples(f"KS statistic needs >= 2 samples, got {z.size}")
    return float(stats.kstest(z, "norm").statistic)


def tv_histogram(z, bins=64, bin_range=5.0):
    """Binned total-variation distance to N(0, 1).

    ``bins`` equal cells on ``[-bin_range, bin_range]`` plus one tail cell on
    each side; the result is ``1/2 sum |p_hat - q|`` over all cells, a lower
    bound on the true TV distance.
    """
    if bins < 2:
        raise BadParameter("need at least 2 bins")
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise TooFewSamples("empty sample")
    edges = np.linspace(-bin_range, bin_range, bins + 1)
    inner, _ = np.histogram(z, bins=edges)
    counts = np.concatenate([[np.sum(z < -bin_range)], inner, [np.sum(z > bin_range)]])
    cdf = ndtr(edges)
    q = np.concatenate([[cdf[0]], np.diff(cdf), [1.0 - cdf[-1]]])
    return float(0.5 * np.sum(np.abs(counts / z.size - q)))


# ---------------------------------------------------------------------------
# config and report


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One Monte Carlo experiment over a list of sizes.

    ``norm_trials`` limits how many trials (the first ones) also get an
    operator norm; ``None`` means all of them.

    ``standardization="auto"`` uses exact Wick moments when they are
    affordable and otherwise calibrates on the disjoint trial range
    ``[trials, trials + trials // 4)``.  For odd ``p`` the calibration only
    fixes the scale, since the mean is exactly zero.
    """

    kind: PatternKind
    family: CovarianceFamily
    n_list: tuple
    p: int
    trials: int
    master_seed: int = 0
    bins: int = 64
    bin_range: float = 5.0
    standardization: str = "auto"
    norm_trials: Optional[int] = None
    opnorm_moments: tuple = (2, 4)
    with_bounds: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind.parse(self.kind))
        if isinstance(self.family, dict):
            object.__setattr__(self, "family", CovarianceFamily.from_dict(self.family))
        n_list = tuple(int(n) for n in np.atleast_1d(self.n_list))
        if not n_list or min(n_list) < 1:
            raise BadParameter("n_list must hold positive sizes")
        object.__setattr__(self, "n_list", n_list)
        object.__setattr__(self, "opnorm_moments", tuple(int(k) for k in self.opnorm_moments))
        if int(self.p) != self.p or self.p < 1:
            raise BadParameter(f"p must be a positive integer, got {self.p}")
        if int(self.trials) != self.trials or self.trials < 2:
            raise BadParameter(f"trials must be an integer >= 2, got {self.trials}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise BadParameter("master_seed must fit in 64 unsigned bits")
        if self.bins < 2 or not self.bin_range > 0:
            raise BadParameter("need bins >= 2 and bin_range > 0")
        if self.standardization not in STANDARDIZATIONS:
            raise BadParameter(f"standardization must be one of {STANDARDIZATIONS}")
        if self.norm_trials is not None and not (0 <= self.norm_trials):
            raise BadParameter("norm_trials must be non-negative")
        if (
            self.family.regime() == "gamma"
            and self.kind in (PatternKind.REVERSE_CIRCULANT, PatternKind.HANKEL)
            and self.p % 2
        ):
            raise EvenPOnly(
                f"{self.kind.value} with a covariance floor only has a CLT for even p, got p={self.p}"
            )

    @property
    def distributional(self):
        """Whether KS / histogram diagnostics are meaningful (trials >= 100)."""
        return self.trials >= MIN_DIST_TRIALS

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "family": self.family.to_dict(),
            "n_list": list(self.n_list),
            "p": self.p,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "bins": self.bins,
            "bin_range": self.bin_range,
            "standardization": self.standardization,
            "norm_trials": self.norm_trials,
            "opnorm_moments": list(self.opnorm_moments),
            "with_bounds": self.with_bounds,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadParameter(f"unknown experiment field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class NRecord:
    n: int
    trials: int
    sample_mean: float
    sample_var: float
    exact_mean: Optional[float]
    exact_var: Optional[float]
    standardization: str
    ks: Optional[float]
    tv_hist: Optional[float]
    skew: float
    mean_opnorm: Optional[float]
    opnorm_se: Optional[float]
    opnorm_moments: dict
    norm_count: int
    sigma_param: Optional[float] = None
    nu_param: Optional[float] = None
    bound_report: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def bound_value(self, name):
        e = self.bound_report.get(name)
        return None if e is None else e["value"]

    def to_dict(self, stamp=False):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "wall_time"}
        d["opnorm_moments"] = {str(k): v for k, v in sorted(self.opnorm_moments.items())}
        if stamp:
            d["wall_time"] = self.wall_time
        return d


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    records: tuple

    def record(self, n):
        for r in self.records:
            if r.n == n:
                return r
        raise KeyError(n)

    def to_dict(self, stamp=False):
        return {"config": self.config.to_dict(), "records": [r.to_dict(stamp) for r in self.records]}

    def to_json(self, stamp=False, indent=2):
        return json.dumps(_jsonable(self.to_dict(stamp)), indent=indent, sort_keys=True) + "\n"

    def csv_rows(self):
        fam = self.config.family
        shape = fam.shape_parameter
        rows = []
        for r in self.records:
            rows.append({
                "kind": self.config.kind.value,
                "family": fam.kind,
                "gamma_or_alpha": "" if shape is None else shape,
                "n": r.n,
                "p": self.config.p,
                "trials": r.trials,
                "sample_mean": r.sample_mean,
                "sample_var": r.sample_var,
                "exact_mean": r.exact_mean,
                "exact_var": r.exact_var,
                "ks": r.ks,
                "tv_hist": r.tv_hist,
                "mean_opnorm": r.mean_opnorm,
                "sigma_param": r.sigma_param,
                "nu_param": r.nu_param,
                "gershgorin": r.bound_value("gershgorin"),
                "chatterjee_rhs": r.bound_value("chatterjee_rhs"),
                "variance_floor": r.bound_value("variance_floor"),
                "seed": self.config.master_seed,
            })
        return rows

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        for row in self.csv_rows():
            w.writerow(["" if row[c] is None else _fmt(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# engine


def _chunk_size(n):
    return max(1, min(512, CHUNK_ELEMENTS // (n * n)))


def simulate_trials(spec, p, seed, start, stop, norm_stop, workers):
    """W (and operator norms for indices below ``norm_stop``) for trials [start, stop)."""
    step = _chunk_size(spec.n)
    bounds = [(a, min(a + step, stop)) for a in range(start, stop, step)]
    symmetric = spec.kind.is_symmetric

    def task(ab):
        a, b = ab
        x = assemble(spec, draw_noise(seed, np.arange(a, b), spec.noise_size))
        w = trace_powers(x, p)
        m = max(0, min(b, norm_stop) - a)
        lam = batch_spectral_norms(x[:m], symmetric=symmetric) if m else np.empty(0)
        return w, lam

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, bounds))
    else:
        parts = [task(ab) for ab in bounds]
    w = np.concatenate([q[0] for q in parts]) if parts else np.empty(0)
    lam = np.concatenate([q[1] for q in parts]) if parts else np.empty(0)
    return w, lam


def _p_growth_check(n, p):
    if n < 3:
        return
    ll = math.log(math.log(n))
    if ll > 0 and p >= math.log(n) / ll:
        warnings.warn(
            f"p={p} is not small against log n / log log n = {math.log(n) / ll:.2f} at n={n}; "
            "the CLT allowance p = o(log n / log log n) is stretched",
            PGrowthWarning,
            stacklevel=3,
        )


def _bound_report(cfg, spec, rec, lam, var_w):
    rep = bd.BoundReport()
    n, p = spec.n, cfg.p
    gersh = series.nu_param(spec, mode="bound") * n
    rep.add("gershgorin", gersh, satisfied=gersh <= 2 * spec.max_variance() * n,
            compared_to=2 * spec.max_variance() * n, n=n, max_variance=spec.max_variance())
    if lam.size:
        a, b = bd.monomial_ab(p, lam)
        if var_w > 0:
            rep.add("chatterjee_rhs", bd.chatterjee_rhs(gersh, a, b, var_w, n),
                    a=a, b=b, sigma_norm=gersh, var_w=var_w, n=n, norm_samples=int(lam.size))
    regime = cfg.family.regime()
    if regime == "gamma" and n >= 4 * p * p:
        floor = bd.variance_floor(p, cfg.family.covariance_floor(), n)
        rep.add("variance_floor", floor, satisfied=var_w >= floor, compared_to=var_w,
                p=p, gamma=cfg.family.covariance_floor(), n=n)
    elif regime == "decay":
        floor = bd.variance_floor_decay(p) * spec.min_variance() ** p
        rep.add("variance_floor", floor, satisfied=var_w >= floor, compared_to=var_w, p=p)
    lo, hi = bd.tropp_sandwich(rec["sigma_param"], n)
    mean_l = rec["mean_opnorm"]
    rep.add("tropp_lower", lo, satisfied=None if mean_l is None else mean_l >= lo,
            compared_to=mean_l, sigma=rec["sigma_param"], n=n)
    rep.add("tropp_upper", hi, satisfied=None if mean_l is None else mean_l <= hi,
            compared_to=mean_l, sigma=rec["sigma_param"], n=n)
    rep.add("decay_shape", bd.decay_norm_bound(rec["sigma_param"], rec["nu_param"], n),
            sigma=rec["sigma_param"], nu=rec["nu_param"], n=n, certified=False)
    return rep.to_dict()


def _run_one(cfg, n, workers):
    t0 = time.perf_counter()
    p = cfg.p
    _p_growth_check(n, p)
    spec = SampleSpec(cfg.kind, n, cfg.family)
    trials = cfg.trials
    norm_stop = trials if cfg.norm_trials is None else min(trials, cfg.norm_trials)

    exact = None
    if cfg.standardization == "exact" or wick.exact_feasible(n, p):
        exact = wick.exact_trace_moments(spec, p)
    mode = cfg.standardization
    if mode == "auto":
        mode = "exact" if exact is not None else "empirical"

    w, lam = simulate_trials(spec, p, cfg.master_seed, 0, trials, norm_stop, workers)
    if mode == "exact":
        center, scale2 = exact.mean, exact.variance
    else:
        calib = max(2, trials // 4)
        wc, _ = simulate_trials(spec, p, cfg.master_seed, trials, trials + calib, 0, workers)
        if p % 2:
            # X and -X have the same law, so odd traces have mean exactly 0;
            # only the scale is calibrated
            center, scale2 = 0.0, float(np.mean(wc**2))
        else:
            center, scale2 = float(np.mean(wc)), float(np.var(wc, ddof=1))

    ks = tv = None
    skew = float("nan")
    if scale2 > 0:
        z = (w - center) / math.sqrt(scale2)
        skew = float(stats.skew(z))
        if cfg.distributional:
            ks = ks_statistic(z)
            tv = tv_histogram(z, cfg.bins, cfg.bin_range)

    rec = dict(
        n=n,
        trials=trials,
        sample_mean=float(np.mean(w)),
        sample_var=float(np.var(w, ddof=1)),
        exact_mean=None if exact is None else exact.mean,
        exact_var=None if exact is None else exact.variance,
        standardization=mode,
        ks=ks,
        tv_hist=tv,
        skew=skew,
        mean_opnorm=float(np.mean(lam)) if lam.size else None,
        opnorm_se=float(np.std(lam, ddof=1) / math.sqrt(lam.size)) if lam.size > 1 else None,
        opnorm_moments={k: float(np.mean(lam**k)) for k in cfg.opnorm_moments} if lam.size else {},
        norm_count=int(lam.size),
    )
    if cfg.with_bounds:
        rec["sigma_param"] = series.sigma_param(spec)
        rec["nu_param"] = series.nu_param(spec)
        var_w = exact.variance if exact is not None else scale2
        rec["bound_report"] = _bound_report(cfg, spec, rec, lam, var_w)
    rec["wall_time"] = time.perf_counter() - t0
    return NRecord(**rec)


def run_experiment(config, workers=None):
    """Run ``config`` at every size in ``config.n_list``.

    Parameters
    ----------
    config : ExperimentConfig or dict
    workers : int, optional
        Thread count; defaults to :func:`worker_count`.  Results do not
        depend on it.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    workers = worker_count() if workers is None else int(workers)
    return ExperimentReport(config, tuple(_run_one(config, n, workers) for n in config.n_list))


# ---------------------------------------------------------------------------
# operator norm scaling


@dataclass(frozen=True)
class ScalingTable:
    kind: PatternKind
    family: CovarianceFamily
    rows: tuple  # (n, mean lambda, mean lambda / sqrt(ln n), standard error)
    trend_ok: Optional[bool]
    criterion: str

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "family": self.family.to_dict(),
            "rows": [
                {"n": n, "mean_opnorm": m, "ratio": r, "se": se} for n, m, r, se in self.rows
            ],
            "trend_ok": self.trend_ok,
            "criterion": self.criterion,
        }


def _no_growth(values, slack):
    return all(values[j] <= slack * values[i] for i in range(len(values)) for j in range(i + 1, len(values)))


def opnorm_scaling_scan(kind, family, n_list, trials, master_seed=0, workers=None):
    """Mean operator norm and its ratio to ``sqrt(ln n)`` across sizes.

    For families with a covariance floor the ratio column may not grow by
    more than 20% between any two sizes of the scan; for the decay regime
    the mean norm itself may not grow by more than 10%.  ``trend_ok`` is
    ``None`` for a single size or for families covered by neither claim.
    """
    kind = PatternKind.parse(kind)
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise BadParameter("n_list must be strictly increasing")
    workers = worker_count() if workers is None else int(workers)
    rows = []
    for n in n_list:
        spec = SampleSpec(kind, n, family)
        _, lam = simulate_trials(spec, 1, master_seed, 0, trials, trials, workers)
        m = float(np.mean(lam))
        se = float(np.std(lam, ddof=1) / math.sqrt(lam.size)) if lam.size > 1 else 0.0
        rows.append((n, m, m / math.sqrt(math.log(n)) if n > 1 else float("inf"), se))
    regime = family.regime()
    trend, crit = None, "none"
    if len(rows) > 1:
        if regime == "gamma":
            trend, crit = _no_growth([r[2] for r in rows], 1.2), "ratio within 20%"
        elif regime == "decay":
            trend, crit = _no_growth([r[1] for r in rows], 1.1), "mean within 10%"
    return ScalingTable(kind, family, tuple(rows), trend, crit)
