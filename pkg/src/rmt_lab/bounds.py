"""Closed-form bounds used along the CLT argument, and a report container.

Only formula evaluation lives here; Monte Carlo inputs (norm samples) and
exact moments come from :mod:`rmt_lab.harness` and :mod:`rmt_lab.wick`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateVariance, EmptySample, TooSmallN

__all__ = [
    "BoundEntry",
    "BoundReport",
    "gershgorin_norm_bound",
    "chatterjee_rhs",
    "monomial_ab",
    "variance_floor",
    "variance_floor_decay",
    "tropp_sandwich",
    "norm_moment_bound_check",
    "decay_norm_bound",
]


@dataclass
class BoundEntry:
    value: float
    inputs: dict = field(default_factory=dict)
    satisfied: Optional[bool] = None
    compared_to: Optional[float] = None

    def to_dict(self):
        d = {"value": _num(self.value), "inputs": {k: _num(v) for k, v in self.inputs.items()}}
        if self.satisfied is not None:
            d["satisfied"] = bool(self.satisfied)
            d["compared_to"] = _num(self.compared_to)
        return d


def _num(x):
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


class BoundReport(dict):
    """Mapping bound-id -> :class:`BoundEntry`."""

    def add(self, name, value, satisfied=None, compared_to=None, **inputs):
        self[name] = BoundEntry(float(value), inputs, satisfied, compared_to)
        return self[name]

    def all_satisfied(self):
        return all(e.satisfied is not False for e in self.values())

    def to_dict(self):
        return {k: self[k].to_dict() for k in sorted(self)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def gershgorin_norm_bound(matrix):
    """``max_i (|a_ii| + sum_{j != i} |a_ij|)``, an upper bound on ``||A||``
    for symmetric ``A``."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("gershgorin_norm_bound needs a square matrix")
    return float(np.max(np.sum(np.abs(a), axis=1)))


def chatterjee_rhs(sigma_norm, a, b, var_w, n):
    """Total-variation bound ``2 sqrt(5) ||Sigma||^{3/2} a b / (Var(W) n)``."""
    if not var_w > 0:
        raise DegenerateVariance(f"Var(W) must be positive, got {var_w}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * math.sqrt(5.0) * sigma_norm**1.5 * a * b / (var_w * n)


def monomial_ab(p, norm_samples):
    """``(a, b)`` for ``f(x) = x^p`` from samples of the operator norm.

    ``a = (E (p L^{p-1})^4)^{1/4}`` and ``b = (E (p(p-1) L^{p-2})^4)^{1/4}``.
    """
    lam = np.asarray(norm_samples, dtype=float).ravel()
    if lam.size == 0:
        raise EmptySample("need at least one norm sample")
    p = int(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    a = p * np.mean(lam ** (4 * (p - 1))) ** 0.25
    if p == 1:
        return float(a), 0.0
    b = p * (p - 1) * np.mean(lam ** (4 * (p - 2))) ** 0.25
    return float(a), float(b)


def variance_floor(p, gamma, n):
    """Linear-growth lower bound ``gamma^p n / (9 (12p)^{p-1})`` on Var(W).

    Only claimed for ``n >= 4 p^2``.
    """
    if n < 4 * p * p:
        raise TooSmallN(f"floor needs n >= 4p^2 = {4 * p * p}, got n = {n}")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return gamma**p * n / (9.0 * (12.0 * p) ** (p - 1))


def variance_floor_decay(p):
    """Var(W) >= 1 for unit-variance entries, any p >= 1."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return 1.0


def tropp_sandwich(sigma, n):
    """``(sigma / sqrt 2, sqrt(e (1 + 2 ln n)) sigma)`` bracketing ``E||X||``."""
    if n < 1 or sigma < 0:
        raise ValueError("need n >= 1 and sigma >= 0")
    return sigma / math.sqrt(2.0), math.sqrt(math.e * (1.0 + 2.0 * math.log(n))) * sigma


def norm_moment_bound_check(k, n, norm_samples):
    """Smallest ``C`` with ``E(L^k) <= (C k log n)^{k/2}`` for the sample moment.

    Returns a :class:`BoundEntry` whose value is the fitted ``C``.
    """
    if k < 1 or n < 3:
        raise ValueError("need k >= 1 and n >= 3")
    lam = np.asarray(norm_samples, dtype=float)
    if lam.size == 0:
        raise EmptySample("need at least one norm sample")
    moment = float(np.mean(lam**k))
    c = moment ** (2.0 / k) / (k * math.log(n))
    return BoundEntry(c, {"k": k, "n": n, "moment": moment, "trials": int(lam.size)})


def decay_norm_bound(sigma, nu, n):
    """Shape ``sigma + nu (ln n)^{3/2}`` of the sharper norm bound.

    The absolute constant is unknown and taken as 1, so the value is a
    trend indicator rather than a certified bound.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return sigma + nu * math.log(n) ** 1.5
