"""Exact Gaussian moments by Wick/Isserlis pairing.

``E[X_1 ... X_{2m}]`` of a centered Gaussian vector is the sum, over all
pair partitions of ``{1..2m}``, of products of pairwise covariances.  On top
of that this module computes the exact mean and variance of
``W = Tr(X^p)`` for a :class:`~rmt_lab.sampler.SampleSpec`.

Covariance conventions
----------------------
``entry_covariance_matrix`` returns the *unscaled* ``n^2 x n^2`` covariance
``Sigma`` of the input array (before the ``n^{-1/2}`` prefactor), indexed by
``(i - 1) * n + (j - 1)``.  For symmetric patterns ``X_ij`` and ``X_ji`` are
distinct coordinates of ``Sigma`` whose covariance equals their variance.
The scaled covariance of the matrix itself is ``Sigma / n``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import BadParameter, CapExceeded

__all__ = [
    "MomentReport",
    "pair_partitions",
    "double_factorial",
    "gaussian_product_moment",
    "class_cells",
    "covariance_blocks",
    "entry_covariance_matrix",
    "exact_trace_moments",
    "exact_feasible",
]

MAX_PAIRS = 8
DENSE_SIGMA_CAP = 64
TUPLE_CAP = 10**6
CONTRACTION_CAP = 10**8


def double_factorial(k):
    """``k!!`` with ``(-1)!! = 1``."""
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def pair_partitions(m):
    """Yield every pair partition of ``{1, ..., 2m}`` as a tuple of pairs.

    There are ``(2m - 1)!!`` of them; ``m > 8`` raises :class:`CapExceeded`.
    """
    if m < 0:
        raise BadParameter("m must be non-negative")
    if m > MAX_PAIRS:
        raise CapExceeded(f"{double_factorial(2 * m - 1)} pair partitions exceed the cap (m <= {MAX_PAIRS})")

    def rec(rest):
        if not rest:
            yield ()
            return
        first = rest[0]
        for t in range(1, len(rest)):
            pair = (first, rest[t])
            for tail in rec(rest[1:t] + rest[t + 1:]):
                yield (pair,) + tail

    yield from rec(tuple(range(1, 2 * m + 1)))


def gaussian_product_moment(cov):
    """``E[X_1 ... X_k]`` for centered jointly Gaussian ``X`` with covariance ``cov``.

    Odd ``k`` gives exactly 0.  Evaluated as the hafnian of ``cov`` by a
    memoized recursion over subsets, which sums the same terms as an
    explicit loop over :func:`pair_partitions`.
    """
    c = np.asarray(cov, dtype=float)
    k = c.shape[0]
    if k == 0:
        return 1.0
    if k % 2:
        return 0.0
    if k // 2 > MAX_PAIRS:
        raise CapExceeded(f"{k} variables exceed the Wick cap of {2 * MAX_PAIRS}")
    rows = c.tolist()

    @lru_cache(maxsize=None)
    def haf(mask):
        if mask == 0:
            return 1.0
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0.0
        r = rows[i]
        bits = rest
        while bits:
            j = (bits & -bits).bit_length() - 1
            bits &= bits - 1
            if r[j] != 0.0:
                total += r[j] * haf(rest & ~(1 << j))
        return total

    return haf((1 << k) - 1)


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    tuple_count: int
    partition_count: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# covariance structure


def class_cells(spec):
    """Cells grouped by diagonal vector.

    Returns a list, one entry per vector in layout order, of
    ``(rows, cols, positions)`` arrays (0-based).
    """
    vo = spec.vector_ordinal.ravel()
    _, m = spec.cells
    order = np.argsort(vo, kind="stable")
    bounds = np.searchsorted(vo[order], np.arange(len(spec.layout) + 1))
    n = spec.n
    out = []
    for r in range(len(spec.layout)):
        flat = order[bounds[r]:bounds[r + 1]]
        out.append((flat // n, flat % n, m.ravel()[flat] - 1))
    return out


def covariance_blocks(spec):
    """Diagonal blocks of the unscaled ``Sigma`` after grouping cells by vector.

    ``Sigma`` is block diagonal under that grouping, so its spectrum and
    its Gershgorin row sums are those of the blocks.
    """
    out = []
    for (rows, cols, pos), cov in zip(class_cells(spec), spec.covariances):
        out.append(cov.entries[np.ix_(pos, pos)])
    return out


def entry_covariance_matrix(spec):
    """Dense unscaled ``n^2 x n^2`` entry covariance ``Sigma`` (``n <= 64``)."""
    n = spec.n
    if n > DENSE_SIGMA_CAP:
        raise CapExceeded(f"dense Sigma needs n <= {DENSE_SIGMA_CAP}, got {n}")
    sigma = np.zeros((n * n, n * n))
    for (rows, cols, pos), cov in zip(class_cells(spec), spec.covariances):
        flat = rows * n + cols
        sigma[np.ix_(flat, flat)] = cov.entries[np.ix_(pos, pos)]
    return sigma


def _pair_lookup(spec):
    """Vectorized ``Sigma[a, b]`` for flat cell indices ``a, b``."""
    vo = spec.vector_ordinal.ravel()
    pos = spec.cells[1].ravel() - 1
    dmax = max(spec.layout.lengths)
    stacked = np.zeros((len(spec.layout), dmax, dmax))
    for r, cov in enumerate(spec.covariances):
        stacked[r, : cov.dim, : cov.dim] = cov.entries

    def lookup(a, b):
        same = vo[a] == vo[b]
        return np.where(same, stacked[vo[a], pos[a], pos[b]], 0.0)

    return lookup


# ---------------------------------------------------------------------------
# trace moments


def exact_feasible(n, p):
    """Whether :func:`exact_trace_moments` can run without hitting a cap."""
    if p <= 2:
        return True
    return p <= 4 and n <= DENSE_SIGMA_CAP and n**p <= TUPLE_CAP and n ** (2 * p) <= CONTRACTION_CAP


def exact_trace_moments(spec, p, method="auto"):
    """Exact ``E[W]`` and ``Var(W)`` for ``W = Tr(X^p)``.

    Parameters
    ----------
    spec : SampleSpec
    p : int
        Monomial degree, ``1 <= p <= 4``.
    method : {"auto", "blocks", "contract", "enumerate"}
        ``"enumerate"`` loops over index tuples and evaluates every Wick
        moment separately (reference route, ``n^{2p} <= 10^6``).
        ``"contract"`` sums each pair partition as one tensor contraction
        over the dense ``Sigma``.  ``"blocks"`` uses closed forms on the
        block structure of ``Sigma`` and handles ``p <= 2`` at any ``n``.

    Returns
    -------
    MomentReport
    """
    p = int(p)
    n = spec.n
    if p < 1:
        raise BadParameter("p must be a positive integer")
    if p > 4:
        raise CapExceeded("exact trace moments support p <= 4")
    if method == "auto":
        method = "blocks" if p <= 2 else "contract"
    counts = dict(tuple_count=n**p, partition_count=double_factorial(2 * p - 1))
    if method == "blocks":
        if p > 2:
            raise BadParameter("block method covers p <= 2 only")
        mean, var = _moments_blocks(spec, p)
    elif method == "contract":
        if n > DENSE_SIGMA_CAP or n ** (2 * p) > CONTRACTION_CAP:
            raise CapExceeded(f"exact moments for n={n}, p={p} exceed the contraction cap")
        mean, var = _moments_contract(spec, p)
    elif method == "enumerate":
        if n ** (2 * p) > TUPLE_CAP:
            raise CapExceeded(f"enumeration of {n ** (2 * p)} tuple pairs exceeds {TUPLE_CAP}")
        mean, var = _moments_enumerate(spec, p)
    else:
        raise BadParameter(f"unknown method {method!r}")
    if var < -1e-9 * max(1.0, abs(mean) ** 2):
        raise ArithmeticError(f"negative exact variance {var}")
    return MomentReport(mean=float(mean), variance=float(max(var, 0.0)), **counts)


def _cycle_entries(first, p):
    return [(first[t], first[(t + 1) % p]) for t in range(p)]


def _contract(s4, entries, pairing):
    letters = {}

    def sym(x):
        if x not in letters:
            letters[x] = chr(ord("a") + len(letters))
        return letters[x]

    subs = []
    for x, y in pairing:
        (i, j), (r, s) = entries[x - 1], entries[y - 1]
        subs.append(sym(i) + sym(j) + sym(r) + sym(s))
    expr = ",".join(subs) + "->"
    return float(np.einsum(expr, *([s4] * len(subs)), optimize="greedy"))


def _moments_contract(spec, p):
    n = spec.n
    s4 = entry_covariance_matrix(spec).reshape(n, n, n, n)
    ii = [("i", t) for t in range(p)]
    jj = [("j", t) for t in range(p)]
    first = _cycle_entries(ii, p)
    both = first + _cycle_entries(jj, p)
    mean = 0.0
    if p % 2 == 0:
        mean = sum(_contract(s4, first, pi) for pi in pair_partitions(p // 2)) / n ** (p / 2)
    # E[W]^2 is exactly the sum over pairings that never cross the halves
    var = 0.0
    for pi in pair_partitions(p):
        if any((x <= p) != (y <= p) for x, y in pi):
            var += _contract(s4, both, pi)
    return mean, var / n**p


def _moments_blocks(spec, p):
    n = spec.n
    look = _pair_lookup(spec)
    idx = np.arange(n)
    if p == 1:
        diag = idx * n + idx
        a, b = np.meshgrid(diag, diag, indexing="ij")
        return 0.0, float(look(a.ravel(), b.ravel()).sum()) / n
    cells = np.arange(n * n)
    transpose = (cells % n) * n + cells // n
    mean = float(look(cells, transpose).sum()) / n
    total = 0.0
    for rows, cols, pos in class_cells(spec):
        flat = rows * n + cols
        a, b = np.meshgrid(flat, flat, indexing="ij")
        a, b = a.ravel(), b.ravel()
        total += float(np.sum(look(a, b) * look(transpose[a], transpose[b])))
    return mean, 2.0 * total / n**2


def _moments_enumerate(spec, p):
    from .sampler import entry_covariance_exact

    n = spec.n
    cov_cache = {}

    def cov(e, f):
        key = (e, f)
        if key not in cov_cache:
            cov_cache[key] = n * entry_covariance_exact(spec, (e[0] + 1, e[1] + 1), (f[0] + 1, f[1] + 1))
        return cov_cache[key]

    def moment(entries):
        k = len(entries)
        c = np.array([[cov(entries[a], entries[b]) for b in range(k)] for a in range(k)])
        return gaussian_product_moment(c)

    tuples = list(itertools.product(range(n), repeat=p))
    words = [_cycle_entries(t, p) for t in tuples]
    first = [moment(w) for w in words]
    mean_raw = sum(first)
    second_raw = 0.0
    for w in words:
        for w2 in words:
            second_raw += moment(w + w2)
    mean = mean_raw / n ** (p / 2)
    var = second_raw / n**p - mean**2
    return mean, var
