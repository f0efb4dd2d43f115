"""Gaussian-series representation and its spectral parameters.

Any sample can be written ``X = n^{-1/2} sum_{k,l} Z_{k,l} B_{k,l}`` where
``B_{k,l}`` is the ``l``-th column of the factor ``A_k`` pasted onto the cells
of vector ``k`` and ``Z_{k,l}`` are the same i.i.d. normals the sampler
uses.  Non-symmetric patterns are handled through the dilation
``[[0, B.T], [B, 0]]``, whose square is ``diag(B.T B, B B.T)``.

``sigma_param`` is ``||sum B^2||^{1/2}`` (dilated where needed) with the
``n^{-1/2}`` scaling folded in, ``nu_param`` the operator norm of the
scaled entry covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BadAddress, BadParameter
from .linalg import symmetric_norm
from .patterns import PatternKind, cell_map, diagonal_layout
from .wick import class_cells, covariance_blocks

__all__ = [
    "SeriesTerm",
    "build_series",
    "evaluate_series",
    "dilate",
    "square_sums",
    "per_diagonal_norm",
    "sigma_param",
    "nu_param",
    "symmetric_circulant_split",
    "hankel_in_reverse_circulant",
]


@dataclass(frozen=True, eq=False)
class SeriesTerm:
    k: int
    l: int
    matrix: sp.csr_matrix


def build_series(spec):
    """All terms ``B_{k,l}``, ordered by (k ascending, l ascending)."""
    n = spec.n
    terms = []
    for kid, (rows, cols, pos), a in zip(spec.layout.ids, class_cells(spec), spec.factors):
        for l in range(a.shape[1]):
            b = sp.csr_matrix((a[pos, l], (rows, cols)), shape=(n, n))
            terms.append(SeriesTerm(kid, l + 1, b))
    return terms


def evaluate_series(terms, noise, n):
    """``n^{-1/2} sum Z_{k,l} B_{k,l}`` as a dense array."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (len(terms),):
        raise BadParameter(f"need {len(terms)} noise coordinates, got {noise.shape}")
    out = np.zeros((n, n))
    for z, t in zip(noise, terms):
        out += z * t.matrix.toarray()
    return out / np.sqrt(n)


def dilate(b):
    """Symmetric ``2n x 2n`` dilation of ``b``."""
    if sp.issparse(b):
        return sp.bmat([[None, b.T], [b, None]], format="csr")
    b = np.asarray(b)
    z = np.zeros_like(b)
    return np.block([[z, b.T], [b, z]])


def _gram_sum(n, rows, cols, a, pos):
    """``sum_l B_l B_l^T`` for one vector, accumulated over same-column cell pairs."""
    order = np.argsort(cols, kind="stable")
    c_sorted = cols[order]
    starts = np.flatnonzero(np.r_[True, c_sorted[1:] != c_sorted[:-1]])
    ends = np.r_[starts[1:], len(order)]
    ia, ib = [], []
    for s, e in zip(starts, ends):
        grp = order[s:e]
        x, y = np.meshgrid(grp, grp, indexing="ij")
        ia.append(x.ravel())
        ib.append(y.ravel())
    ia = np.concatenate(ia)
    ib = np.concatenate(ib)
    v = a[pos]
    vals = np.einsum("ij,ij->i", v[ia], v[ib])
    out = np.zeros((n, n))
    np.add.at(out, (rows[ia], rows[ib]), vals)
    return out


def square_sums(spec, k=None):
    """``(sum B B^T, sum B^T B)`` over all terms, or over vector ``k`` only.

    Unscaled.  For symmetric patterns both equal ``sum B^2``.
    """
    n = spec.n
    left = np.zeros((n, n))
    right = np.zeros((n, n))
    found = False
    for kid, (rows, cols, pos), a in zip(spec.layout.ids, class_cells(spec), spec.factors):
        if k is not None and kid != k:
            continue
        found = True
        left += _gram_sum(n, rows, cols, a, pos)
        right += _gram_sum(n, cols, rows, a, pos)
    if not found:
        raise BadAddress(f"vector {k} is not in the {spec.kind} layout at n={spec.n}")
    return left, right


def _dilated_norm(spec, k=None):
    left, right = square_sums(spec, k)
    if spec.kind.is_symmetric:
        return symmetric_norm(left)
    return max(symmetric_norm(left), symmetric_norm(right))


def per_diagonal_norm(spec, k):
    """``||sum_l B_{k,l}^2||`` (unscaled; dilated for non-symmetric patterns)."""
    return _dilated_norm(spec, k)


def sigma_param(spec):
    """Matrix standard deviation parameter of the scaled series."""
    return float(np.sqrt(_dilated_norm(spec) / spec.n))


def nu_param(spec, mode="exact"):
    """``||Cov(X)||`` of the scaled matrix.

    ``mode="exact"`` takes the largest eigenvalue over the per-vector blocks
    of the covariance (exact because the covariance is block diagonal);
    ``mode="bound"`` returns the Gershgorin row-sum bound instead.
    """
    blocks = covariance_blocks(spec)
    if mode == "exact":
        val = max(symmetric_norm(b) if b.shape[0] > 1 else abs(float(b[0, 0])) for b in blocks)
    elif mode == "bound":
        val = max(float(np.max(np.sum(np.abs(b), axis=1))) for b in blocks)
    else:
        raise BadParameter(f"unknown mode {mode!r}")
    return val / spec.n


def symmetric_circulant_split(x):
    """Band split ``X = Y + Z``: ``Y`` keeps diagonals ``|i-j| <= ceil(n/2)``."""
    x = np.asarray(x)
    n = x.shape[0]
    i, j = np.indices((n, n))
    band = np.abs(i - j) <= -(-n // 2)
    return np.where(band, x, 0.0), np.where(band, 0.0, x)


def hankel_in_reverse_circulant(spec, noise, rng):
    """Couple a Hankel sample with a ``2n x 2n`` reverse circulant.

    Returns ``(H, R)``, both unscaled, where ``R[:n, :n] == H``.  Coordinates
    of the reverse-circulant vectors not pinned by ``H`` are filled with
    independent ``N(0, v)`` draws from ``rng``, which keeps every vector's
    covariance positive semidefinite.
    """
    if spec.kind is not PatternKind.HANKEL:
        raise BadParameter("spec must be a Hankel spec")
    n = spec.n
    h = np.asarray(_unscaled(spec, noise))
    big = 2 * n
    kk, mm = cell_map(PatternKind.REVERSE_CIRCULANT, big)
    layout = diagonal_layout(PatternKind.REVERSE_CIRCULANT, big)
    scale = np.sqrt(spec.max_variance())
    vectors = {k: scale * rng.standard_normal(big) for k in layout.ids}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            vectors[kk[i - 1, j - 1]][mm[i - 1, j - 1] - 1] = h[i - 1, j - 1]
    r = np.empty((big, big))
    for i in range(big):
        for j in range(big):
            r[i, j] = vectors[kk[i, j]][mm[i, j] - 1]
    return h, r


def _unscaled(spec, noise):
    from .sampler import assemble

    return assemble(spec, noise) * np.sqrt(spec.n)
