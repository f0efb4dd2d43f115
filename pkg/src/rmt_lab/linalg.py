"""Certified operator norms."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence

__all__ = ["power_norm", "spectral_norm", "symmetric_norm", "DENSE_CAP"]

DENSE_CAP = 256


def power_norm(op, dim, tol=1e-10, max_iter=None, seed=0):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Parameters
    ----------
    op : callable
        ``v -> G @ v`` for a symmetric positive semidefinite ``G``.
    dim : int
    tol : float
        Relative change in the Rayleigh quotient that stops the iteration.
    max_iter : int, optional
        Defaults to ``10 * dim``.

    Returns
    -------
    value, residual, converged
        ``residual`` is ``||G v - value v|| / value`` at the final iterate.
    """
    max_iter = 10 * dim if max_iter is None else max_iter
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    value = 0.0
    converged = False
    for _ in range(max(1, max_iter)):
        w = op(v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, 0.0, True
        v = w / nw
        if abs(new - value) <= tol * max(abs(new), 1e-300):
            value = new
            converged = True
            break
        value = new
    w = op(v)
    value = float(v @ w)
    residual = float(np.linalg.norm(w - value * v) / max(abs(value), 1e-300))
    return value, residual, converged


def symmetric_norm(g, tol=1e-10, certify=1e-8):
    """Spectral norm of a symmetric PSD matrix.

    Power iteration first; if it does not converge to a residual below
    ``certify`` and the matrix is small enough, a dense eigensolve decides.
    """
    g = np.asarray(g, dtype=float)
    dim = g.shape[0]
    value, residual, ok = power_norm(lambda v: g @ v, dim, tol=tol)
    if ok and residual < certify:
        return value
    if dim <= DENSE_CAP:
        return float(np.max(np.abs(np.linalg.eigvalsh(g))))
    raise NoConvergence(f"power iteration residual {residual:.2e} after {10 * dim} steps")


def spectral_norm(x, tol=1e-10, certify=1e-8):
    """Largest singular value of ``x``.

    Power iteration on ``x.T @ x`` from a fixed random start, certified by
    the eigen-residual; falls back to a dense SVD for ``n <= 256``.
    """
    x = np.asarray(getattr(x, "entries", x), dtype=float)
    n = x.shape[1]
    value, residual, ok = power_norm(lambda v: x.T @ (x @ v), n, tol=tol)
    if ok and residual < certify:
        return float(np.sqrt(max(value, 0.0)))
    if max(x.shape) <= DENSE_CAP:
        return float(np.linalg.norm(x, 2))
    raise NoConvergence(f"power iteration residual {residual:.2e} after {10 * n} steps")


def batch_spectral_norms(stack, symmetric=False):
    """Spectral norms of a stack of small dense matrices (dense route)."""
    stack = np.asarray(stack, dtype=float)
    if symmetric:
        return np.max(np.abs(np.linalg.eigvalsh(stack)), axis=-1)
    return np.linalg.svd(stack, compute_uv=False)[..., 0]
