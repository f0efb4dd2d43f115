"""Covariance families for the diagonal vectors of a patterned ensemble.

Every diagonal vector ``X_k`` of a generalized patterned matrix is a centered
Gaussian vector with covariance ``c_k(i, j)``.  A :class:`CovarianceFamily`
describes how those covariances are chosen; :func:`build_diagonal_cov`
materializes one of them at a given length and :func:`factor_psd` returns a
factor ``A`` with ``A @ A.T`` equal to it, which is how the samplers turn
i.i.d. normals into correlated ones.

Families
--------
``wigner``                 c(i, j) = v * delta_ij
``full``                   c(i, j) = v
``constant_off_diagonal``  v on the diagonal, gamma * v elsewhere (0 <= gamma <= 1)
``power_decay``            v on the diagonal, n**(-alpha) * v elsewhere
``geometric_decay``        v * rho**|i - j|
``custom``                 explicit matrices keyed by vector id

Negative correlations are not supported; ``gamma`` is restricted to
``[0, 1]`` so that ``constant_off_diagonal`` stays positive semidefinite at
every length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import BadParameter, NotPSD

__all__ = [
    "FAMILY_KINDS",
    "CovarianceFamily",
    "DiagonalCovariance",
    "build_diagonal_cov",
    "factor_psd",
    "psd_tolerance",
    "row_norms",
]

FAMILY_KINDS = (
    "wigner",
    "full",
    "constant_off_diagonal",
    "power_decay",
    "geometric_decay",
    "custom",
)

RECONSTRUCTION_RTOL = 1e-8


def psd_tolerance(entries):
    """Scale-relative eigenvalue floor: ``1e-10 * dim * max|entry|``."""
    entries = np.asarray(entries, dtype=float)
    if entries.size == 0:
        return 0.0
    return 1e-10 * entries.shape[0] * float(np.max(np.abs(entries)))


@dataclass(frozen=True, eq=False)
class DiagonalCovariance:
    """Validated covariance matrix of one diagonal vector.

    Construction checks exact symmetry and that the smallest eigenvalue is
    no lower than ``-psd_tolerance(entries)``.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise BadParameter(f"covariance must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise BadParameter("covariance has non-finite entries")
        if not np.array_equal(a, a.T):
            raise NotPSD("covariance matrix is not exactly symmetric")
        if np.any(np.diag(a) < 0):
            raise NotPSD("covariance matrix has a negative variance")
        lo = np.linalg.eigvalsh(a)[0] if a.shape[0] > 1 else a[0, 0]
        if lo < -psd_tolerance(a):
            raise NotPSD(f"smallest eigenvalue {lo:.3e} below tolerance {-psd_tolerance(a):.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def variances(self):
        return np.diag(self.entries)


@dataclass(frozen=True, eq=False)
class CovarianceFamily:
    """A rule producing ``c_k(i, j)`` for every diagonal vector.

    Use the classmethod constructors rather than filling fields by hand.
    ``var_bounds`` optionally pins the ``[m, M]`` window every variance must
    fall in; when omitted the window is ``[v, v]`` for the parametric
    families and unchecked for ``custom``.
    """

    kind: str
    v: float = 1.0
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    rho: Optional[float] = None
    matrices: Optional[Mapping[int, np.ndarray]] = field(default=None, repr=False)
    var_bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise BadParameter(f"unknown covariance family {self.kind!r}")
        if self.kind != "custom":
            if not (np.isfinite(self.v) and self.v > 0):
                raise BadParameter(f"variance scale v must be positive, got {self.v}")
        if self.kind == "constant_off_diagonal":
            if self.gamma is None or not (0.0 <= self.gamma <= 1.0):
                raise BadParameter(f"gamma must lie in [0, 1], got {self.gamma}")
        elif self.kind == "power_decay":
            if self.alpha is None or not (np.isfinite(self.alpha) and self.alpha > 0):
                raise BadParameter(f"alpha must be positive, got {self.alpha}")
        elif self.kind == "geometric_decay":
            if self.rho is None or not (0.0 <= self.rho < 1.0):
                raise BadParameter(f"rho must lie in [0, 1), got {self.rho}")
        elif self.kind == "custom":
            if not self.matrices:
                raise BadParameter("custom family needs at least one matrix")
            mats = {int(k): np.array(m, dtype=float) for k, m in self.matrices.items()}
            object.__setattr__(self, "matrices", mats)
        if self.var_bounds is not None:
            m, M = self.var_bounds
            if not (0 < m <= M):
                raise BadParameter(f"variance bounds must satisfy 0 < m <= M, got {self.var_bounds}")
            if self.kind != "custom" and not (m <= self.v <= M):
                raise BadParameter(f"v={self.v} outside variance bounds {self.var_bounds}")

    # constructors -------------------------------------------------------

    @classmethod
    def wigner(cls, v=1.0):
        return cls("wigner", v=v)

    @classmethod
    def full(cls, v=1.0):
        return cls("full", v=v)

    @classmethod
    def constant_off_diagonal(cls, gamma, v=1.0):
        return cls("constant_off_diagonal", v=v, gamma=gamma)

    @classmethod
    def power_decay(cls, alpha, v=1.0):
        return cls("power_decay", v=v, alpha=alpha)

    @classmethod
    def geometric_decay(cls, rho, v=1.0):
        return cls("geometric_decay", v=v, rho=rho)

    @classmethod
    def custom(cls, matrices, var_bounds=None):
        return cls("custom", matrices=matrices, var_bounds=var_bounds)

    # serialization ------------------------------------------------------

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "custom":
            d["matrices"] = {str(k): m.tolist() for k, m in sorted(self.matrices.items())}
        else:
            d["v"] = self.v
        for name in ("gamma", "alpha", "rho"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.var_bounds is not None:
            d["var_bounds"] = list(self.var_bounds)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise BadParameter("family needs a 'kind'")
        allowed = {
            "wigner": {"v", "var_bounds"},
            "full": {"v", "var_bounds"},
            "constant_off_diagonal": {"v", "gamma", "var_bounds"},
            "power_decay": {"v", "alpha", "var_bounds"},
            "geometric_decay": {"v", "rho", "var_bounds"},
            "custom": {"matrices", "var_bounds"},
        }.get(kind)
        if allowed is None:
            raise BadParameter(f"unknown covariance family {kind!r}")
        extra = set(d) - allowed
        if extra:
            raise BadParameter(f"unexpected field(s) for family {kind!r}: {sorted(extra)}")
        if "var_bounds" in d:
            d["var_bounds"] = tuple(d["var_bounds"])
        if kind == "custom":
            d["matrices"] = {int(k): np.asarray(m, dtype=float) for k, m in d["matrices"].items()}
        return cls(kind, **d)

    # properties used by the bound checks ---------------------------------

    @property
    def label(self):
        if self.kind == "constant_off_diagonal":
            return f"constant_off_diagonal({self.gamma:g})"
        if self.kind == "power_decay":
            return f"power_decay({self.alpha:g})"
        if self.kind == "geometric_decay":
            return f"geometric_decay({self.rho:g})"
        return self.kind

    @property
    def shape_parameter(self):
        """gamma, alpha or rho, whichever the family carries (``None`` otherwise)."""
        for name in ("gamma", "alpha", "rho"):
            if getattr(self, name) is not None:
                return getattr(self, name)
        return None

    def covariance_floor(self):
        """Smallest covariance ``c_k(i, j)`` over all pairs, independent of n.

        Zero when the family's covariances are not bounded away from 0.
        """
        if self.kind == "full":
            return self.v
        if self.kind == "constant_off_diagonal":
            return self.gamma * self.v
        return 0.0

    def regime(self):
        """Which limit theorem covers this family.

        ``"gamma"`` for covariances bounded below by a positive constant,
        ``"decay"`` when off-diagonal covariances are o(n^{-1/3}), ``"none"``
        otherwise.
        """
        if self.covariance_floor() > 0:
            return "gamma"
        if self.kind == "wigner":
            return "decay"
        if self.kind == "power_decay" and self.alpha > 1.0 / 3.0:
            return "decay"
        return "none"

    def variance_window(self):
        if self.var_bounds is not None:
            return tuple(self.var_bounds)
        if self.kind == "custom":
            return None
        return (self.v, self.v)


def build_diagonal_cov(family, dim, n, k=None):
    """Covariance matrix of one diagonal vector.

    Parameters
    ----------
    family : CovarianceFamily
    dim : int
        Length of the diagonal vector.
    n : int
        Ambient matrix size (only ``power_decay`` depends on it).
    k : int, optional
        Vector id; required for ``custom`` families.

    Returns
    -------
    DiagonalCovariance
    """
    dim = int(dim)
    if dim < 1:
        raise BadParameter(f"dim must be >= 1, got {dim}")
    v = family.v
    kind = family.kind
    if kind == "wigner":
        c = v * np.eye(dim)
    elif kind == "full":
        c = np.full((dim, dim), v)
    elif kind == "constant_off_diagonal":
        c = np.full((dim, dim), family.gamma * v)
        np.fill_diagonal(c, v)
    elif kind == "power_decay":
        c = np.full((dim, dim), float(n) ** (-family.alpha) * v)
        np.fill_diagonal(c, v)
    elif kind == "geometric_decay":
        idx = np.arange(dim)
        c = v * family.rho ** np.abs(idx[:, None] - idx[None, :])
    else:
        if k is None or int(k) not in family.matrices:
            raise BadParameter(f"custom family has no matrix for vector {k}")
        c = family.matrices[int(k)]
        if c.shape != (dim, dim):
            raise BadParameter(f"custom matrix for vector {k} has shape {c.shape}, expected {(dim, dim)}")
        if np.any(c < 0):
            raise BadParameter(f"custom matrix for vector {k} has negative covariances")
    cov = DiagonalCovariance(c)
    window = family.variance_window()
    if window is not None:
        m, M = window
        var = cov.variances
        if np.any(var < m) or np.any(var > M):
            raise BadParameter(f"variances of vector {k} leave the window [{m}, {M}]")
    return cov


def factor_psd(cov):
    """Factor ``A`` (dim x rank) with ``A @ A.T == cov``.

    Symmetric eigendecomposition; eigenvalues in ``[-tol, tol]`` are dropped,
    anything lower raises :class:`NotPSD`.  Diagonal inputs short-circuit to
    ``diag(sqrt(var))``.  Column signs are fixed so the largest-magnitude
    entry of each column is positive, which makes the result deterministic.
    """
    c = cov.entries if isinstance(cov, DiagonalCovariance) else np.asarray(cov, dtype=float)
    tol = psd_tolerance(c)
    if np.count_nonzero(c - np.diag(np.diag(c))) == 0:
        d = np.diag(c)
        if np.any(d < -tol):
            raise NotPSD("negative variance on the diagonal")
        keep = d > tol
        a = np.zeros((c.shape[0], int(keep.sum())))
        a[np.flatnonzero(keep), np.arange(a.shape[1])] = np.sqrt(d[keep])
        return a
    w, u = np.linalg.eigh(c)
    if w[0] < -tol:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} below tolerance {-tol:.3e}")
    keep = w > tol
    a = u[:, keep] * np.sqrt(w[keep])
    a = a[:, ::-1]  # largest eigenvalue first
    pivot = np.argmax(np.abs(a), axis=0)
    signs = np.sign(a[pivot, np.arange(a.shape[1])])
    signs[signs == 0] = 1.0
    return a * signs


def row_norms(a):
    """Euclidean norm of each row; equals the square root of each variance."""
    return np.sqrt(np.sum(np.asarray(a, dtype=float) ** 2, axis=1))
