"""Index geometry of the five patterned ensembles.

Every entry ``(i, j)`` of an ``n x n`` patterned matrix (1-based) is a
coordinate ``m`` of one diagonal vector ``X_k``.  This module fixes which
vectors exist, their lengths, and the map between entries and coordinates.

Conventions
-----------
* All ``mod n`` results are mapped into ``1..n`` via ``((x - 1) mod n) + 1``.
* Symmetric circulant: with ``d = (j - i) mod n`` the vector id is
  ``min(d, n - d)``; the position is ``i`` when ``d < n - d``, ``j`` when
  ``d > n - d`` and ``min(i, j)`` when ``d == n - d`` (even n).  This
  reproduces the displayed 4 x 4 and 5 x 5 examples entry for entry.
* Hankel: with ``s = i + j - 1`` the vector id is ``s``; the position is
  ``i`` for ``s <= n`` and ``n - j + 1`` for ``s > n``.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import BadAddress, BadIndex, BadSize

__all__ = [
    "PatternKind",
    "DiagonalLayout",
    "EntryAddress",
    "diagonal_layout",
    "entry_index",
    "positions_of",
    "cell_map",
]


class PatternKind(str, enum.Enum):
    SYMMETRIC_TOEPLITZ = "toeplitz"
    CIRCULANT = "circulant"
    REVERSE_CIRCULANT = "reverse_circulant"
    SYMMETRIC_CIRCULANT = "symmetric_circulant"
    HANKEL = "hankel"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown pattern kind {value!r}; expected one of {names}") from None

    @property
    def is_symmetric(self):
        return self in (PatternKind.SYMMETRIC_TOEPLITZ, PatternKind.SYMMETRIC_CIRCULANT)

    def __str__(self):
        return self.value


class EntryAddress(NamedTuple):
    k: int
    m: int


class DiagonalLayout(NamedTuple):
    """Vector ids and lengths, in ascending id order."""

    ids: tuple
    lengths: tuple

    def __len__(self):
        return len(self.ids)

    @property
    def total(self):
        return int(sum(self.lengths))

    def length_of(self, k):
        try:
            return self.lengths[self.ids.index(k)]
        except ValueError:
            raise BadAddress(f"no vector with id {k} in this layout") from None

    def offsets(self):
        """Start of each vector in the flat (k ascending, m ascending) ordering."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.lengths)[:-1]]))


def _check_n(n):
    if int(n) != n or n < 1:
        raise BadSize(f"matrix size must be a positive integer, got {n}")
    return int(n)


def diagonal_layout(kind, n):
    kind = PatternKind.parse(kind)
    n = _check_n(n)
    if kind is PatternKind.SYMMETRIC_TOEPLITZ:
        ids = tuple(range(n))
        lengths = tuple(n - k for k in ids)
    elif kind in (PatternKind.CIRCULANT, PatternKind.REVERSE_CIRCULANT):
        ids = tuple(range(1, n + 1))
        lengths = (n,) * n
    elif kind is PatternKind.SYMMETRIC_CIRCULANT:
        if n % 2:
            ids = tuple(range((n - 1) // 2 + 1))
            lengths = (n,) * len(ids)
        else:
            ids = tuple(range(n // 2 + 1))
            lengths = (n,) * (n // 2) + (n // 2,)
    else:
        ids = tuple(range(1, 2 * n))
        lengths = tuple(k if k <= n else 2 * n - k for k in ids)
    return DiagonalLayout(ids, lengths)


def _index(kind, n, i, j):
    if kind is PatternKind.SYMMETRIC_TOEPLITZ:
        return abs(i - j), min(i, j)
    if kind is PatternKind.CIRCULANT:
        return (j - i) % n + 1, i
    if kind is PatternKind.REVERSE_CIRCULANT:
        return (i + j - 2) % n + 1, i
    if kind is PatternKind.HANKEL:
        s = i + j - 1
        return (s, i) if s <= n else (s, n - j + 1)
    d = (j - i) % n
    if d < n - d:
        return d, i
    if d > n - d:
        return n - d, j
    return d, min(i, j)


def entry_index(kind, n, i, j):
    """Address ``(k, m)`` of matrix entry ``(i, j)``, all 1-based."""
    kind = PatternKind.parse(kind)
    n = _check_n(n)
    if not (1 <= i <= n and 1 <= j <= n):
        raise BadIndex(f"entry ({i}, {j}) outside a {n}x{n} matrix")
    return EntryAddress(*_index(kind, n, int(i), int(j)))


@lru_cache(maxsize=64)
def _cell_map(kind, n):
    k = np.empty((n, n), dtype=np.int64)
    m = np.empty((n, n), dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            k[i - 1, j - 1], m[i - 1, j - 1] = _index(kind, n, i, j)
    k.setflags(write=False)
    m.setflags(write=False)
    return k, m


def cell_map(kind, n):
    """Arrays ``(K, M)`` of shape (n, n) with the vector id and 1-based
    position of every cell.  Read-only and cached."""
    return _cell_map(PatternKind.parse(kind), _check_n(n))


def positions_of(kind, n, addr):
    """All cells ``(i, j)`` holding coordinate ``addr`` of its vector."""
    kind = PatternKind.parse(kind)
    n = _check_n(n)
    k, m = addr
    layout = diagonal_layout(kind, n)
    if k not in layout.ids or not (1 <= m <= layout.length_of(k)):
        raise BadAddress(f"address {tuple(addr)} is not a coordinate of the {kind} layout at n={n}")
    kk, mm = cell_map(kind, n)
    rows, cols = np.nonzero((kk == k) & (mm == m))
    return [(int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]
