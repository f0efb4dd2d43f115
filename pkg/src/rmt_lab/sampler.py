"""Sampling generalized patterned matrices and their trace powers.

A sample is ``X = n^{-1/2} (placed entries)`` where every diagonal vector is
drawn as ``X_k = A_k Z_k`` with ``A_k`` a factor of its covariance and
``Z_k`` i.i.d. standard normal.  The noise vector of one trial is the
concatenation of the ``Z_k`` in (k ascending, l ascending) order; the
:mod:`rmt_lab.series` module replays exactly that order.

Random streams are counter based: trial ``t`` under master seed ``s`` reads
a Philox stream keyed by ``s`` whose counter starts at ``t`` in its top
word, so any trial can be regenerated on its own, in any order, on any
thread.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .covariance import build_diagonal_cov, factor_psd
from .errors import BadIndex, BadParameter
from .patterns import PatternKind, cell_map, diagonal_layout

__all__ = [
    "NoiseStream",
    "SampleSpec",
    "PatternedMatrix",
    "draw_noise",
    "assemble",
    "sample_matrix",
    "sample_matrices",
    "entry_covariance_exact",
    "trace_power",
    "trace_powers",
    "write_matrix_csv",
]


@lru_cache(maxsize=256)
def _philox_key(master_seed):
    return np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)


def _philox_state(master_seed, trial_index):
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([0, 0, 0, int(trial_index)], dtype=np.uint64),
            "key": _philox_key(master_seed),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


@dataclass(frozen=True)
class NoiseStream:
    """Deterministic substream for one trial."""

    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < 2**64):
            raise BadParameter("master_seed must fit in 64 unsigned bits")
        if not (0 <= int(self.trial_index) < 2**64):
            raise BadParameter("trial_index must be a non-negative 64-bit integer")

    def generator(self):
        bg = np.random.Philox(key=_philox_key(self.master_seed))
        bg.state = _philox_state(self.master_seed, self.trial_index)
        return np.random.Generator(bg)

    def normals(self, size):
        return self.generator().standard_normal(size)


def draw_noise(master_seed, trial_indices, size):
    """Stack of standard-normal noise vectors, one row per trial index.

    Row ``r`` equals ``NoiseStream(master_seed, trial_indices[r]).normals(size)``.
    """
    trial_indices = np.asarray(trial_indices, dtype=np.uint64).ravel()
    out = np.empty((trial_indices.size, int(size)))
    bg = np.random.Philox(key=_philox_key(master_seed))
    gen = np.random.Generator(bg)
    for r, t in enumerate(trial_indices):
        bg.state = _philox_state(master_seed, t)
        gen.standard_normal(out=out[r])
    return out


@dataclass(frozen=True, eq=False)
class SampleSpec:
    """Pattern, size and covariance family, plus cached derived data.

    Factors are padded with zero columns to ``d_k x d_k`` so every vector
    consumes exactly ``d_k`` noise coordinates regardless of rank.
    """

    kind: PatternKind
    n: int
    family: object

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind.parse(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise BadParameter(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    def __repr__(self):
        return f"SampleSpec(kind={self.kind.value!r}, n={self.n}, family={self.family.label})"

    @cached_property
    def layout(self):
        return diagonal_layout(self.kind, self.n)

    @cached_property
    def covariances(self):
        return tuple(
            build_diagonal_cov(self.family, d, self.n, k=k)
            for k, d in zip(self.layout.ids, self.layout.lengths)
        )

    @cached_property
    def factors(self):
        out = []
        for cov in self.covariances:
            a = factor_psd(cov)
            if a.shape[1] < cov.dim:
                a = np.hstack([a, np.zeros((cov.dim, cov.dim - a.shape[1]))])
            a.setflags(write=False)
            out.append(a)
        return tuple(out)

    @cached_property
    def offsets(self):
        return self.layout.offsets()

    @property
    def noise_size(self):
        return self.layout.total

    @cached_property
    def cells(self):
        """``(K, M)``: vector id and 1-based position of every cell."""
        return cell_map(self.kind, self.n)

    @cached_property
    def vector_ordinal(self):
        """Position of each cell's vector within ``layout.ids`` (n x n)."""
        k, _ = self.cells
        lookup = {kid: r for r, kid in enumerate(self.layout.ids)}
        out = np.vectorize(lookup.__getitem__, otypes=[np.int64])(k)
        out.setflags(write=False)
        return out

    @cached_property
    def flat_index(self):
        """Index of every cell into the concatenated vector values."""
        _, m = self.cells
        off = np.asarray(self.offsets)
        out = off[self.vector_ordinal] + m - 1
        out.setflags(write=False)
        return out

    def max_variance(self):
        return max(float(np.max(c.variances)) for c in self.covariances)

    def min_variance(self):
        return min(float(np.min(c.variances)) for c in self.covariances)


@dataclass(frozen=True, eq=False)
class PatternedMatrix:
    entries: np.ndarray
    spec: SampleSpec
    noise: np.ndarray


def _vector_values(spec, noise):
    noise = np.asarray(noise, dtype=float)
    if noise.shape[-1] != spec.noise_size:
        raise BadParameter(f"noise has {noise.shape[-1]} coordinates, spec needs {spec.noise_size}")
    vals = np.empty_like(noise)
    for off, d, a in zip(spec.offsets, spec.layout.lengths, spec.factors):
        # contiguous operands keep matmul on the BLAS path
        vals[..., off:off + d] = np.ascontiguousarray(noise[..., off:off + d]) @ a.T
    return vals


def assemble(spec, noise):
    """Matrix (or stack of matrices) built from noise vectors."""
    vals = _vector_values(spec, noise)
    return np.ascontiguousarray(vals[..., spec.flat_index]) / np.sqrt(spec.n)


def sample_matrix(spec, stream):
    z = stream.normals(spec.noise_size)
    return PatternedMatrix(assemble(spec, z), spec, z)


def sample_matrices(spec, master_seed, trial_indices):
    """Stack of sampled matrices, shape ``(len(trial_indices), n, n)``.

    Reproducible bit for bit for a fixed index list.  Row ``r`` agrees with
    ``sample_matrix(spec, NoiseStream(master_seed, trial_indices[r]))`` up to
    rounding only, because BLAS picks its kernel by batch shape.
    """
    return assemble(spec, draw_noise(master_seed, trial_indices, spec.noise_size))


def entry_covariance_exact(spec, ij, rs):
    """``Cov(X_ij, X_rs)`` of the scaled matrix (1-based indices)."""
    n = spec.n
    (i, j), (r, s) = ij, rs
    if not all(1 <= x <= n for x in (i, j, r, s)):
        raise BadIndex(f"indices {ij}, {rs} outside a {n}x{n} matrix")
    vo = spec.vector_ordinal
    if vo[i - 1, j - 1] != vo[r - 1, s - 1]:
        return 0.0
    _, m = spec.cells
    cov = spec.covariances[vo[i - 1, j - 1]].entries
    return float(cov[m[i - 1, j - 1] - 1, m[r - 1, s - 1] - 1]) / n


def trace_powers(x, p):
    """``Tr(X^p)`` for a matrix or a stack of matrices."""
    p = int(p)
    if p < 1:
        raise BadParameter(f"p must be a positive integer, got {p}")
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if p == 1:
            out = np.trace(x, axis1=-2, axis2=-1)
        else:
            half = np.linalg.matrix_power(x, p // 2)
            other = half if p % 2 == 0 else half @ x
            out = np.einsum("...ij,...ji->...", half, other)
    if not np.all(np.isfinite(out)):
        raise OverflowError("trace power overflowed; entries too large")
    return out


def trace_power(x, p):
    """``Tr(X^p)`` of one matrix (a :class:`PatternedMatrix` or an array)."""
    if isinstance(x, PatternedMatrix):
        x = x.entries
    return float(trace_powers(x, p))


def write_matrix_csv(x, path):
    """Row-major CSV with 17 significant digits."""
    if isinstance(x, PatternedMatrix):
        x = x.entries
    np.savetxt(path, np.asarray(x), delimiter=",", fmt="%.17g")
