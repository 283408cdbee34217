"""Dense complex linear algebra on labelled composite systems.

Matrices are plain ``numpy`` complex arrays. A :class:`DensityOp` pairs a
matrix with a :class:`CompositeDims` describing its ordered subsystems; all
reshaping follows declaration order, first label = leftmost tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-12
TRACE_TOL = 1e-10


class VQIError(ValueError):
    """Base class for every error raised by this package."""


class LabelError(VQIError):
    pass


class SymmetryError(VQIError):
    pass


class DimensionError(VQIError):
    pass


class RangeError(VQIError):
    pass


class StateError(VQIError):
    pass


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise VQIError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class CompositeDims:
    """Ordered ``(label, dim)`` pairs of a composite Hilbert space."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise DimensionError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise LabelError(f"duplicate labels in {self.labels}")
        if any(d < 1 for d in self.dims):
            raise DimensionError(f"non-positive subsystem dimension in {self.dims}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "CompositeDims":
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def qubits(cls, *labels: str) -> "CompositeDims":
        return cls(tuple(labels), (2,) * len(labels))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.dims else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(l)] for l in labels], dtype=int))

    def select(self, labels: Iterable[str]) -> "CompositeDims":
        """Sub-structure with ``labels`` kept in declaration order."""
        keep = set(labels)
        for l in keep:
            self.index(l)
        pairs = [(l, d) for l, d in zip(self.labels, self.dims) if l in keep]
        return CompositeDims(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __add__(self, other: "CompositeDims") -> "CompositeDims":
        return CompositeDims(self.labels + other.labels, self.dims + other.dims)


@dataclass(frozen=True, eq=False)
class DensityOp:
    """A density matrix over labelled subsystems.

    ``vector`` is kept for pure states only; the matrix is authoritative.
    """

    matrix: np.ndarray
    dims: CompositeDims
    vector: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != self.dims.total:
            raise DimensionError(
                f"matrix dim {m.shape[0]} does not match subsystems {self.dims}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.vector is not None:
            v = np.asarray(self.vector, dtype=complex).reshape(-1)
            v.setflags(write=False)
            object.__setattr__(self, "vector", v)

    @classmethod
    def from_vector(cls, vec, dims: CompositeDims) -> "DensityOp":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), dims, v)

    @classmethod
    def validated(cls, matrix, dims: CompositeDims) -> "DensityOp":
        """Build after checking Hermiticity, trace and positivity.

        Eigenvalues in ``[-PSD_TOL, 0)`` are clipped and the result renormalised.
        """
        m = as_matrix(matrix)
        check_hermitian(m)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"trace {tr!r} differs from 1")
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if w.min() < -PSD_TOL:
            raise StateError(f"negative eigenvalue {w.min()!r}")
        if w.min() < 0:
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            m = (v * w) @ v.conj().T
        return cls(m, dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.dims.labels

    def reorder(self, labels: Sequence[str]) -> "DensityOp":
        """Same state with subsystems permuted into ``labels`` order."""
        labels = tuple(labels)
        if labels == self.labels:
            return self
        m, new = reorder_matrix(self.matrix, self.dims, labels)
        vec = None
        if self.vector is not None:
            perm = [self.dims.index(l) for l in labels]
            vec = self.vector.reshape(self.dims.dims).transpose(perm).reshape(-1)
        return DensityOp(m, new, vec)


def reorder_matrix(m: np.ndarray, dims: CompositeDims, labels: Sequence[str]):
    """Permute an operator on ``dims`` so its factors follow ``labels``."""
    labels = tuple(labels)
    if sorted(labels) != sorted(dims.labels):
        raise LabelError(f"{labels} is not a permutation of {dims.labels}")
    perm = [dims.index(l) for l in labels]
    n = len(perm)
    t = np.asarray(m).reshape(dims.dims * 2).transpose(perm + [p + n for p in perm])
    new = CompositeDims(labels, tuple(dims.dims[p] for p in perm))
    return np.ascontiguousarray(t.reshape(dims.total, dims.total)), new


def lift(op, dims: CompositeDims, labels: Sequence[str]) -> np.ndarray:
    """Embed ``op`` acting on ``labels`` (in that order) into the full space of ``dims``."""
    labels = tuple(labels)
    op = as_matrix(op)
    if op.shape[0] != dims.dim_of(labels):
        raise DimensionError(f"operator of dim {op.shape[0]} cannot act on {labels}")
    rest = tuple(l for l in dims.labels if l not in labels)
    full = np.kron(op, np.eye(dims.dim_of(rest), dtype=complex))
    src = CompositeDims(labels + rest, tuple(dims.dims[dims.index(l)] for l in labels + rest))
    m, _ = reorder_matrix(full, src, dims.labels)
    return m


def kron(a, b) -> np.ndarray:
    """Kronecker product, ``a`` is the leftmost factor."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(ms: Iterable) -> np.ndarray:
    return reduce(kron, ms, np.ones((1, 1), dtype=complex))


def tensor(*states: DensityOp) -> DensityOp:
    """Tensor product of labelled states (labels must be disjoint)."""
    dims = reduce(lambda x, y: x + y, (s.dims for s in states), CompositeDims((), ()))
    vec = None
    if all(s.vector is not None for s in states):
        vec = reduce(np.kron, (s.vector for s in states), np.ones(1, dtype=complex))
    return DensityOp(kron_all(s.matrix for s in states), dims, vec)


def partial_trace(rho: DensityOp, keep: Iterable[str]) -> DensityOp:
    """Trace out every subsystem not in ``keep``; kept order is preserved."""
    keep = set(keep)
    for label in keep:
        rho.dims.index(label)
    n = len(rho.labels)
    kept_idx = [i for i, l in enumerate(rho.labels) if l in keep]
    traced = [i for i in range(n) if i not in kept_idx]
    if not traced:
        return rho
    t = rho.matrix.reshape(rho.dims.dims * 2)
    # move traced axes to the end, pair them up, contract
    order = kept_idx + [i + n for i in kept_idx] + traced + [i + n for i in traced]
    t = t.transpose(order)
    dk = int(np.prod([rho.dims.dims[i] for i in kept_idx], dtype=int))
    dt = int(np.prod([rho.dims.dims[i] for i in traced], dtype=int))
    t = t.reshape(dk, dk, dt, dt)
    out = np.trace(t, axis1=2, axis2=3)
    return DensityOp(out, rho.dims.select(keep))


def partial_transpose(rho: DensityOp, subsystems: str | Iterable[str]) -> np.ndarray:
    """Transpose the named subsystem(s); the result may be non-positive."""
    names = [subsystems] if isinstance(subsystems, str) else list(subsystems)
    idx = [rho.dims.index(l) for l in names]
    n = len(rho.labels)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[i + n] = axes[i + n], axes[i]
    t = rho.matrix.reshape(rho.dims.dims * 2).transpose(axes)
    return np.ascontiguousarray(t.reshape(rho.dim, rho.dim))


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise SymmetryError(f"matrix is not Hermitian (max deviation {dev:.3g})")


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvector columns."""
    m = as_matrix(m)
    check_hermitian(m)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w[::-1].copy(), v[:, ::-1].copy()


def eigvals_hermitian(m) -> np.ndarray:
    m = as_matrix(m)
    check_hermitian(m)
    return np.linalg.eigvalsh((m + m.conj().T) / 2)[::-1].copy()


def _matrix_of(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityOp) else as_matrix(x)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a, b = _matrix_of(rho), _matrix_of(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch {a.shape} vs {b.shape}")
    if isinstance(rho, DensityOp) and isinstance(sigma, DensityOp):
        if rho.dims.dims != sigma.dims.dims:
            raise DimensionError(f"subsystem mismatch {rho.dims} vs {sigma.dims}")
    w = eigvals_hermitian(a - b)
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def random_density(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Random full-rank (or given rank) density matrix from a Ginibre draw."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
