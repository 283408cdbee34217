"""Constructors for the states and operators used by the protocols."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import CompositeDims, DensityOp, RangeError

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_PAULI = {"i": I2, "x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")

# Bell outcome index -> receiver correction
BELL_CORRECTIONS = {0: I2, 1: SIGMA_Z, 2: SIGMA_X, 3: SIGMA_Y}

MAX_PARTIES = 5


@dataclass(frozen=True)
class PureQubitParams:
    """Bloch angles of ``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise RangeError(f"theta={self.theta!r} outside [0, pi]")
        if not (0.0 <= self.phi < 2 * math.pi):
            raise RangeError(f"phi={self.phi!r} outside [0, 2pi)")

    def amplitudes(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta / 2), np.exp(1j * self.phi) * math.sin(self.theta / 2)],
            dtype=complex,
        )

    def orthogonal_amplitudes(self) -> np.ndarray:
        return np.array(
            [math.sin(self.theta / 2), -np.exp(1j * self.phi) * math.cos(self.theta / 2)],
            dtype=complex,
        )


def _check_p(p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise RangeError(f"p={p!r} outside [0, 1]")
    return float(p)


def _check_n(n: int, lo: int = 2, hi: int = MAX_PARTIES) -> int:
    if int(n) != n or not (lo <= n <= hi):
        raise RangeError(f"n={n!r} outside [{lo}, {hi}]")
    return int(n)


def _labels(labels, n: int, default: str) -> tuple[str, ...]:
    if labels is None:
        return tuple(f"{default}{k}" for k in range(n)) if n > 1 else (default,)
    labels = (labels,) if isinstance(labels, str) else tuple(labels)
    if len(labels) != n:
        raise RangeError(f"need {n} labels, got {labels}")
    return labels


def pure_qubit(params: PureQubitParams, label: str = "a") -> DensityOp:
    return DensityOp.from_vector(params.amplitudes(), CompositeDims.qubits(label))


def basis_state(bit: int, label: str = "q") -> DensityOp:
    v = np.zeros(2, dtype=complex)
    v[bit] = 1.0
    return DensityOp.from_vector(v, CompositeDims.qubits(label))


def bell_vector(i: int) -> np.ndarray:
    if i not in (0, 1, 2, 3):
        raise RangeError(f"Bell index {i!r} not in 0..3")
    s = 1 / math.sqrt(2)
    return {
        0: np.array([s, 0, 0, s]),
        1: np.array([s, 0, 0, -s]),
        2: np.array([0, s, s, 0]),
        3: np.array([0, s, -s, 0]),
    }[i].astype(complex)


def bell_state(i: int, labels=("A", "B")) -> DensityOp:
    """Bell state by index: 0 phi+, 1 phi-, 2 psi+, 3 psi-."""
    return DensityOp.from_vector(bell_vector(i), CompositeDims.qubits(*_labels(labels, 2, "q")))


def bell_basis() -> list[np.ndarray]:
    """The four Bell projectors, in index order."""
    return [np.outer(v, v.conj()) for v in map(bell_vector, range(4))]


def computational_basis(dim: int) -> list[np.ndarray]:
    return [np.diag(np.eye(dim)[k]).astype(complex) for k in range(dim)]


def parity_projectors() -> list[np.ndarray]:
    """Even / odd parity projectors on two bits: ``[P_even, P_odd]``."""
    return [np.diag([1, 0, 0, 1]).astype(complex), np.diag([0, 1, 1, 0]).astype(complex)]


def ghz(n: int, labels=None) -> DensityOp:
    n = _check_n(n)
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return DensityOp.from_vector(v, CompositeDims.qubits(*_labels(labels, n, "q")))


def classical_correlated(n: int, labels=None) -> DensityOp:
    """Equal mixture of all-zeros and all-ones on ``n`` bits."""
    n = _check_n(n)
    d = np.zeros(2**n)
    d[0] = d[-1] = 0.5
    return DensityOp(np.diag(d).astype(complex), CompositeDims.qubits(*_labels(labels, n, "q")))


def classical_mixture(p: float, label: str = "a") -> DensityOp:
    p = _check_p(p)
    return DensityOp(np.diag([p, 1 - p]).astype(complex), CompositeDims.qubits(label))


def broadcast_state(p: float, n: int, labels=None) -> DensityOp:
    """``p|0..0><0..0| + (1-p)|1..1><1..1|`` on ``n`` bits (``n`` may be 1)."""
    p = _check_p(p)
    n = _check_n(n, lo=1)
    d = np.zeros(2**n)
    d[0] += p
    d[-1] += 1 - p
    return DensityOp(np.diag(d).astype(complex), CompositeDims.qubits(*_labels(labels, n, "q")))


def psi_pair(params: PureQubitParams, labels=("A", "B")) -> DensityOp:
    """``(|psi psi> + |psi_perp psi_perp>)/sqrt(2)`` built from the given angles."""
    psi, perp = params.amplitudes(), params.orthogonal_amplitudes()
    v = (np.kron(psi, psi) + np.kron(perp, perp)) / math.sqrt(2)
    return DensityOp.from_vector(v, CompositeDims.qubits(*_labels(labels, 2, "q")))


def pauli(which: str) -> np.ndarray:
    try:
        return _PAULI[which.lower()].copy()
    except KeyError:
        raise RangeError(f"unknown Pauli {which!r}") from None


def maximally_mixed(dim: int = 2, labels=None) -> DensityOp:
    if labels is None:
        labels = ("q",)
    labels = (labels,) if isinstance(labels, str) else tuple(labels)
    if len(labels) == 1:
        dims = CompositeDims(labels, (dim,))
    else:
        dims = CompositeDims.qubits(*labels)
    return DensityOp(np.eye(dims.total, dtype=complex) / dims.total, dims)


def mixed_input(p: float, params: PureQubitParams, label: str = "a") -> DensityOp:
    """``p|psi><psi| + (1-p) I/2``."""
    p = _check_p(p)
    psi = pure_qubit(params, label)
    m = p * psi.matrix + (1 - p) * I2 / 2
    return DensityOp(m, psi.dims, psi.vector if p == 1.0 else None)


def branch_states(params: PureQubitParams) -> list[np.ndarray]:
    """Receiver's conditional qubit after each Bell outcome: psi, Z psi, X psi, Y psi."""
    psi = params.amplitudes()
    return [psi, SIGMA_Z @ psi, SIGMA_X @ psi, SIGMA_Y @ psi]


def post_measurement_state(params: PureQubitParams, labels=("a", "A", "B")) -> DensityOp:
    """``1/4 sum_i |Psi_i><Psi_i| (x) |psi_i><psi_i|`` for the teleportation window."""
    m = np.zeros((8, 8), dtype=complex)
    for i, phi in enumerate(branch_states(params)):
        v = np.kron(bell_vector(i), phi)
        m += 0.25 * np.outer(v, v.conj())
    return DensityOp(m, CompositeDims.qubits(*labels))
