"""Entropic and entanglement measures, all in bits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .linalg import (
    PSD_TOL,
    CompositeDims,
    DensityOp,
    DimensionError,
    LabelError,
    StateError,
    VQIError,
    eig_hermitian,
    eigvals_hermitian,
    kron,
    partial_trace,
    partial_transpose,
    random_density,
    tensor,
)

PPT_TOL = 1e-10
SUPPORT_WEIGHT_TOL = 1e-9
PROJECTOR_TOL = 1e-10


@dataclass(frozen=True)
class RelativeEntropy:
    """Relative entropy in bits; ``bits is None`` means +infinity (support mismatch)."""

    bits: Optional[float]

    @property
    def infinite(self) -> bool:
        return self.bits is None

    def __float__(self):
        if self.bits is None:
            raise VQIError("relative entropy is infinite")
        return self.bits


@dataclass
class CorrelationProfile:
    mutual_information_bits: float
    nearest_product_relent_bits: float
    negativity: float
    ppt: bool
    discord_measured_side_bits: dict[str, float] = field(default_factory=dict)
    classical_correlation_bits: float = 0.0

    def as_dict(self) -> dict:
        return {
            "mutual_information_bits": self.mutual_information_bits,
            "nearest_product_relent_bits": self.nearest_product_relent_bits,
            "negativity": self.negativity,
            "ppt": self.ppt,
            "discord_measured_side_bits": dict(self.discord_measured_side_bits),
            "classical_correlation_bits": self.classical_correlation_bits,
        }


def _clipped_spectrum(m: np.ndarray) -> np.ndarray:
    w = eigvals_hermitian(m)
    return np.where(w < PSD_TOL, 0.0, w)


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(abs(-np.sum(p * np.log2(p))))


def von_neumann_entropy(rho: DensityOp | np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityOp) else rho
    return shannon_entropy(_clipped_spectrum(m))



def relative_entropy(rho: DensityOp, sigma: DensityOp) -> RelativeEntropy:
    """``tr rho (log rho - log sigma)``; infinite when supp(rho) is not inside supp(sigma)."""
    if rho.dims.dims != sigma.dims.dims:
        raise DimensionError(f"dimension mismatch {rho.dims} vs {sigma.dims}")
    ws, vs = eig_hermitian(sigma.matrix)
    # rho's weight on each eigenvector of sigma
    weights = np.real(np.einsum("ik,ij,jk->k", vs.conj(), rho.matrix, vs))
    null = ws < PSD_TOL
    if np.any(weights[null] > SUPPORT_WEIGHT_TOL):
        return RelativeEntropy(None)
    log_s = np.zeros_like(ws)
    log_s[~null] = np.log2(ws[~null])
    cross = float(np.sum(weights[~null] * log_s[~null]))
    value = -von_neumann_entropy(rho) - cross
    return RelativeEntropy(max(value, 0.0) if value > -1e-12 else value)


def _check_cut(rho: DensityOp, cut) -> tuple[tuple[str, ...], tuple[str, ...]]:
    x, y = (tuple([c]) if isinstance(c, str) else tuple(c) for c in cut)
    if not x or not y or set(x) & set(y) or set(x) | set(y) != set(rho.labels):
        raise LabelError(f"cut {cut} is not a bipartition of {rho.labels}")
    return x, y


def mutual_information(rho: DensityOp, cut) -> float:
    x, y = _check_cut(rho, cut)
    sx = von_neumann_entropy(partial_trace(rho, x))
    sy = von_neumann_entropy(partial_trace(rho, y))
    return max(0.0, sx + sy - von_neumann_entropy(rho))


def product_of_marginals(rho: DensityOp, cut) -> DensityOp:
    x, y = _check_cut(rho, cut)
    prod = tensor(partial_trace(rho, x), partial_trace(rho, y))
    return prod.reorder(rho.labels)


def nearest_product_relent(rho: DensityOp, cut) -> tuple[float, DensityOp]:
    """Relative entropy to the closest product state and that state.

    The minimiser is the product of the marginals, which is evaluated directly;
    :func:`product_sweep` probes the claim numerically.
    """
    sigma = product_of_marginals(rho, cut)
    r = relative_entropy(rho, sigma)
    return float(r), sigma


def product_sweep(
    rho: DensityOp,
    cut,
    count: int = 200,
    seed: int = 0,
    scales: Sequence[float] = (1e-3, 1e-2, 1e-1, 0.5),
) -> float:
    """Smallest relative entropy found among random product states near the marginals."""
    x, y = _check_cut(rho, cut)
    rx, ry = partial_trace(rho, x), partial_trace(rho, y)
    rng = np.random.default_rng(seed)
    best = math.inf
    for k in range(count):
        eps = scales[k % len(scales)]
        mx = (1 - eps) * rx.matrix + eps * random_density(rx.dim, rng)
        my = (1 - eps) * ry.matrix + eps * random_density(ry.dim, rng)
        cand = DensityOp(kron(mx, my), rx.dims + ry.dims).reorder(rho.labels)
        r = relative_entropy(rho, cand)
        if not r.infinite:
            best = min(best, r.bits)
    return best


def negativity(rho: DensityOp, cut) -> float:
    """Sum of magnitudes of the negative eigenvalues of the partial transpose on ``cut[1]``."""
    _, y = _check_cut(rho, cut)
    w = eigvals_hermitian(partial_transpose(rho, y))
    return float(max(0.0, -np.sum(w[w < 0])))


def is_ppt(rho: DensityOp, cut) -> bool:
    return negativity(rho, cut) <= PPT_TOL


def check_projective(projectors: Sequence[np.ndarray], dim: int) -> None:
    total = np.zeros((dim, dim), dtype=complex)
    for i, p in enumerate(projectors):
        if p.shape != (dim, dim):
            raise DimensionError(f"projector {i} has shape {p.shape}, expected {(dim, dim)}")
        if np.max(np.abs(p @ p - p)) > PROJECTOR_TOL or np.max(np.abs(p - p.conj().T)) > PROJECTOR_TOL:
            raise VQIError(f"operator {i} is not an orthogonal projector")
        for j in range(i):
            if np.max(np.abs(p @ projectors[j])) > PROJECTOR_TOL:
                raise VQIError(f"projectors {j} and {i} are not orthogonal")
        total += p
    if np.max(np.abs(total - np.eye(dim))) > PROJECTOR_TOL:
        raise VQIError("projectors do not sum to the identity")


def classical_information(rho: DensityOp, measured: Sequence[str], projectors) -> float:
    """Mutual information between a projective measurement on ``measured`` and the rest.

    Equals ``S(rho_rest) - sum_k p_k S(rho_rest|k)``.
    """
    measured = tuple(measured)
    rest = tuple(l for l in rho.labels if l not in measured)
    ordered = rho.reorder(measured + rest)
    dm = ordered.dims.dim_of(measured)
    dr = ordered.dim // dm
    check_projective(projectors, dm)
    s_rest = von_neumann_entropy(partial_trace(ordered, rest))
    cond = 0.0
    for p in projectors:
        op = np.kron(p, np.eye(dr))
        post = op @ ordered.matrix @ op
        t = post.reshape(dm, dr, dm, dr)
        r = np.trace(t, axis1=0, axis2=2)
        prob = np.trace(r).real
        if prob > PSD_TOL:
            cond += prob * von_neumann_entropy(r / prob)
    return max(0.0, s_rest - cond)


def bloch_projectors(theta: float, phi: float) -> list[np.ndarray]:
    v = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
    w = np.array([math.sin(theta / 2), -np.exp(1j * phi) * math.cos(theta / 2)])
    return [np.outer(v, v.conj()), np.outer(w, w.conj())]


def discord(
    rho: DensityOp,
    measured_side: Iterable[str] | str,
    certificate: Optional[Sequence[np.ndarray]] = None,
    resolution: int = 64,
) -> float:
    """Discord with the measurement on ``measured_side``.

    With ``certificate`` the supplied projectors are evaluated (an upper bound on
    the discord). Otherwise a ``resolution x resolution`` grid of Bloch angles is
    scanned, which requires a single-qubit measured side.
    """
    side = (measured_side,) if isinstance(measured_side, str) else tuple(measured_side)
    rest = tuple(l for l in rho.labels if l not in side)
    if not side or not rest or any(l not in rho.labels for l in side):
        raise LabelError(f"measured side {side} is not a block of {rho.labels}")
    mi = mutual_information(rho, (side, rest))
    if certificate is not None:
        j = classical_information(rho, side, list(certificate))
        return max(0.0, mi - j)
    if rho.dims.dim_of(side) != 2:
        raise VQIError("grid search is only supported for a qubit measured side")
    best = 0.0
    for t in np.linspace(0.0, math.pi, resolution):
        for f in np.linspace(0.0, 2 * math.pi, resolution, endpoint=False):
            best = max(best, classical_information(rho, side, bloch_projectors(t, f)))
            if t == 0.0:
                break
    return max(0.0, mi - best)


def negentropy(rho: DensityOp) -> float:
    return math.log2(rho.dim) - von_neumann_entropy(rho)


def fidelity(psi: DensityOp, rho: DensityOp) -> float:
    """``<psi|rho|psi>`` for a rank-one ``psi``."""
    if psi.dims.dims != rho.dims.dims:
        raise DimensionError(f"dimension mismatch {psi.dims} vs {rho.dims}")
    v = psi.vector
    if v is None:
        w, vecs = eig_hermitian(psi.matrix)
        if w[1:].size and w[1] > 1e-9:
            raise StateError("fidelity reference is not a pure state")
        v = vecs[:, 0]
    f = np.real(v.conj() @ rho.matrix @ v)
    return float(min(1.0, max(0.0, f)))


def correlation_profile(
    rho: DensityOp,
    cut,
    certificates: Optional[dict] = None,
    grid_resolution: int = 0,
) -> CorrelationProfile:
    """All correlation figures across ``cut``.

    ``certificates`` maps a side name (a tuple of labels) to projectors used in
    certificate mode; qubit sides without a certificate use the grid search when
    ``grid_resolution > 0``.
    """
    x, y = _check_cut(rho, cut)
    mi = mutual_information(rho, (x, y))
    npr, _ = nearest_product_relent(rho, (x, y))
    neg = negativity(rho, (x, y))
    certificates = certificates or {}
    disc = {}
    classical = 0.0
    for side in (x, y):
        name = ",".join(side)
        cert = certificates.get(side)
        if cert is not None:
            disc[name] = float(discord(rho, side, certificate=cert))
            classical = max(classical, float(classical_information(rho, side, cert)))
        elif grid_resolution and rho.dims.dim_of(side) == 2:
            disc[name] = float(discord(rho, side, resolution=grid_resolution))
            classical = max(classical, mi - disc[name])
    return CorrelationProfile(
        mutual_information_bits=mi,
        nearest_product_relent_bits=npr,
        negativity=neg,
        ppt=neg <= PPT_TOL,
        discord_measured_side_bits=disc,
        classical_correlation_bits=classical,
    )


def embed_records(
    branches, records: Sequence[str], labels: Sequence[str], record_dims: dict[str, int]
) -> DensityOp:
    """Classical-quantum state ``sum_b p_b |r_b><r_b| (x) rho_b`` over record registers.

    ``branches`` yields ``(probability, state, outcome dict)``; each record becomes a
    register labelled ``"#name"`` placed before ``labels``.
    """
    reg = CompositeDims(tuple("#" + r for r in records), tuple(record_dims[r] for r in records))
    total, sub = None, None
    for prob, state, outcomes in branches:
        idx = 0
        for r in records:
            idx = idx * record_dims[r] + int(outcomes[r])
        e = np.zeros((reg.total, reg.total), dtype=complex)
        e[idx, idx] = 1.0
        local = partial_trace(state, labels).reorder(tuple(labels))
        sub = local.dims
        part = prob * np.kron(e, local.matrix)
        total = part if total is None else total + part
    if total is None:
        raise StateError("no branches to embed")
    return DensityOp(total, reg + sub)
