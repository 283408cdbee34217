"""Timeline builders for each protocol.

Every builder returns a :class:`BuiltScenario`: the timeline and parties plus
the metadata the audit needs (window, default groupings, cut, the designated
retrieval systems and the target state to compare them with).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

import numpy as np

from . import states as st
from .engine import (
    ConditionalUnitary,
    Discard,
    MeasureProjective,
    Party,
    Prepare,
    Relativity,
    SendClassical,
    as_time,
)
from .linalg import CompositeDims, DensityOp, RangeError, VQIError
from .states import PureQubitParams

KINDS = (
    "std_teleport",
    "classical_teleport",
    "multiparty_teleport",
    "multiparty_classical",
    "misrouted",
    "psi_pair_dist",
)

DESCRIPTIONS = {
    "std_teleport": "Teleport a pure (or depolarised) qubit with |Phi+> and 2 classical bits",
    "classical_teleport": "Teleport a classical bit mixture with shared random bit and 1 classical bit",
    "multiparty_teleport": "Teleport a qubit into a GHZ-shared state among n receivers",
    "multiparty_classical": "Broadcast a classical bit mixture to n receivers",
    "misrouted": "Standard teleportation whose message goes to Charu instead of Bob",
    "psi_pair_dist": "Distribute (|psi psi> + |psi_perp psi_perp>)/sqrt(2) to Alice and Bob",
}


class SpecError(VQIError):
    pass


@dataclass(frozen=True)
class RelativitySettings:
    enabled: bool = False
    speed: float = 1.0
    positions: Mapping[str, float] = field(default_factory=dict)

    def rule(self) -> Optional[Relativity]:
        return Relativity(self.speed, True) if self.enabled else None


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    theta: float = 0.0
    phi: float = 0.0
    p: float = 0.5
    n: int = 1
    t1: Fraction = Fraction(1)
    t_send: Fraction = Fraction(1)
    t2: Fraction = Fraction(2)
    relativity: RelativitySettings = RelativitySettings()
    discard_source: bool = False
    mixed_input_p: Optional[float] = None
    t_arrive: Optional[Fraction] = None  # message arrival; defaults to t2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown scenario kind {self.kind!r}")
        for name in ("t1", "t_send", "t2"):
            object.__setattr__(self, name, as_time(getattr(self, name)))
        if self.t_arrive is not None:
            object.__setattr__(self, "t_arrive", as_time(self.t_arrive))
        if not (self.t1 <= self.t_send < self.t2):
            raise SpecError(f"need t1 <= t_send < t2, got {self.t1}, {self.t_send}, {self.t2}")
        PureQubitParams(self.theta, self.phi)
        if not 0.0 <= self.p <= 1.0:
            raise RangeError(f"p={self.p!r} outside [0, 1]")
        if self.mixed_input_p is not None and not 0.0 <= self.mixed_input_p <= 1.0:
            raise RangeError(f"mixed_input_p={self.mixed_input_p!r} outside [0, 1]")

    @property
    def arrival(self) -> Fraction:
        return self.t2 if self.t_arrive is None else self.t_arrive

    @property
    def params(self) -> PureQubitParams:
        return PureQubitParams(self.theta, self.phi)

    def replace(self, **kw) -> "ScenarioSpec":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True, eq=False)
class BuiltScenario:
    spec: ScenarioSpec
    timeline: list
    parties: list
    sender: str
    groupings: tuple[tuple[str, ...], ...]
    cut: tuple[tuple[str, ...], tuple[str, ...]]
    certificate: Optional[tuple[tuple[str, ...], list]]
    retriever: tuple[str, ...]
    retrieval_labels: tuple[str, ...]
    target: DensityOp
    input_state: DensityOp
    records: tuple[str, ...] = ("m",)
    volatility: bool = True

    @property
    def window(self) -> tuple[Fraction, Fraction]:
        return self.spec.t1, self.spec.t2

    def __iter__(self):
        # unpacks as (timeline, parties)
        return iter((self.timeline, self.parties))


def _position(spec: ScenarioSpec, party: str, default: Optional[float]) -> Optional[float]:
    return spec.relativity.positions.get(party, default)


def _t_prep(spec: ScenarioSpec) -> Fraction:
    return spec.t1 - 1


def _check_kind(spec: ScenarioSpec, *kinds: str) -> None:
    if spec.kind not in kinds:
        raise SpecError(f"builder for {kinds} given spec of kind {spec.kind!r}")


def _check_receivers(spec: ScenarioSpec) -> int:
    if int(spec.n) != spec.n or not 1 <= spec.n <= 4:
        raise RangeError(f"number of receivers n={spec.n!r} outside [1, 4]")
    return int(spec.n)


def _qubit_input(spec: ScenarioSpec, label: str = "a") -> DensityOp:
    if spec.mixed_input_p is not None:
        return st.mixed_input(spec.mixed_input_p, spec.params, label)
    return st.pure_qubit(spec.params, label)


def _bell_teleport_events(spec, inp, message_to, correct_labels):
    t0 = _t_prep(spec)
    return [
        Prepare(t0, inp),
        Prepare(t0, st.bell_state(0, ("A", "B"))),
        MeasureProjective(spec.t1, "Alice", ("a", "A"), tuple(st.bell_basis()), "m"),
        SendClassical("Alice", message_to, "m", spec.t_send, spec.arrival),
        ConditionalUnitary(spec.t2, message_to, correct_labels, "m", dict(st.BELL_CORRECTIONS)),
    ]


def std_teleport(spec: ScenarioSpec) -> BuiltScenario:
    _check_kind(spec, "std_teleport")
    inp = _qubit_input(spec)
    parties = [
        Party("Alice", {"a", "A"}, _position(spec, "Alice", 0.0)),
        Party("Bob", {"B"}, _position(spec, "Bob", None)),
    ]
    return BuiltScenario(
        spec=spec,
        timeline=_bell_teleport_events(spec, inp, "Bob", ("B",)),
        parties=parties,
        sender="Alice",
        groupings=(("a", "A"), ("B",)),
        cut=(("a", "A"), ("B",)),
        certificate=(("a", "A"), st.bell_basis()),
        retriever=("Bob",),
        retrieval_labels=("B",),
        target=_relabel(inp, ("B",)),
        input_state=inp,
    )


def misrouted(spec: ScenarioSpec) -> BuiltScenario:
    """Alice's two bits go to Charu, who holds a fresh |0> and no entangled share."""
    _check_kind(spec, "misrouted")
    inp = _qubit_input(spec)
    parties = [
        Party("Alice", {"a", "A"}, _position(spec, "Alice", 0.0)),
        Party("Bob", {"B"}, _position(spec, "Bob", None)),
        Party("Charu", {"C"}, _position(spec, "Charu", None)),
    ]
    timeline = _bell_teleport_events(spec, inp, "Charu", ("C",))
    timeline.insert(2, Prepare(_t_prep(spec), st.basis_state(0, "C")))
    return BuiltScenario(
        spec=spec,
        timeline=timeline,
        parties=parties,
        sender="Alice",
        groupings=(("a", "A"), ("B",), ("C",)),
        cut=(("a", "A"), ("B", "C")),
        certificate=(("a", "A"), st.bell_basis()),
        retriever=("Charu",),
        retrieval_labels=("C",),
        target=_relabel(inp, ("C",)),
        input_state=inp,
    )


def _relabel(rho: DensityOp, labels) -> DensityOp:
    return DensityOp(rho.matrix, CompositeDims(tuple(labels), rho.dims.dims), rho.vector)


def _bits(*labels) -> CompositeDims:
    return CompositeDims.qubits(*labels)


def classical_teleport(spec: ScenarioSpec) -> BuiltScenario:
    """Parity of (source, shared bit) is announced; the receiver flips on odd parity."""
    _check_kind(spec, "classical_teleport")
    t0 = _t_prep(spec)
    source = st.classical_mixture(spec.p, "a~")
    timeline = [
        Prepare(t0, source),
        Prepare(t0, st.classical_correlated(2, ("alpha", "beta"))),
        MeasureProjective(spec.t1, "Alice", ("a~", "alpha"), tuple(st.parity_projectors()), "m"),
    ]
    if spec.discard_source:
        timeline.append(Discard(spec.t1, "Alice", ("a~", "alpha")))
    timeline += [
        SendClassical("Alice", "Bob", "m", spec.t_send, spec.arrival),
        ConditionalUnitary(spec.t2, "Bob", ("beta",), "m", {1: st.SIGMA_X}),
    ]
    parties = [
        Party("Alice", {"a~", "alpha"}, _position(spec, "Alice", 0.0)),
        Party("Bob", {"beta"}, _position(spec, "Bob", None)),
    ]
    return BuiltScenario(
        spec=spec,
        timeline=timeline,
        parties=parties,
        sender="Alice",
        groupings=(("a~", "alpha"), ("beta",)),
        cut=(("a~", "alpha"), ("beta",)),
        certificate=(("a~", "alpha"), st.computational_basis(4)),
        retriever=("Bob",),
        retrieval_labels=("beta",),
        target=_relabel(source, ("beta",)),
        input_state=source,
    )


def receiver_labels(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{k}" for k in range(1, n + 1))


def receiver_names(n: int) -> tuple[str, ...]:
    return tuple(f"Bob{k}" for k in range(1, n + 1))


def multiparty_corrections(n: int) -> list[dict[int, np.ndarray]]:
    """Per-receiver outcome -> operator maps; receiver 1 is the designated one.

    Outcomes psi+/psi- need sigma_x on every receiver; phi-/psi- need one sigma_z,
    applied by receiver 1 after its flip.
    """
    x, z = st.SIGMA_X, st.SIGMA_Z
    maps = [{1: z, 2: x, 3: z @ x}]
    maps += [{2: x, 3: x} for _ in range(n - 1)]
    return maps


def encode_repetition(rho: DensityOp, labels) -> DensityOp:
    """Image of a qubit state under ``|0> -> |0..0>, |1> -> |1..1>``."""
    n = len(labels)
    v = np.zeros((2**n, 2), dtype=complex)
    v[0, 0] = v[-1, 1] = 1.0
    vec = None if rho.vector is None else v @ rho.vector
    return DensityOp(v @ rho.matrix @ v.conj().T, _bits(*labels), vec)


def multiparty_target(params: PureQubitParams, n: int, labels) -> DensityOp:
    """``cos(theta/2)|0..0> + exp(i phi) sin(theta/2)|1..1>``."""
    amp = params.amplitudes()
    v = np.zeros(2**n, dtype=complex)
    v[0], v[-1] = amp
    return DensityOp.from_vector(v, _bits(*labels))


def multiparty_teleport(spec: ScenarioSpec) -> BuiltScenario:
    _check_kind(spec, "multiparty_teleport")
    n = _check_receivers(spec)
    rl, names = receiver_labels("B", n), receiver_names(n)
    t0 = _t_prep(spec)
    inp = _qubit_input(spec)
    timeline = [
        Prepare(t0, inp),
        Prepare(t0, st.ghz(n + 1, ("A",) + rl)),
        MeasureProjective(spec.t1, "Alice", ("a", "A"), tuple(st.bell_basis()), "m"),
    ]
    timeline += [SendClassical("Alice", who, "m", spec.t_send, spec.arrival) for who in names]
    timeline += [
        ConditionalUnitary(spec.t2, who, (lab,), "m", ops)
        for who, lab, ops in zip(names, rl, multiparty_corrections(n))
    ]
    parties = [Party("Alice", {"a", "A"}, _position(spec, "Alice", 0.0))]
    parties += [Party(w, {l}, _position(spec, w, None)) for w, l in zip(names, rl)]
    target = encode_repetition(inp, rl)
    groupings = (("a", "A"),) + tuple((l,) for l in rl) + ((rl,) if n > 1 else ())
    return BuiltScenario(
        spec=spec,
        timeline=timeline,
        parties=parties,
        sender="Alice",
        groupings=groupings,
        cut=(("a", "A"), rl),
        certificate=(("a", "A"), st.bell_basis()),
        retriever=names,
        retrieval_labels=rl,
        target=target,
        input_state=inp,
    )


def multiparty_classical(spec: ScenarioSpec) -> BuiltScenario:
    _check_kind(spec, "multiparty_classical")
    n = _check_receivers(spec)
    rl, names = receiver_labels("beta", n), receiver_names(n)
    t0 = _t_prep(spec)
    source = st.classical_mixture(spec.p, "a~")
    timeline = [
        Prepare(t0, source),
        Prepare(t0, st.classical_correlated(n + 1, ("alpha",) + rl)),
        MeasureProjective(spec.t1, "Alice", ("a~", "alpha"), tuple(st.parity_projectors()), "m"),
    ]
    if spec.discard_source:
        timeline.append(Discard(spec.t1, "Alice", ("a~", "alpha")))
    timeline += [SendClassical("Alice", who, "m", spec.t_send, spec.arrival) for who in names]
    timeline += [ConditionalUnitary(spec.t2, w, (l,), "m", {1: st.SIGMA_X}) for w, l in zip(names, rl)]
    parties = [Party("Alice", {"a~", "alpha"}, _position(spec, "Alice", 0.0))]
    parties += [Party(w, {l}, _position(spec, w, None)) for w, l in zip(names, rl)]
    groupings = (("a~", "alpha"),) + tuple((l,) for l in rl) + ((rl,) if n > 1 else ())
    return BuiltScenario(
        spec=spec,
        timeline=timeline,
        parties=parties,
        sender="Alice",
        groupings=tuple(groupings),
        cut=(("a~", "alpha"), rl),
        certificate=(("a~", "alpha"), st.computational_basis(4)),
        retriever=names,
        retrieval_labels=rl,
        target=st.broadcast_state(spec.p, n, rl),
        input_state=source,
    )


def psi_pair_dist(spec: ScenarioSpec) -> BuiltScenario:
    """Chippu hands one qubit of the pair to Alice and one to Bob; nothing else happens."""
    _check_kind(spec, "psi_pair_dist")
    pair = st.psi_pair(spec.params, ("A", "B"))
    parties = [
        Party("Alice", {"A"}, _position(spec, "Alice", 0.0)),
        Party("Bob", {"B"}, _position(spec, "Bob", None)),
    ]
    return BuiltScenario(
        spec=spec,
        timeline=[Prepare(_t_prep(spec), pair)],
        parties=parties,
        sender="Alice",
        groupings=(("A",), ("B",)),
        cut=(("A",), ("B",)),
        certificate=None,
        retriever=(),
        retrieval_labels=(),
        target=pair,
        input_state=st.pure_qubit(spec.params),
        records=(),
        volatility=False,
    )


BUILDERS: dict[str, Callable[[ScenarioSpec], BuiltScenario]] = {
    "std_teleport": std_teleport,
    "classical_teleport": classical_teleport,
    "multiparty_teleport": multiparty_teleport,
    "multiparty_classical": multiparty_classical,
    "misrouted": misrouted,
    "psi_pair_dist": psi_pair_dist,
}


def build(spec: ScenarioSpec) -> BuiltScenario:
    return BUILDERS[spec.kind](spec)
