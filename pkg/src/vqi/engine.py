"""Timed LOCC execution over density matrices.

A timeline is a list of events stamped with exact rational times. Execution
keeps an ensemble of branches, one per sequence of measurement outcomes, and
snapshots it after every distinct event time. Who knows which classical record,
and from when, is fixed by the timeline alone, so it is computed once up front.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .linalg import (
    CompositeDims,
    DensityOp,
    StateError,
    VQIError,
    lift,
    partial_trace,
    tensor,
)
from .measures import check_projective

PRUNE_TOL = 1e-12

Time = Fraction


def as_time(t) -> Fraction:
    """Exact time from an int, a Fraction, a float or a string like ``"3/2"``."""
    if isinstance(t, float) and not math.isfinite(t):
        raise EngineError(f"time {t!r} is not finite")
    return Fraction(t)


class EngineError(VQIError):
    pass


class CausalityError(EngineError):
    pass


class ValidationError(EngineError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Party:
    name: str
    systems: frozenset[str]
    position: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "systems", frozenset(self.systems))


@dataclass(frozen=True)
class Relativity:
    speed: float = 1.0
    enabled: bool = True


# -- events -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Prepare:
    time: Fraction
    state: DensityOp

    @property
    def labels(self):
        return self.state.labels


@dataclass(frozen=True, eq=False)
class ApplyUnitary:
    time: Fraction
    party: str
    labels: tuple[str, ...]
    operator: np.ndarray


@dataclass(frozen=True, eq=False)
class MeasureProjective:
    time: Fraction
    party: str
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]
    record: str


@dataclass(frozen=True)
class SendClassical:
    sender: str
    receiver: str
    record: str
    send_time: Fraction
    arrive_time: Fraction

    @property
    def time(self):
        return self.send_time


@dataclass(frozen=True, eq=False)
class ConditionalUnitary:
    """Apply ``operators[outcome]`` when ``record`` holds ``outcome``; identity otherwise."""

    time: Fraction
    party: str
    labels: tuple[str, ...]
    record: str
    operators: Mapping[int, np.ndarray]


@dataclass(frozen=True)
class Discard:
    """Replace the systems with the maximally mixed state."""

    time: Fraction
    party: str
    labels: tuple[str, ...]


Event = Union[Prepare, ApplyUnitary, MeasureProjective, SendClassical, ConditionalUnitary, Discard]
PARTY_EVENTS = (ApplyUnitary, MeasureProjective, ConditionalUnitary, Discard)


@dataclass(frozen=True)
class Violation:
    kind: str  # locality | relativity | measurement | causality | timing | party | state
    index: int
    message: str

    def __str__(self):
        return f"[{self.kind}] event {self.index}: {self.message}"


# -- trajectory -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Branch:
    probability: float
    state: DensityOp
    records: Mapping[str, int]


@dataclass(frozen=True, eq=False)
class Checkpoint:
    time: Fraction
    branches: tuple[Branch, ...]

    def mixture(self) -> DensityOp:
        m = sum(b.probability * b.state.matrix for b in self.branches)
        return DensityOp(m, self.branches[0].state.dims)


@dataclass(frozen=True, eq=False)
class ObserverView:
    """A party's description at one instant.

    ``conditional`` maps the values of the records the party holds (in ``known``
    order) to the probability of that record value and the state conditioned on it.
    """

    party: Optional[str]
    time: Fraction
    known: tuple[str, ...]
    conditional: Mapping[tuple[int, ...], tuple[float, DensityOp]]

    def mixture(self) -> DensityOp:
        items = list(self.conditional.values())
        m = sum(p * s.matrix for p, s in items)
        return DensityOp(m, items[0][1].dims)


@dataclass(frozen=True, eq=False)
class Trajectory:
    checkpoints: tuple[Checkpoint, ...]
    parties: Mapping[str, Party]
    holders: Mapping[str, Mapping[str, Fraction]]
    record_dims: Mapping[str, int]
    measured_at: Mapping[str, Fraction]

    @property
    def start(self) -> Fraction:
        return self.checkpoints[0].time

    @property
    def end(self) -> Fraction:
        return self.checkpoints[-1].time

    def at(self, time) -> Checkpoint:
        t = as_time(time)
        if t < self.start:
            raise EngineError(f"time {t} precedes the trajectory start {self.start}")
        chosen = self.checkpoints[0]
        for cp in self.checkpoints:
            if cp.time <= t:
                chosen = cp
            else:
                break
        return chosen

    def final(self) -> Checkpoint:
        return self.checkpoints[-1]

    def records_held(self, party: Optional[str], time) -> tuple[str, ...]:
        t = as_time(time)
        if party is None:
            return ()
        if party not in self.parties:
            raise EngineError(f"unknown party {party!r}")
        return tuple(
            sorted(
                r
                for r, who in self.holders.items()
                if party in who and who[party] <= t and self.measured_at[r] <= t
            )
        )


# -- validation -------------------------------------------------------------




def _holdings(timeline: Sequence[Event]):
    """Record -> {party: earliest time the party holds it}, plus violations."""
    holders: dict[str, dict[str, Fraction]] = defaultdict(dict)
    measured_at: dict[str, Fraction] = {}
    violations = []
    order = sorted(range(len(timeline)), key=lambda i: (timeline[i].time, i))
    for i in order:
        ev = timeline[i]
        if isinstance(ev, MeasureProjective):
            if ev.record in measured_at:
                violations.append(Violation("measurement", i, f"record {ev.record!r} written twice"))
                continue
            measured_at[ev.record] = ev.time
            holders[ev.record][ev.party] = ev.time
    # sends may chain, so relax until stable
    sends = [(i, ev) for i, ev in enumerate(timeline) if isinstance(ev, SendClassical)]
    changed = True
    while changed:
        changed = False
        for i, ev in sends:
            have = holders.get(ev.record, {}).get(ev.sender)
            if have is None or have > ev.send_time:
                continue
            cur = holders[ev.record].get(ev.receiver)
            if cur is None or ev.arrive_time < cur:
                holders[ev.record][ev.receiver] = ev.arrive_time
                changed = True
    for i, ev in sends:
        have = holders.get(ev.record, {}).get(ev.sender)
        if have is None or have > ev.send_time:
            violations.append(
                Violation("causality", i, f"{ev.sender} sends record {ev.record!r} before holding it")
            )
    return holders, measured_at, violations


def validate(
    timeline: Sequence[Event],
    parties: Iterable[Party],
    relativity: Optional[Relativity] = None,
) -> list[Violation]:
    """Every locality, timing, measurement, causality and (optionally) relativity violation."""
    parties = list(parties)
    by_name = {p.name: p for p in parties}
    violations: list[Violation] = []
    seen: dict[str, str] = {}
    for p in parties:
        for s in p.systems:
            if s in seen:
                violations.append(Violation("party", -1, f"system {s!r} owned by {seen[s]} and {p.name}"))
            seen[s] = p.name

    for i, ev in enumerate(timeline):
        if isinstance(ev, PARTY_EVENTS):
            party = by_name.get(ev.party)
            if party is None:
                violations.append(Violation("party", i, f"unknown party {ev.party!r}"))
                continue
            foreign = [l for l in ev.labels if l not in party.systems]
            if foreign:
                violations.append(
                    Violation("locality", i, f"{ev.party} acts on foreign systems {foreign}")
                )
        if isinstance(ev, MeasureProjective):
            try:
                dim = int(round(math.sqrt(ev.projectors[0].size))) if ev.projectors else 0
                check_projective(list(ev.projectors), dim)
            except VQIError as exc:
                violations.append(Violation("measurement", i, str(exc)))
        if isinstance(ev, SendClassical):
            for who in (ev.sender, ev.receiver):
                if who not in by_name:
                    violations.append(Violation("party", i, f"unknown party {who!r}"))
            if not ev.arrive_time > ev.send_time:
                violations.append(
                    Violation("timing", i, f"arrive time {ev.arrive_time} not after send time {ev.send_time}")
                )
            if relativity is not None and relativity.enabled:
                a, b = by_name.get(ev.sender), by_name.get(ev.receiver)
                if a and b and a.position is not None and b.position is not None:
                    needed = abs(a.position - b.position) / relativity.speed
                    if float(ev.arrive_time - ev.send_time) < needed:
                        violations.append(
                            Violation(
                                "relativity",
                                i,
                                f"message {ev.sender}->{ev.receiver} takes {ev.arrive_time - ev.send_time}"
                                f" < distance/speed = {needed:g}",
                            )
                        )
    holders, measured_at, hv = _holdings(timeline)
    violations.extend(hv)
    for i, ev in enumerate(timeline):
        if isinstance(ev, ConditionalUnitary):
            since = holders.get(ev.record, {}).get(ev.party)
            if since is None:
                violations.append(
                    Violation("causality", i, f"{ev.party} never receives record {ev.record!r}")
                )
            elif since > ev.time:
                violations.append(
                    Violation(
                        "causality",
                        i,
                        f"{ev.party} corrects at t={ev.time} but record {ev.record!r} arrives at t={since}",
                    )
                )
    return violations


# -- execution --------------------------------------------------------------


@dataclass
class _Live:
    weight: float  # probability (ensemble) or shot count (sampled)
    state: Optional[DensityOp]
    records: dict = field(default_factory=dict)


def _require(state: Optional[DensityOp], labels, i) -> DensityOp:
    if state is None or any(l not in state.labels for l in labels):
        have = () if state is None else state.labels
        raise StateError(f"event {i} references unprepared systems {tuple(labels)}; prepared {have}")
    return state


def _unitary(state: DensityOp, labels, op) -> DensityOp:
    u = lift(op, state.dims, labels)
    return DensityOp(u @ state.matrix @ u.conj().T, state.dims)


def _discard(state: DensityOp, labels) -> DensityOp:
    rest = [l for l in state.labels if l not in labels]
    d = state.dims.dim_of(labels)
    mixed = DensityOp(np.eye(d, dtype=complex) / d, CompositeDims(tuple(labels), tuple(
        state.dims.dims[state.dims.index(l)] for l in labels)))
    if rest:
        return tensor(partial_trace(state, rest), mixed).reorder(state.labels)
    return mixed.reorder(state.labels)


def execute(
    timeline: Sequence[Event],
    parties: Iterable[Party],
    mode: str = "ensemble",
    seed: int = 0,
    shots: int = 4096,
) -> Trajectory:
    """Run the timeline.

    ``mode="ensemble"`` branches on every outcome with Born weights.
    ``mode="sampled"`` splits ``shots`` runs across outcomes with a seeded
    multinomial draw; branch probabilities are then empirical frequencies.
    """
    if mode not in ("ensemble", "sampled"):
        raise EngineError(f"unknown mode {mode!r}")
    parties = list(parties)
    violations = validate(timeline, parties)
    causal = [v for v in violations if v.kind == "causality"]
    if causal:
        raise CausalityError("; ".join(str(v) for v in causal))
    if violations:
        raise ValidationError(violations)
    if not timeline:
        raise EngineError("empty timeline")

    holders, measured_at, _ = _holdings(timeline)
    record_dims = {ev.record: len(ev.projectors) for ev in timeline if isinstance(ev, MeasureProjective)}
    rng = np.random.default_rng(seed)
    sampled = mode == "sampled"
    live = [_Live(float(shots) if sampled else 1.0, None)]
    checkpoints = []

    order = sorted(range(len(timeline)), key=lambda i: (timeline[i].time, i))
    for pos, i in enumerate(order):
        ev = timeline[i]
        if isinstance(ev, Prepare):
            for b in live:
                if b.state is not None and set(ev.labels) & set(b.state.labels):
                    raise StateError(f"event {i} re-prepares systems {ev.labels}")
                b.state = ev.state if b.state is None else tensor(b.state, ev.state)
        elif isinstance(ev, ApplyUnitary):
            for b in live:
                b.state = _unitary(_require(b.state, ev.labels, i), ev.labels, ev.operator)
        elif isinstance(ev, ConditionalUnitary):
            for b in live:
                op = ev.operators.get(int(b.records[ev.record]))
                if op is not None:
                    b.state = _unitary(_require(b.state, ev.labels, i), ev.labels, op)
        elif isinstance(ev, Discard):
            for b in live:
                b.state = _discard(_require(b.state, ev.labels, i), ev.labels)
        elif isinstance(ev, MeasureProjective):
            nxt = []
            for b in live:
                st = _require(b.state, ev.labels, i)
                posts, probs = [], []
                for p in ev.projectors:
                    P = lift(p, st.dims, ev.labels)
                    m = P @ st.matrix @ P
                    probs.append(max(float(np.trace(m).real), 0.0))
                    posts.append(m)
                probs = np.array(probs)
                probs /= probs.sum()
                if sampled:
                    counts = rng.multinomial(int(b.weight), probs)
                    weights = counts.astype(float)
                else:
                    weights = b.weight * probs
                for k, (w, m) in enumerate(zip(weights, posts)):
                    if (sampled and w == 0) or (not sampled and probs[k] < PRUNE_TOL):
                        continue
                    m = m / np.trace(m).real
                    nxt.append(_Live(w, DensityOp(m, st.dims), {**b.records, ev.record: k}))
            live = nxt
        # SendClassical changes knowledge only; handled by `holders`

        last_at_time = pos + 1 == len(order) or timeline[order[pos + 1]].time != ev.time
        if last_at_time and all(b.state is not None for b in live):
            total = sum(b.weight for b in live)
            if not sampled:
                # renormalise after pruning
                for b in live:
                    b.weight /= total
                total = 1.0
            branches = tuple(
                Branch(b.weight / total, b.state, dict(b.records)) for b in live
            )
            checkpoints.append(Checkpoint(ev.time, branches))

    if not checkpoints:
        raise StateError("timeline never prepares a state")
    return Trajectory(
        checkpoints=tuple(checkpoints),
        parties={p.name: p for p in parties},
        holders={r: dict(v) for r, v in holders.items()},
        record_dims=record_dims,
        measured_at=dict(measured_at),
    )


def observer_view(traj: Trajectory, party: Optional[str], time) -> ObserverView:
    """What ``party`` can assign at ``time``: one state per value of the records it holds.

    Records it does not hold are averaged over. ``party=None`` is an observer
    holding no records, which yields the full probability-weighted mixture.
    """
    t = as_time(time)
    cp = traj.at(t)
    known = traj.records_held(party, t)
    groups: dict[tuple[int, ...], list[Branch]] = defaultdict(list)
    for b in cp.branches:
        groups[tuple(int(b.records[r]) for r in known)].append(b)
    cond = {}
    for key in sorted(groups):
        bs = groups[key]
        p = sum(b.probability for b in bs)
        m = sum(b.probability * b.state.matrix for b in bs) / p
        cond[key] = (p, DensityOp(m, bs[0].state.dims))
    return ObserverView(party, t, known, cond)


def averaged_state(traj: Trajectory, time) -> DensityOp:
    return traj.at(time).mixture()


def outcome_distribution(traj: Trajectory, record: str, time=None) -> np.ndarray:
    """Marginal distribution of one record at ``time`` (default: end of run)."""
    cp = traj.final() if time is None else traj.at(time)
    dist = np.zeros(traj.record_dims[record])
    for b in cp.branches:
        dist[b.records[record]] += b.probability
    return dist
