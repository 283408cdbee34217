"""Numerical audit of the three volatility conditions over a family of inputs.

(i)   every grouping's reduced state inside the window is input-independent;
(ii)  correlations across the sender/receiver cut are bounded by the smaller
      side's dimension, too few bits for a continuum of inputs;
(iii) the input is recovered by the designated retriever after the window.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .engine import Trajectory, as_time, averaged_state, execute, observer_view, outcome_distribution
from .linalg import CompositeDims, DensityOp, VQIError, partial_trace, trace_distance
from .measures import CorrelationProfile, correlation_profile, fidelity, von_neumann_entropy
from .scenarios import BuiltScenario, ScenarioSpec, build

COND_I_TOL = 1e-9
COND_II_TOL = 1e-9
COND_III_TOL = 1e-9

QUBIT_KINDS = ("std_teleport", "multiparty_teleport", "misrouted", "psi_pair_dist")
CLASSICAL_KINDS = ("classical_teleport", "multiparty_classical")


class AuditError(VQIError):
    pass


@dataclass(frozen=True)
class InputFamily:
    """Inputs to sweep: a Bloch-angle grid and/or Haar-random qubits, and/or a grid of ``p``.

    Qubit and ``p`` samples combine as a Cartesian product when both are given.
    """

    grid: Optional[tuple[int, int]] = None
    random: Optional[tuple[int, int]] = None  # (count, seed)
    p_grid: Optional[int] = None

    def qubit_samples(self) -> list[tuple[float, float]]:
        out = []
        if self.grid is not None:
            nt, nf = self.grid
            thetas = np.linspace(0.0, math.pi, nt) if nt > 1 else np.array([0.0])
            phis = np.linspace(0.0, 2 * math.pi, nf, endpoint=False)
            out += [(float(t), float(f)) for t in thetas for f in phis]
        if self.random is not None:
            count, seed = self.random
            rng = np.random.default_rng(seed)
            u, v = rng.random(count), rng.random(count)
            thetas = np.arccos(np.clip(1 - 2 * u, -1.0, 1.0))
            out += [(float(t), float(2 * math.pi * f)) for t, f in zip(thetas, v)]
        return out

    def p_samples(self) -> list[float]:
        if self.p_grid is None:
            return []
        return [float(p) for p in np.linspace(0.0, 1.0, self.p_grid)]

    def samples(self) -> list[dict]:
        qs = [{"theta": t, "phi": f} for t, f in self.qubit_samples()]
        ps = [{"p": p} for p in self.p_samples()]
        if qs and ps:
            out = [{**q, **p} for q in qs for p in ps]
        else:
            out = qs or ps
        if len(out) < 2:
            raise AuditError("an input family needs at least two samples")
        return out

    @property
    def real_parameters(self) -> int:
        return (2 if (self.grid or self.random) else 0) + (1 if self.p_grid else 0)

    def describe(self) -> str:
        k = self.real_parameters
        return f"continuum: {k} real parameter{'s' if k != 1 else ''}"

    def as_dict(self) -> dict:
        d = {}
        if self.grid is not None:
            d["grid"] = {"theta_steps": self.grid[0], "phi_steps": self.grid[1]}
        if self.random is not None:
            d["random"] = {"count": self.random[0], "seed": self.random[1]}
        if self.p_grid is not None:
            d["p_grid"] = {"steps": self.p_grid}
        return d


def default_family(spec: ScenarioSpec) -> InputFamily:
    if spec.kind in CLASSICAL_KINDS:
        return InputFamily(p_grid=11)
    if spec.mixed_input_p is not None:
        return InputFamily(grid=(5, 8), random=(32, 42), p_grid=5)
    return InputFamily(grid=(5, 8), random=(32, 42))


def apply_sample(spec: ScenarioSpec, sample: dict) -> ScenarioSpec:
    kw = {k: sample[k] for k in ("theta", "phi") if k in sample}
    if "p" in sample:
        if spec.kind in CLASSICAL_KINDS:
            kw["p"] = sample["p"]
        else:
            kw["mixed_input_p"] = sample["p"]
    return spec.replace(**kw)


@dataclass(frozen=True, eq=False)
class Run:
    sample: dict
    scenario: BuiltScenario
    trajectory: Trajectory


def _threads() -> int:
    try:
        return max(0, int(os.environ.get("VQI_THREADS", "0")))
    except ValueError:
        return 0


def run_family(spec: ScenarioSpec, family: InputFamily) -> list[Run]:
    """Build and execute one scenario per family sample, in sample order."""
    samples = family.samples()

    def one(sample):
        sc = build(apply_sample(spec, sample))
        return Run(sample, sc, execute(sc.timeline, sc.parties))

    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, samples))
    return [one(s) for s in samples]


def _probe_times(spec: ScenarioSpec, probe_times) -> list[Fraction]:
    if probe_times is None:
        return [(spec.t1 + spec.t2) / 2]
    out = [as_time(t) for t in probe_times]
    for t in out:
        if not spec.t1 < t < spec.t2:
            raise AuditError(f"probe time {t} outside the window ({spec.t1}, {spec.t2})")
    return out


def _reduce(state: DensityOp, labels: Sequence[str]) -> DensityOp:
    return partial_trace(state, labels).reorder(tuple(labels))


def max_pairwise_distance(states: Sequence[DensityOp]) -> float:
    """Largest trace distance over all pairs (batched eigensolves)."""
    if len(states) < 2:
        return 0.0
    for s in states[1:]:
        if s.dims.dims != states[0].dims.dims:
            raise AuditError("states over different subsystems")
    stack = np.stack([s.matrix for s in states])
    best = 0.0
    for i in range(len(states) - 1):
        diff = stack[i] - stack[i + 1 :]
        w = np.linalg.eigvalsh(diff)
        best = max(best, float(0.5 * np.abs(w).sum(axis=1).max()))
    return min(best, 1.0)


# -- condition (i) ------------------------------------------------------------


@dataclass
class GroupingResult:
    labels: tuple[str, ...]
    probe_time: Fraction
    max_distance: float
    passed: bool


@dataclass
class ConditionI:
    groupings: list[GroupingResult]
    tolerance: float = COND_I_TOL

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groupings)

    @property
    def max_distance(self) -> float:
        return max((g.max_distance for g in self.groupings), default=0.0)


def check_condition_i(
    spec: ScenarioSpec,
    family: InputFamily,
    groupings: Optional[Sequence[Sequence[str]]] = None,
    probe_times=None,
    runs: Optional[list[Run]] = None,
) -> ConditionI:
    """Max pairwise trace distance of each grouping's window state across the family.

    The state is the no-record (averaged) observer view.
    """
    runs = runs if runs is not None else run_family(spec, family)
    if not runs:
        raise AuditError("empty family")
    groupings = [tuple(g) for g in (groupings or runs[0].scenario.groupings)]
    results = []
    for t in _probe_times(spec, probe_times):
        window = [averaged_state(r.trajectory, t) for r in runs]
        for g in groupings:
            d = max_pairwise_distance([_reduce(w, g) for w in window])
            results.append(GroupingResult(g, t, d, d <= COND_I_TOL))
    return ConditionI(results)


# -- condition (ii) -----------------------------------------------------------


@dataclass
class ConditionII:
    cut: tuple[tuple[str, ...], tuple[str, ...]]
    profile: CorrelationProfile  # max over samples (ppt: all samples)
    bound_bits: float
    family_content: str
    record_max_deviation: dict[str, float] = field(default_factory=dict)
    joint_state_max_distance: float = 0.0
    passed: Optional[bool] = None
    tolerance: float = COND_II_TOL


def _max_profile(profiles: Sequence[CorrelationProfile]) -> CorrelationProfile:
    sides = sorted({k for p in profiles for k in p.discord_measured_side_bits})
    return CorrelationProfile(
        mutual_information_bits=max(p.mutual_information_bits for p in profiles),
        nearest_product_relent_bits=max(p.nearest_product_relent_bits for p in profiles),
        negativity=max(p.negativity for p in profiles),
        ppt=all(p.ppt for p in profiles),
        discord_measured_side_bits={
            s: max(p.discord_measured_side_bits.get(s, 0.0) for p in profiles) for s in sides
        },
        classical_correlation_bits=max(p.classical_correlation_bits for p in profiles),
    )


def check_condition_ii(
    spec: ScenarioSpec,
    family: InputFamily,
    cut=None,
    probe_times=None,
    grid_resolution: int = 0,
    runs: Optional[list[Run]] = None,
) -> ConditionII:
    """Correlation profile of the window state across ``cut`` and the dimension-bound verdict.

    The verdict passes when the mutual information stays within ``log2`` of the
    smaller side's dimension and the family is a continuum (so it needs more
    bits than that bound). Exploratory scenarios get ``passed=None``.
    """
    runs = runs if runs is not None else run_family(spec, family)
    if not runs:
        raise AuditError("empty family")
    sc0 = runs[0].scenario
    cut = tuple(tuple(c) for c in (cut or sc0.cut))
    certs = {}
    if sc0.certificate is not None:
        certs[tuple(sc0.certificate[0])] = sc0.certificate[1]
    profiles, windows = [], []
    deviations: dict[str, float] = {}
    for t in _probe_times(spec, probe_times):
        for r in runs:
            w = averaged_state(r.trajectory, t)
            windows.append(w)
            sub = _reduce(w, cut[0] + cut[1])
            profiles.append(
                correlation_profile(sub, cut, certificates=certs, grid_resolution=grid_resolution)
            )
            for rec in r.scenario.records:
                dist = outcome_distribution(r.trajectory, rec, t)
                dev = float(np.max(np.abs(dist - 1.0 / len(dist))))
                deviations[rec] = max(deviations.get(rec, 0.0), dev)
    prof = _max_profile(profiles)
    dims = windows[0].dims
    bound = math.log2(min(dims.dim_of(cut[0]), dims.dim_of(cut[1])))
    passed = None
    if sc0.volatility:
        passed = prof.mutual_information_bits <= bound + COND_II_TOL and family.real_parameters > 0
    return ConditionII(
        cut=cut,
        profile=prof,
        bound_bits=bound,
        family_content=family.describe(),
        record_max_deviation=deviations,
        joint_state_max_distance=max_pairwise_distance(windows),
        passed=passed,
    )


# -- condition (iii) ----------------------------------------------------------


@dataclass
class ConditionIII:
    retriever: tuple[str, ...]
    labels: tuple[str, ...]
    min_fidelity: Optional[float]
    mean_fidelity: Optional[float]
    max_trace_distance: float
    passed: Optional[bool]
    tolerance: float = COND_III_TOL


def _retrieval_target(sc: BuiltScenario, retriever: Sequence[str]):
    if not retriever:
        raise AuditError("no retriever designated")
    if tuple(retriever) == sc.retriever:
        return sc.retrieval_labels, sc.target
    parties = {p.name: p for p in sc.parties}
    state_order = [l for ev in sc.timeline if hasattr(ev, "state") for l in ev.state.labels]
    labels = []
    for name in retriever:
        if name not in parties:
            raise AuditError(f"unknown retriever {name!r}")
        if not parties[name].systems:
            raise AuditError(f"retriever {name!r} holds no system")
        labels += [l for l in state_order if l in parties[name].systems]
    labels = tuple(labels)
    if len(labels) != len(sc.retrieval_labels):
        raise AuditError(f"retriever systems {labels} do not match the target's {sc.retrieval_labels}")
    t = sc.target
    return labels, DensityOp(t.matrix, CompositeDims(labels, t.dims.dims), t.vector)


def check_condition_iii(
    spec: ScenarioSpec,
    family: InputFamily,
    retriever: Optional[Sequence[str]] = None,
    runs: Optional[list[Run]] = None,
) -> ConditionIII:
    """Compare the retriever's systems with the input after the run, branch by branch."""
    runs = runs if runs is not None else run_family(spec, family)
    if not runs:
        raise AuditError("empty family")
    sc0 = runs[0].scenario
    if not sc0.volatility:
        return ConditionIII((), (), None, None, 0.0, None)
    retriever = tuple(retriever) if retriever is not None else sc0.retriever
    fids, weights, tds = [], [], []
    pure = sc0.target.vector is not None
    labels = ()
    for r in runs:
        labels, target = _retrieval_target(r.scenario, retriever)
        final = r.trajectory.final()
        if final.time < spec.t2:
            raise AuditError("trajectory ends before the window closes")
        for b in final.branches:
            got = _reduce(b.state, labels)
            tds.append(trace_distance(target, got))
            if pure:
                fids.append(fidelity(target, got))
                weights.append(b.probability / len(runs))
    if pure:
        fmin = float(min(fids))
        fmean = float(np.dot(fids, weights) / np.sum(weights))
        passed = fmin >= 1 - COND_III_TOL
    else:
        fmin = fmean = None
        passed = max(tds) <= COND_III_TOL
    return ConditionIII(retriever, labels, fmin, fmean, float(max(tds)), passed)


# -- full audit ---------------------------------------------------------------


@dataclass
class AuditReport:
    spec: ScenarioSpec
    family: InputFamily
    samples: int
    window: tuple[Fraction, Fraction]
    condition_i: ConditionI
    condition_ii: ConditionII
    condition_iii: ConditionIII
    notes: list[str]
    window_states: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def exploratory(self) -> bool:
        return self.condition_ii.passed is None

    @property
    def volatile(self) -> Optional[bool]:
        if self.exploratory:
            return None
        return bool(self.condition_i.passed and self.condition_ii.passed and self.condition_iii.passed)

    @property
    def verdict(self) -> str:
        if self.exploratory:
            return "EXPLORATORY"
        return "VOLATILE" if self.volatile else "NOT VOLATILE"


def _sender_view_purity(runs: list[Run], t) -> float:
    """Largest entropy of the sender's record-conditioned view of the whole system."""
    worst = 0.0
    for r in runs:
        view = observer_view(r.trajectory, r.scenario.sender, t)
        for _, state in view.conditional.values():
            worst = max(worst, von_neumann_entropy(state))
    return worst


def full_audit(
    spec: ScenarioSpec,
    family: Optional[InputFamily] = None,
    probe_times=None,
    grid_resolution: int = 0,
) -> AuditReport:
    family = family or default_family(spec)
    runs = run_family(spec, family)
    sc0 = runs[0].scenario
    c1 = check_condition_i(spec, family, probe_times=probe_times, runs=runs)
    c2 = check_condition_ii(spec, family, probe_times=probe_times, grid_resolution=grid_resolution, runs=runs)
    c3 = check_condition_iii(spec, family, runs=runs)
    probe = _probe_times(spec, probe_times)[0]

    notes = [
        "condition (ii) rule: mutual information across the cut must not exceed log2 of the "
        f"smaller side's dimension ({c2.bound_bits:g} bits), while the input family is a "
        f"{family.describe()}",
        "condition (i) uses the averaged view of an observer holding no classical record",
    ]
    if c2.joint_state_max_distance > COND_I_TOL:
        notes.append(
            "the joint window state still depends on the input through record-conditioned "
            f"correlations (max pairwise trace distance {c2.joint_state_max_distance:.6g})"
        )
    else:
        notes.append("the joint window state is itself input-independent")
    if sc0.records:
        notes.append(
            f"sender's record-conditioned view of the whole system has entropy at most "
            f"{_sender_view_purity(runs, probe):.3g} bits"
        )
    if spec.kind in CLASSICAL_KINDS and not spec.discard_source:
        notes.append(
            "the source system keeps the input distribution (broadcast, not transport); "
            "set discard_source to randomise it"
        )
    if spec.kind == "misrouted":
        notes.append("the message reaches Charu, who shares no entanglement with Alice")
    if not sc0.volatility:
        notes.append("exploratory: no verdict")
    first = averaged_state(runs[0].trajectory, probe)
    shown = {",".join(g): _reduce(first, g).matrix for g in sc0.groupings}
    return AuditReport(
        spec=spec,
        family=family,
        samples=len(runs),
        window=(spec.t1, spec.t2),
        condition_i=c1,
        condition_ii=c2,
        condition_iii=c3,
        notes=notes,
        window_states=shown,
    )
