import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from conftest import GRID, params
from vqi import states as st
from vqi.engine import execute, observer_view, validate
from vqi.linalg import RangeError, partial_trace, trace_distance
from vqi.measures import embed_records, fidelity, negativity
from vqi.scenarios import (
    KINDS,
    RelativitySettings,
    ScenarioSpec,
    SpecError,
    build,
    multiparty_corrections,
    multiparty_target,
    receiver_labels,
)


def run(spec):
    sc = build(spec)
    return sc, execute(sc.timeline, sc.parties)


def final_on(traj, labels):
    return partial_trace(traj.final().mixture(), labels)


# -- independent oracles ------------------------------------------------------


def classical_oracle(p, n):
    """Enumerate (source bit, shared bit): parity is sent, receivers flip on odd."""
    out = np.zeros(2**n)
    for a, s in itertools.product((0, 1), repeat=2):
        w = (p if a == 0 else 1 - p) * 0.5
        m = a ^ s
        bits = [s ^ m] * n
        out[int("".join(map(str, bits)), 2)] += w
    return np.diag(out)


def ghz_teleport_oracle(psi, n):
    """Statevector run with explicit index arithmetic; returns receivers' states per outcome."""
    g = np.zeros(2 ** (n + 1), dtype=complex)
    g[0] = g[-1] = 1 / math.sqrt(2)
    full = np.kron(psi, g).reshape(4, 2**n)  # (a A) x receivers
    x, z = st.SIGMA_X, st.SIGMA_Z
    outs = []
    for k in range(4):
        cond = st.bell_vector(k).conj() @ full  # <Bell_k|_{aA}
        cond = cond / np.linalg.norm(cond)
        ops = []
        for r in range(n):
            u = np.eye(2)
            if k in (2, 3):
                u = x @ u
            if r == 0 and k in (1, 3):
                u = z @ u
            ops.append(u)
        big = ops[0]
        for u in ops[1:]:
            big = np.kron(big, u)
        outs.append(big @ cond)
    return outs


# -- classical teleportation --------------------------------------------------


@pytest.mark.parametrize("p", np.linspace(0, 1, 11))
def test_classical_teleport_matches_enumeration(p):
    sc, traj = run(ScenarioSpec("classical_teleport", p=float(p)))
    assert np.allclose(final_on(traj, ["beta"]).matrix, classical_oracle(p, 1), atol=1e-12)
    mid = observer_view(traj, None, Fraction(3, 2)).mixture()
    assert np.allclose(partial_trace(mid, ["beta"]).matrix, np.eye(2) / 2, atol=1e-12)


def test_classical_discard_does_not_change_delivery():
    _, traj = run(ScenarioSpec("classical_teleport", p=0.3, discard_source=True))
    assert np.allclose(final_on(traj, ["beta"]).matrix, np.diag([0.3, 0.7]), atol=1e-12)
    mid = observer_view(traj, None, Fraction(3, 2)).mixture()
    assert np.allclose(partial_trace(mid, ["a~", "alpha"]).matrix, np.eye(4) / 4, atol=1e-12)


# -- multiparty ---------------------------------------------------------------


def test_corrections_table():
    c = multiparty_corrections(3)
    assert len(c) == 3
    assert set(c[0]) == {1, 2, 3} and set(c[1]) == set(c[2]) == {2, 3}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_multiparty_quantum_against_statevector_oracle(n):
    p = st.PureQubitParams(1.1, 0.7)
    target = p.amplitudes()[0] * np.eye(2**n)[0] + p.amplitudes()[1] * np.eye(2**n)[-1]
    for v in ghz_teleport_oracle(p.amplitudes(), n):
        assert abs(np.vdot(target, v)) ** 2 == pytest.approx(1.0, abs=1e-12)
    sc, traj = run(ScenarioSpec("multiparty_teleport", theta=1.1, phi=0.7, n=n))
    rl = receiver_labels("B", n)
    for b in traj.final().branches:
        f = fidelity(multiparty_target(p, n, rl), partial_trace(b.state, rl))
        assert f >= 1 - 1e-10


def test_multiparty_n1_is_standard_teleportation():
    p = st.PureQubitParams(2.0, 4.0)
    _, traj = run(ScenarioSpec("multiparty_teleport", theta=2.0, phi=4.0, n=1))
    assert fidelity(st.pure_qubit(p, "B1"), final_on(traj, ["B1"])) >= 1 - 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_multiparty_marginals_are_dephased_input(n):
    theta = 1.3
    _, traj = run(ScenarioSpec("multiparty_teleport", theta=theta, phi=0.4, n=n))
    c2, s2 = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
    for lab in receiver_labels("B", n):
        assert np.allclose(final_on(traj, [lab]).matrix, np.diag([c2, s2]), atol=1e-12)


def test_multiparty_mixed_input_encodes_repetition():
    spec = ScenarioSpec("multiparty_teleport", theta=0.9, phi=1.0, n=3, mixed_input_p=0.6)
    sc, traj = run(spec)
    assert trace_distance(final_on(traj, sc.retrieval_labels), sc.target) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 1.0])
def test_multiparty_classical_matches_enumeration(n, p):
    sc, traj = run(ScenarioSpec("multiparty_classical", p=p, n=n))
    out = final_on(traj, receiver_labels("beta", n))
    assert np.allclose(out.matrix, classical_oracle(p, n), atol=1e-12)
    assert trace_distance(out, st.broadcast_state(p, n, receiver_labels("beta", n))) <= 1e-12


def test_broadcast_is_not_product_at_half():
    b = st.broadcast_state(0.5, 3).matrix
    prod = np.kron(np.kron(np.eye(2) / 2, np.eye(2) / 2), np.eye(2) / 2)
    assert 0.5 * np.abs(np.linalg.eigvalsh(b - prod)).sum() > 0.5


def test_receiver_count_range():
    for n in (0, 5):
        with pytest.raises(RangeError):
            build(ScenarioSpec("multiparty_teleport", n=n))


# -- misrouting ---------------------------------------------------------------


def charu_joint(p):
    sc, traj = run(ScenarioSpec("misrouted", theta=p.theta, phi=p.phi))
    branches = [(b.probability, partial_trace(b.state, ["C"]), b.records) for b in traj.final().branches]
    return embed_records(branches, ["m"], ["C"], {"m": 4}), traj


def test_misrouted_joint_state_is_input_independent():
    ref, _ = charu_joint(GRID[0])
    for p in GRID[1:]:
        assert trace_distance(charu_joint(p)[0], ref) <= 1e-12


def test_misrouted_average_fidelity_half():
    fids = []
    for p in GRID:
        _, traj = charu_joint(p)
        fids.append(fidelity(st.pure_qubit(p, "C"), final_on(traj, ["C"])))
    assert np.mean(fids) == pytest.approx(0.5, abs=0.01)
    # Bob keeps the unused Bell half
    _, traj = charu_joint(GRID[3])
    assert np.allclose(final_on(traj, ["B"]).matrix, np.eye(2) / 2, atol=1e-12)


# -- entangled pair -----------------------------------------------------------


@given(params)
@settings(max_examples=25, deadline=None)
def test_psi_pair_scenario(p):
    sc, traj = run(ScenarioSpec("psi_pair_dist", theta=p.theta, phi=p.phi))
    rho = traj.final().mixture()
    for lab in ("A", "B"):
        assert np.allclose(partial_trace(rho, [lab]).matrix, np.eye(2) / 2, atol=1e-12)
    assert negativity(rho, ("A", "B")) == pytest.approx(0.5, abs=1e-10)
    assert not sc.volatility and sc.records == ()


# -- construction -------------------------------------------------------------


def test_six_kinds():
    assert len(KINDS) == 6


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_builds_and_validates(kind):
    sc = build(ScenarioSpec(kind, theta=0.7, phi=0.2, n=2))
    assert validate(sc.timeline, sc.parties) == []
    timeline, parties = sc
    assert timeline is sc.timeline and parties is sc.parties


def test_spec_errors():
    with pytest.raises(SpecError):
        ScenarioSpec("teleport_everything")
    with pytest.raises(SpecError):
        ScenarioSpec("std_teleport", t1=2, t_send=1, t2=3)
    with pytest.raises(SpecError):
        ScenarioSpec("std_teleport", t1=1, t_send=2, t2=2)
    with pytest.raises(RangeError):
        ScenarioSpec("classical_teleport", p=1.5)
    with pytest.raises(RangeError):
        ScenarioSpec("std_teleport", theta=4.0)


@given(hst.integers(1, 20), hst.integers(1, 20))
@settings(max_examples=25, deadline=None)
def test_relativity_rule_threshold(d, gap):
    rel = RelativitySettings(enabled=True, speed=1.0, positions={"Alice": 0.0, "Bob": float(d)})
    spec = ScenarioSpec("std_teleport", t1=1, t_send=1, t2=1 + gap, relativity=rel)
    sc = build(spec)
    v = validate(sc.timeline, sc.parties, spec.relativity.rule())
    assert bool(v) == (gap < d)
