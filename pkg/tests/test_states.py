import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from conftest import GRID, loop_partial_trace, params
from vqi import states as st
from vqi.linalg import RangeError, partial_trace
from vqi.measures import fidelity, von_neumann_entropy


def is_density(rho):
    m = rho.matrix
    return (
        np.max(np.abs(m - m.conj().T)) <= 1e-10
        and abs(np.trace(m).real - 1) <= 1e-10
        and np.linalg.eigvalsh(m).min() >= -1e-12
    )


def overlap(u, v):
    return abs(np.vdot(u, v)) ** 2


def test_pure_qubit_examples():
    assert np.allclose(st.pure_qubit(st.PureQubitParams(0.0, 4.0)).vector, [1, 0])
    assert np.allclose(st.pure_qubit(st.PureQubitParams(math.pi / 2, 0)).vector, np.array([1, 1]) / math.sqrt(2))
    assert np.allclose(st.pure_qubit(st.PureQubitParams(math.pi, 0)).vector, [0, 1], atol=1e-16)


@pytest.mark.parametrize("theta,phi", [(-0.1, 0), (math.pi + 1e-9, 0), (1, 2 * math.pi), (1, -1e-3)])
def test_pure_qubit_range_errors(theta, phi):
    with pytest.raises(RangeError):
        st.PureQubitParams(theta, phi)


def test_bell_basis():
    assert np.allclose(st.bell_state(0).vector, np.array([1, 0, 0, 1]) / math.sqrt(2))
    vecs = [st.bell_vector(i) for i in range(4)]
    gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
    assert np.allclose(gram, np.eye(4), atol=1e-15)
    assert np.max(np.abs(sum(st.bell_basis()) - np.eye(4))) <= 1e-12
    with pytest.raises(RangeError):
        st.bell_vector(4)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_ghz(n):
    g = st.ghz(n)
    if n == 2:
        assert fidelity(st.bell_state(0, g.labels), g) == pytest.approx(1.0)
    nz = np.flatnonzero(np.abs(g.vector) > 0)
    assert list(nz) == [0, 2**n - 1]
    assert np.allclose(g.vector[nz], 1 / math.sqrt(2))
    for k in range(n):
        marg = loop_partial_trace(g.matrix, (2,) * n, {k})
        assert np.allclose(marg, np.eye(2) / 2, atol=1e-12)


@pytest.mark.parametrize("n", [1, 6])
def test_ghz_range(n):
    with pytest.raises(RangeError):
        st.ghz(n)


def test_classical_correlated():
    c = st.classical_correlated(2)
    assert np.allclose(c.matrix, np.diag([0.5, 0, 0, 0.5]))
    for lab in c.labels:
        assert np.allclose(partial_trace(c, [lab]).matrix, np.eye(2) / 2)
    assert von_neumann_entropy(c) == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(np.diag(st.classical_correlated(4).matrix)) == 2
    with pytest.raises(RangeError):
        st.classical_correlated(6)


def test_classical_mixture():
    assert np.allclose(st.classical_mixture(1).matrix, np.diag([1, 0]))
    assert np.allclose(st.classical_mixture(0.5).matrix, np.eye(2) / 2)
    assert von_neumann_entropy(st.classical_mixture(0.5)) == pytest.approx(1.0)
    with pytest.raises(RangeError):
        st.classical_mixture(1.5)


def _expanded_pair(theta, phi):
    # symbolic expansion: cross terms cancel, |00> gets c^2+s^2, |11> gets e^{2i phi}(s^2+c^2)
    return np.array([1, 0, 0, np.exp(2j * phi)]) / math.sqrt(2)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, math.pi])
def test_psi_pair_phase_cases(theta):
    phi_plus = np.array([1, 0, 0, 1]) / math.sqrt(2)
    phi_minus = np.array([1, 0, 0, -1]) / math.sqrt(2)
    v0 = st.psi_pair(st.PureQubitParams(theta, 0.0)).vector
    v1 = st.psi_pair(st.PureQubitParams(theta, math.pi / 2)).vector
    assert overlap(v0, phi_plus) == pytest.approx(1.0, abs=1e-12)
    assert overlap(v1, phi_minus) == pytest.approx(1.0, abs=1e-12)


@given(params)
@settings(max_examples=50, deadline=None)
def test_psi_pair_matches_expansion_and_is_maximally_entangled(p):
    v = st.psi_pair(p).vector
    assert overlap(v, _expanded_pair(p.theta, p.phi)) == pytest.approx(1.0, abs=1e-12)
    schmidt = np.linalg.svd(v.reshape(2, 2), compute_uv=False)
    assert np.allclose(schmidt, [1 / math.sqrt(2)] * 2, atol=1e-12)
    rho = st.psi_pair(p)
    for lab in rho.labels:
        assert np.allclose(partial_trace(rho, [lab]).matrix, np.eye(2) / 2, atol=1e-12)


def test_pauli_and_mixed_input():
    p = st.PureQubitParams(1.2, 0.4)
    v = p.amplitudes()
    assert np.allclose(st.pauli("z") @ v, [v[0], -v[1]])
    assert np.allclose(st.mixed_input(1, p).matrix, np.outer(v, v.conj()))
    assert np.allclose(st.mixed_input(0, p).matrix, np.eye(2) / 2)
    with pytest.raises(RangeError):
        st.pauli("w")
    with pytest.raises(RangeError):
        st.mixed_input(-0.2, p)


@given(params)
@settings(max_examples=50, deadline=None)
def test_correction_table_recovers_input(p):
    psi = p.amplitudes()
    for i, branch in enumerate(st.branch_states(p)):
        assert np.linalg.norm(branch) == pytest.approx(1.0, abs=1e-12)
        fixed = st.BELL_CORRECTIONS[i] @ branch
        assert overlap(psi, fixed) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", GRID[::7])
def test_constructors_are_density_operators(p):
    outs = [
        st.pure_qubit(p),
        st.bell_state(3),
        st.ghz(3),
        st.classical_correlated(3),
        st.classical_mixture(0.3),
        st.psi_pair(p),
        st.mixed_input(0.6, p),
        st.post_measurement_state(p),
        st.broadcast_state(0.2, 3),
    ]
    assert all(is_density(r) for r in outs)
