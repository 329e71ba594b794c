import numpy as np
import pytest
from conftest import fd_jacobian, random_states

from avianjump.dynamics import (
    ActiveConstraints,
    Actuation,
    ConstraintDegeneracy,
    active_constraints,
    bias_forces,
    constrained_accel,
    coriolis_matrix,
    external_forces,
    flight_accel,
    gravity_vector,
    kinetic_energy,
    mass_matrix,
    mechanical_energy,
    potential_energy,
    selection_matrix,
    spring_energy,
)
from avianjump.dynamics import _solve_constrained
from avianjump.model import GRAVITY, ContactMode, GeneralizedState, RobotParams, com_terms, kinematics

P = RobotParams()
PN = RobotParams(aero_model="none")
STATES = random_states(10, seed=2)


@pytest.mark.parametrize("s", STATES)
def test_mass_matrix_symmetric_pd(s):
    M = mass_matrix(s, P)
    np.testing.assert_allclose(M, M.T, atol=1e-15)
    assert np.linalg.eigvalsh(M).min() > 0


@pytest.mark.parametrize("s", STATES[:5])
def test_kinetic_energy_by_segments(s):
    kin = kinematics(s, P)
    v = np.einsum("saj,j->sa", kin.segment_jac, s.qd)
    ke = 0.5 * np.sum(P.masses * np.sum(v * v, axis=1)) + 0.5 * np.sum(P.inertias * kin.rates**2)
    assert kinetic_energy(s, P) == pytest.approx(ke, rel=1e-12)
    assert 0.5 * s.qd @ mass_matrix(s, P) @ s.qd == pytest.approx(ke, rel=1e-12)


@pytest.mark.parametrize("s", STATES[:5])
def test_gravity_is_potential_gradient(s):
    g = gravity_vector(s, P)
    fd = fd_jacobian(lambda q: potential_energy(GeneralizedState(q), P, springs=False), s.q)
    np.testing.assert_allclose(g, fd, atol=1e-7)
    assert g[1] == pytest.approx(P.total_mass * GRAVITY)
    assert g[0] == 0


@pytest.mark.parametrize("s", STATES)
def test_mdot_minus_2c_skew(s):
    h = 1e-6
    Mdot = (mass_matrix(GeneralizedState(s.q + h * s.qd), P) - mass_matrix(GeneralizedState(s.q - h * s.qd), P)) / (
        2 * h
    )
    N = Mdot - 2 * coriolis_matrix(s, P)
    assert np.max(np.abs(N + N.T)) < 1e-8
    np.testing.assert_allclose(coriolis_matrix(s, P) @ s.qd + gravity_vector(s, P), bias_forces(s, P), atol=1e-12)


def test_spring_forces_only_on_ankle_and_toe():
    s = STATES[0]
    ext = external_forces(s, Actuation(), PN, ContactMode.AIRBORNE)
    np.testing.assert_allclose(ext.f_ext[:4], 0.0, atol=1e-15)
    fd = fd_jacobian(lambda q: spring_energy(q, P), s.q)
    np.testing.assert_allclose(ext.f_ext, -fd, atol=1e-8)


def test_full_thrust_magnitude():
    ext = external_forces(STATES[0], Actuation(thrust=1.0), PN)
    assert np.linalg.norm(ext.f_p) == pytest.approx(0.63 * GRAVITY)
    heading = STATES[0].q[2] + 7 * np.pi / 180
    np.testing.assert_allclose(ext.f_p / np.linalg.norm(ext.f_p), [np.cos(heading), np.sin(heading)])


@pytest.mark.parametrize("mode", [ContactMode.FLAT_TOE, ContactMode.TOE_TIP])
def test_kkt_satisfies_acceleration_constraint(mode):
    for s in STATES[:5]:
        tau = np.array([0.3, -0.5])
        qdd, _ = constrained_accel(s, tau, Actuation(0.4), P, mode, baumgarte=(0.0, 0.0))
        ac = active_constraints(kinematics(s, P), mode)
        assert np.max(np.abs(ac.J @ qdd + ac.jdqd)) < 1e-8


def test_kkt_linear_in_torque():
    s = STATES[1]
    mode = ContactMode.FLAT_TOE
    a0, _ = constrained_accel(s, [0, 0], Actuation(), P, mode)
    a1, _ = constrained_accel(s, [1, 0], Actuation(), P, mode)
    a2, _ = constrained_accel(s, [0, 1], Actuation(), P, mode)
    a3, _ = constrained_accel(s, [2, -3], Actuation(), P, mode)
    np.testing.assert_allclose(a3 - a0, 2 * (a1 - a0) - 3 * (a2 - a0), atol=1e-9)


@pytest.mark.parametrize("mode", [ContactMode.FLAT_TOE, ContactMode.TOE_TIP])
def test_momentum_balance_in_stance(mode):
    """Total mass times CoM acceleration equals gravity plus ground reaction."""
    for s in STATES[:5]:
        qdd, fc = constrained_accel(s, [0.4, -0.6], Actuation(), PN, mode)
        _, J, jdqd = com_terms(kinematics(s, PN))
        lhs = PN.total_mass * (J @ qdd + jdqd)
        rhs = fc.net + [0.0, -PN.total_mass * GRAVITY]
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_static_stance_carries_weight():
    s = GeneralizedState.from_degrees()
    _, fc = constrained_accel(s, [0.0, 0.0], Actuation(), PN, ContactMode.FLAT_TOE)
    # at rest the joints start to collapse, so support is below full weight but positive
    assert 0 < fc.vertical < PN.total_mass * GRAVITY * 1.5


def test_free_fall_acceleration():
    s = STATES[0]
    p = PN.with_updates(k_ankle=0.0, k_toe=0.0)
    qdd = flight_accel(GeneralizedState(s.q), [0, 0], Actuation(), p)
    _, J, jdqd = com_terms(kinematics(GeneralizedState(s.q), p))
    np.testing.assert_allclose(J @ qdd + jdqd, [0, -GRAVITY], atol=1e-12)


def test_selection_and_energy():
    S = selection_matrix()
    assert S.shape == (2, 6) and S[0, 3] == 1 and S[1, 4] == 1
    s = STATES[0]
    assert mechanical_energy(s, P) == pytest.approx(kinetic_energy(s, P) + potential_energy(s, P))


def test_degenerate_constraints_raise():
    kin = kinematics(STATES[0], PN)
    ac = active_constraints(kin, ContactMode.FLAT_TOE)
    dup = ActiveConstraints(np.vstack([ac.J, ac.J[:1]]), np.append(ac.jdqd, ac.jdqd[0]), ac.value, ac.net_map)
    M = mass_matrix(STATES[0], PN)
    with pytest.raises(ConstraintDegeneracy):
        _solve_constrained(M, np.zeros(6), dup, STATES[0].qd, None, (0.0, 0.0))
