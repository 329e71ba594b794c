import numpy as np
import pytest
from conftest import fd_jacobian, random_states

from avianjump.model import (
    DEG,
    POINTS,
    ContactMode,
    GeneralizedState,
    NoActiveConstraints,
    RobotParams,
    com_position,
    constraint_jacobian,
    constraint_positions,
    forward_kinematics,
    kinematics,
    rot2,
    task_values,
)

P = RobotParams()
STATES = random_states(20, seed=1)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)


def test_rot2_basic():
    np.testing.assert_allclose(rot2(0.0), np.eye(2))
    np.testing.assert_allclose(rot2(np.pi / 2) @ [1, 0], [0, 1], atol=1e-15)
    R = rot2(0.7)
    np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(rot2(0.3) @ rot2(0.4), rot2(0.7), atol=1e-15)


def test_fk_matches_hand_chain():
    s = GeneralizedState.from_degrees(x=0.1, y=0.3)
    q = s.q
    a_up = q[2] + q[3]
    a_lo = a_up + q[4]
    a_palm = a_lo + P.theta3
    a_toe = a_palm + q[5]
    u = lambda a: np.array([np.cos(a), np.sin(a)])
    hip = q[:2]
    ankle = hip + P.l1 * u(a_up)
    foot = ankle + P.l2 * u(a_lo)
    toe = foot + P.l3 * u(a_palm)
    claw = toe + P.l4 * u(a_toe)
    back = foot - P.back_claw_length * u(a_palm)
    fk = forward_kinematics(s, P)
    for name, ref in [("hip", hip), ("ankle", ankle), ("foot", foot), ("toe", toe), ("claw", claw), ("back_claw", back)]:
        np.testing.assert_allclose(fk[name], ref, atol=1e-14, err_msg=name)
    np.testing.assert_allclose(np.linalg.norm(fk["claw"] - fk["toe"]), P.l4, rtol=1e-14)


def test_fk_translation_equivariance():
    s = STATES[0]
    shifted = GeneralizedState(s.q + np.array([0.3, -0.2, 0, 0, 0, 0]), s.qd)
    a, b = forward_kinematics(s, P), forward_kinematics(shifted, P)
    for name in POINTS:
        np.testing.assert_allclose(b[name] - a[name], [0.3, -0.2], atol=1e-14)


@pytest.mark.parametrize("k", range(len(STATES)))
def test_point_jacobians_vs_fd(k):
    s = STATES[k]
    kin = kinematics(s, P)
    fd = fd_jacobian(lambda q: kinematics(GeneralizedState(q), P).pos, s.q)
    assert rel_err(kin.jac, fd) < 1e-5


@pytest.mark.parametrize("k", range(5))
def test_jdot_qd_vs_fd(k):
    s = STATES[k]
    kin = kinematics(s, P)
    h = 1e-6
    # d/dt (J qd) at fixed qd equals Jdot qd
    jp = kinematics(GeneralizedState(s.q + h * s.qd, s.qd), P).jac
    jm = kinematics(GeneralizedState(s.q - h * s.qd, s.qd), P).jac
    fd = np.einsum("paj,j->pa", (jp - jm) / (2 * h), s.qd)
    assert rel_err(kin.jdqd, fd) < 1e-5
    assert rel_err(np.einsum("paj,j->pa", kin.jdot, s.qd), kin.jdqd) < 1e-12


def test_jdot_vanishes_at_rest():
    kin = kinematics(GeneralizedState(STATES[0].q), P)
    assert np.all(kin.jdqd == 0)


@pytest.mark.parametrize("k", range(5))
def test_com_velocity_vs_fd(k):
    s = STATES[k]
    _, v = com_position(s, P)
    h = 1e-6
    pp, _ = com_position(GeneralizedState(s.q + h * s.qd), P)
    pm, _ = com_position(GeneralizedState(s.q - h * s.qd), P)
    np.testing.assert_allclose(v, (pp - pm) / (2 * h), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("k", range(5))
def test_task_jacobians_vs_fd(k):
    s = STATES[k]
    tv = task_values(s, P)
    fd = fd_jacobian(lambda q: [t.x for t in task_values(GeneralizedState(q), P)], s.q)
    J = np.vstack([t.J for t in tv])
    assert rel_err(J, fd) < 1e-5
    np.testing.assert_allclose([t.xd for t in tv], J @ s.qd, atol=1e-12)


@pytest.mark.parametrize("mode", [ContactMode.FLAT_TOE, ContactMode.TOE_TIP])
def test_constraint_jacobian_vs_fd(mode):
    for s in STATES[:5]:
        J, Jdot = constraint_jacobian(s, P, mode)
        assert J.shape == (mode.constraint_dim, 6)
        fd = fd_jacobian(lambda q: constraint_positions(GeneralizedState(q), P, mode), s.q)
        assert rel_err(J, fd) < 1e-5


def test_airborne_has_no_constraints():
    with pytest.raises(NoActiveConstraints):
        constraint_jacobian(STATES[0], P, ContactMode.AIRBORNE)


def test_state_validation_and_roundtrip():
    s = GeneralizedState.from_degrees(hip=100)
    assert s.q[3] == pytest.approx(100 * DEG)
    np.testing.assert_array_equal(GeneralizedState.from_vector(s.as_vector()).q, s.q)
    with pytest.raises(ValueError):
        GeneralizedState(np.full(6, np.nan))
    with pytest.raises(ValueError):
        RobotParams(l1=0.0)
    with pytest.raises(ValueError):
        RobotParams(aero_model="magic")


def test_actuator_limits():
    assert P.joint_torque_limit == pytest.approx(2 * 19.13 * 0.0573)
    assert np.degrees(P.joint_speed_limit) == pytest.approx(99900 / 19.13)
