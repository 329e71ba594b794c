import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avianjump.gaits import (
    FeetNotOnGround,
    GaitConfig,
    GaitMode,
    UnreachableTarget,
    Verdict,
    ankle_interior_angle,
    discretize_reference,
    gait_to_joint_commands,
    gen_trajectory,
    ik_leg,
    leg_jacobian,
    leg_point,
    read_reference_csv,
    standing_foot,
    static_stability,
    write_reference_csv,
)
from avianjump.model import POINT_INDEX, GeneralizedState, RobotParams, com_position, kinematics

P = RobotParams()
MODES = list(GaitMode)


def annulus_targets(n, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(abs(P.l1 - P.l2) + 1e-3, P.l1 + P.l2 - 1e-3, n)
    a = rng.uniform(-np.pi, np.pi, n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def test_ik_round_trip():
    for k, target in enumerate(annulus_targets(1000)):
        pitch = 0.1 * (k % 7)
        for branch in (1, -1):
            q4, q5 = ik_leg(target, P, pitch, branch)
            assert np.max(np.abs(leg_point(q4, q5, P, pitch) - target)) < 1e-9


def test_ik_branches_mirror():
    for target in annulus_targets(50, seed=1):
        up = ik_leg(target, P, branch=1)
        down = ik_leg(target, P, branch=-1)
        assert up[1] == pytest.approx(-down[1], abs=1e-12)
        assert 0 < up[1] < math.pi
        assert ankle_interior_angle(up[1]) == pytest.approx(ankle_interior_angle(down[1]))


def test_ik_unreachable_reports_nearest():
    with pytest.raises(UnreachableTarget) as err:
        ik_leg([0.5, 0.0], P)
    assert np.linalg.norm(err.value.nearest) == pytest.approx(P.l1 + P.l2, abs=1e-5)
    with pytest.raises(ValueError):
        ik_leg([0.1, 0.1], P, branch=0)


def test_leg_jacobian_fd():
    q4, q5 = 2.0, 2.3
    h = 1e-6
    fd = np.column_stack(
        [
            (leg_point(q4 + h, q5, P) - leg_point(q4 - h, q5, P)) / (2 * h),
            (leg_point(q4, q5 + h, P) - leg_point(q4, q5 - h, P)) / (2 * h),
        ]
    )
    np.testing.assert_allclose(leg_jacobian(q4, q5, P), fd, atol=1e-8)


def test_standing_foot_matches_default_posture():
    s = GeneralizedState.from_degrees()
    kin = kinematics(s, P)
    np.testing.assert_allclose(standing_foot(P), kin.pos[POINT_INDEX["foot"]] - kin.pos[POINT_INDEX["hip"]], atol=1e-14)
    q4, q5 = ik_leg(standing_foot(P), P, s.q[2])
    assert (q4, q5) == pytest.approx((s.q[3], s.q[4]), abs=1e-9)


def test_walk_cycle_closes():
    tr = gen_trajectory(GaitMode.WALK)
    start, _, _ = tr.sample(0.0)
    end, _, _ = tr.sample(tr.duration)
    np.testing.assert_allclose(start, end, atol=1e-12)
    stance = tr.phase("stance")
    assert stance.displacement[0] < 0  # foot sweeps back relative to the hip
    assert stance.duration == pytest.approx(0.06 / 0.23)


@pytest.mark.parametrize("mode,angle", [(GaitMode.JUMP_TAKEOFF, 76), (GaitMode.HEIGHT_JUMP, 88)])
def test_push_direction(mode, angle):
    d = gen_trajectory(mode).phase("push-off").displacement
    d = -d / np.linalg.norm(d)  # hip moves opposite to the foot
    np.testing.assert_allclose(d, [math.cos(math.radians(angle)), math.sin(math.radians(angle))], atol=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_paths_reachable_and_clear(mode):
    tr = gen_trajectory(mode)
    ref = gait_to_joint_commands(tr, P)
    assert np.all(np.isfinite(ref.q))
    assert tr.swing_clearance() >= -1e-12
    # joint velocity agrees with differentiated angles
    dq = np.gradient(ref.q, ref.t, axis=0)
    assert np.max(np.abs(dq[2:-2] - ref.qd[2:-2])) < 0.05 * max(1.0, np.max(np.abs(ref.qd)))


def test_walk_speeds_within_actuator_limit():
    ref = gait_to_joint_commands(gen_trajectory(GaitMode.WALK), P)
    assert np.max(np.abs(ref.qd)) < P.joint_speed_limit


def test_scaled_cycle():
    tr = gen_trajectory(GaitMode.WALK).scaled(1.0)
    assert tr.duration == pytest.approx(1.0)
    assert tr.mode is GaitMode.WALK


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0.0, 0.05), st.sampled_from(MODES))
def test_discretization_preserves_displacement(n_steps, hip_delay, mode):
    ref = gait_to_joint_commands(gen_trajectory(mode), P, rate=500)
    disc = discretize_reference(ref, n_steps, hip_delay)
    np.testing.assert_allclose(disc.displacement(), ref.displacement(), atol=1e-10)
    np.testing.assert_allclose(disc.q[-1] - disc.q[0], ref.displacement(), atol=1e-10)
    assert disc.t[-1] >= ref.t[-1] + hip_delay - 1e-9
    before = disc.t < disc.t[0] + hip_delay
    assert np.all(disc.qd[before, 0] == 0.0)


def test_discretization_rejects_bad_input():
    ref = gait_to_joint_commands(gen_trajectory(GaitMode.WALK), P, rate=200)
    with pytest.raises(ValueError):
        discretize_reference(ref, 0)
    with pytest.raises(ValueError):
        discretize_reference(ref, 3, -0.1)
    with pytest.raises(ValueError):
        GaitConfig(extension=1.5)


def test_reference_csv_round_trip(tmp_path):
    ref = gait_to_joint_commands(gen_trajectory(GaitMode.FORWARD_HOP), P, rate=300)
    path = tmp_path / "ref.csv"
    write_reference_csv(ref, path)
    back = read_reference_csv(path)
    for a, b in ((ref.t, back.t), (ref.q, back.q), (ref.qd, back.qd)):
        np.testing.assert_array_equal(a, b)


# -- static stability against a sampled footprint ---------------------------------


def flat_toe_state(pitch, hip, q6):
    """Posture with the toe segment flat, pointing forward, tip at y = 0."""
    ankle = -(pitch + hip + P.theta3 + q6)
    s = GeneralizedState(np.array([0.0, 0.0, pitch, hip, ankle, q6]))
    claw = kinematics(s, P).pos[POINT_INDEX["claw"]]
    return GeneralizedState(s.q - np.array([claw[0], claw[1], 0, 0, 0, 0]))


def sampled_support(state, compliant, tol=1e-9):
    kin = kinematics(state, P)
    back, toe, claw = (kin.pos[POINT_INDEX[n]] for n in ("back_claw", "toe", "claw"))
    if compliant:
        # palm swings down about the toe joint until flat
        back = toe - [np.linalg.norm(toe - back), 0.0]
    s = np.linspace(0, 1, 401)[:, None]
    pts = np.vstack([back + s * (toe - back), toe + s * (claw - toe)])
    on = pts[np.abs(pts[:, 1]) <= tol]
    return on[:, 0].min(), on[:, 0].max()


@pytest.mark.parametrize("compliant", [True, False])
def test_stability_matches_sampled_footprint(compliant):
    rng = np.random.default_rng(7)
    for k in range(500):
        q6 = 0.0 if k % 2 else rng.uniform(0, 0.6)
        s = flat_toe_state(rng.uniform(-0.6, 0.9), rng.uniform(1.4, 3.0), q6)
        poly = static_stability(s, P, toe_joint_locked=not compliant)
        lo, hi = sampled_support(s, compliant)
        x = com_position(s, P)[0][0]
        margin = min(abs(x - lo), abs(x - hi))
        if margin < 1e-3:
            continue  # within the sampling resolution
        assert poly.stable == (lo <= x <= hi)
        if not poly.stable:
            expect = Verdict.UNSTABLE_NOSE_UP if x < lo else Verdict.UNSTABLE_NOSE_DOWN
            assert poly.verdict is expect


def test_default_posture_is_stable():
    poly = static_stability(GeneralizedState.from_degrees(), P)
    assert poly.stable
    lo, hi = poly.interval
    assert lo < poly.com_x < hi


def test_feet_off_ground_rejected():
    s = flat_toe_state(0.2, 2.0, 0.0)
    tipped = GeneralizedState(s.q + np.array([0, 0, 0, 0, 0, -0.3]))
    with pytest.raises(FeetNotOnGround):
        static_stability(tipped, P)
