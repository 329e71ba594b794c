"""Foot trajectories, leg inverse kinematics and joint references.

Foot paths live in the hip frame: origin at the hip, axes aligned with the
world (x forward, y up). Joint angles follow the model convention, where
``q4`` is measured from the body axis and ``q5`` from the upper limb.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import DEG, POINT_INDEX, GeneralizedState, RobotParams, com_position, default_state, kinematics

REACH_MARGIN = 1e-6


class UnreachableTarget(ValueError):
    def __init__(self, target, nearest):
        self.target = np.asarray(target, dtype=float)
        self.nearest = np.asarray(nearest, dtype=float)
        super().__init__(f"foot target {self.target.tolist()} is out of reach; nearest reachable point {self.nearest.tolist()}")


class FeetNotOnGround(ValueError):
    pass


class GaitMode(enum.Enum):
    JUMP_TAKEOFF = "JumpTakeoff"
    WALK = "Walk"
    HEIGHT_JUMP = "HeightJump"
    FORWARD_HOP = "ForwardHop"


PHASE_NAMES = {
    GaitMode.JUMP_TAKEOFF: ("push-off", "stretch-back"),
    GaitMode.WALK: ("stance", "swing"),
    GaitMode.HEIGHT_JUMP: ("push-off", "retract"),
    GaitMode.FORWARD_HOP: ("crouch", "push-off", "retract", "stretch", "balance"),
}
# phases in which the foot is off the ground and must clear it
SWING_PHASES = {"swing", "stretch-back", "retract", "stretch"}


# -- inverse kinematics ------------------------------------------------------------


def leg_point(q4: float, q5: float, params: RobotParams, pitch: float = 0.0) -> np.ndarray:
    """Foot point (end of the lower limb) in the hip frame."""
    a1 = pitch + q4
    a2 = a1 + q5
    return np.array(
        [params.l1 * math.cos(a1) + params.l2 * math.cos(a2), params.l1 * math.sin(a1) + params.l2 * math.sin(a2)]
    )


def leg_jacobian(q4: float, q5: float, params: RobotParams, pitch: float = 0.0) -> np.ndarray:
    a1 = pitch + q4
    a2 = a1 + q5
    s1, c1, s2, c2 = math.sin(a1), math.cos(a1), math.sin(a2), math.cos(a2)
    return np.array(
        [
            [-params.l1 * s1 - params.l2 * s2, -params.l2 * s2],
            [params.l1 * c1 + params.l2 * c2, params.l2 * c2],
        ]
    )


def ik_leg(target, params: RobotParams, pitch: float = 0.0, branch: int = 1) -> tuple[float, float]:
    """Closed-form two-link IK for the hip-frame foot point.

    ``branch=+1`` gives ``q5`` in ``(0, pi)``, the backward-bending ankle of
    the default posture; ``branch=-1`` is the mirror solution. Angles are
    wrapped to ``(-pi, pi]``.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    p = np.asarray(target, dtype=float)
    l1, l2 = params.l1, params.l2
    d = float(np.hypot(*p))
    lo, hi = abs(l1 - l2) + REACH_MARGIN, l1 + l2 - REACH_MARGIN
    if not lo <= d <= hi:
        r = min(max(d, lo), hi)
        nearest = p * (r / d) if d > 0 else np.array([r, 0.0])
        raise UnreachableTarget(p, nearest)
    c5 = (d * d - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    q5 = branch * math.acos(min(1.0, max(-1.0, c5)))
    a1 = math.atan2(p[1], p[0]) - math.atan2(l2 * math.sin(q5), l1 + l2 * math.cos(q5))
    return _wrap(a1 - pitch), _wrap(q5)


def ankle_interior_angle(q5: float) -> float:
    """Angle between the two limbs at the ankle; ``pi`` for a straight leg."""
    return math.pi - abs(_wrap(q5))


def _wrap(a: float) -> float:
    return float(math.remainder(a, 2 * math.pi))


# -- foot trajectories ----------------------------------------------------------


@dataclass(frozen=True)
class FootPhase:
    """One phase: hip-frame waypoints visited at evenly spaced times."""

    name: str
    duration: float
    waypoints: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.duration <= 0:
            raise ValueError(f"phase {self.name!r} needs a positive duration")
        if w.shape[1] != 2 or len(w) < 2:
            raise ValueError(f"phase {self.name!r} needs at least two 2-D waypoints")
        object.__setattr__(self, "waypoints", w)

    @property
    def spline(self) -> CubicSpline:
        s = np.linspace(0.0, self.duration, len(self.waypoints))
        return CubicSpline(s, self.waypoints, bc_type="clamped", axis=0)

    @property
    def displacement(self) -> np.ndarray:
        return self.waypoints[-1] - self.waypoints[0]

    def sample(self, t) -> tuple[np.ndarray, np.ndarray]:
        sp = self.spline
        return sp(t), sp(t, 1)


@dataclass(frozen=True)
class FootTrajectory:
    mode: GaitMode
    phases: tuple[FootPhase, ...]
    pitch: float = 10 * DEG
    ground: float | None = None  # hip-frame ground height for swing clearance

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.phases)

    def phase(self, name: str) -> FootPhase:
        return next(p for p in self.phases if p.name == name)

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([p.duration for p in self.phases])])

    def sample(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Foot position, velocity and phase index at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        edges = self.boundaries()
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(self.phases) - 1)
        pos = np.zeros((len(t), 2))
        vel = np.zeros((len(t), 2))
        for i, ph in enumerate(self.phases):
            m = idx == i
            if m.any():
                local = np.clip(t[m] - edges[i], 0.0, ph.duration)
                pos[m], vel[m] = ph.sample(local)
        return pos, vel, idx

    def swing_clearance(self, samples: int = 200) -> float:
        """Lowest foot height above the last ground contact over swing phases.

        The contact height is the foot height at the start of each run of
        consecutive swing phases (lift-off); negative means ground strike.
        """
        best = math.inf
        contact = None
        for ph in self.phases:
            if ph.name not in SWING_PHASES:
                contact = None
                continue
            if contact is None:
                contact = ph.waypoints[0][1]
            y = ph.sample(np.linspace(0.0, ph.duration, samples))[0][:, 1]
            best = min(best, float(y.min() - contact))
        return best

    def scaled(self, cycle_time: float) -> "FootTrajectory":
        k = cycle_time / self.duration
        phases = tuple(FootPhase(p.name, p.duration * k, p.waypoints) for p in self.phases)
        return FootTrajectory(self.mode, phases, self.pitch, self.ground)


@dataclass(frozen=True)
class GaitConfig:
    """Shape parameters of the default foot paths (lengths in m, times in s)."""

    pitch: float = 10 * DEG
    height_jump_pitch: float = 30 * DEG
    hop_pitch: float = 0.0
    stroke: float = 0.06
    step_height: float = 0.02
    walk_speed: float = 0.23
    swing_time: float = 0.2
    jump_angle: float = 76 * DEG
    height_jump_angle: float = 88 * DEG
    hop_angle: float = 50 * DEG
    extension: float = 0.85  # push-off end distance as a fraction of l1 + l2
    push_time: float = 0.18
    crouch_depth: float = 0.015
    tuck: tuple[float, float] = (-0.09, 0.02)
    recovery_time: float = 0.15
    crouch_time: float = 0.15
    balance_time: float = 0.4
    n_steps: int | None = None
    hip_delay: float = 0.0

    def __post_init__(self):
        for name in ("stroke", "walk_speed", "swing_time", "push_time", "recovery_time", "crouch_time", "balance_time"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.extension < 1:
            raise ValueError("extension must lie in (0, 1)")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.hip_delay < 0:
            raise ValueError("hip_delay must be non-negative")


def standing_foot(params: RobotParams, state: GeneralizedState | None = None) -> np.ndarray:
    """Hip-frame foot point of a standing posture (default: the initial one)."""
    s = default_state() if state is None else state
    return leg_point(s.q[3], s.q[4], params, s.q[2])


def _push_end(start, angle: float, reach: float) -> np.ndarray:
    """Foot end point after pushing the hip along ``angle`` until ``|p| = reach``."""
    d = np.array([math.cos(angle), math.sin(angle)])
    # |start - s d| = reach, take the positive root
    b = -2 * start @ d
    c = start @ start - reach * reach
    s = (-b + math.sqrt(b * b - 4 * c)) / 2
    return start - s * d


def gen_trajectory(mode: GaitMode | str, config: GaitConfig | None = None, params: RobotParams | None = None) -> FootTrajectory:
    mode = GaitMode(mode)
    cfg = GaitConfig() if config is None else config
    p = RobotParams() if params is None else params
    home = standing_foot(p)
    ground = float(home[1])
    reach = cfg.extension * (p.l1 + p.l2)
    tuck = home + np.asarray(cfg.tuck)

    if mode is GaitMode.WALK:
        front = home + [cfg.stroke / 2, 0.0]
        back = home - [cfg.stroke / 2, 0.0]
        stance_time = cfg.stroke / cfg.walk_speed
        phases = (
            FootPhase("stance", stance_time, [front, home, back]),
            FootPhase("swing", cfg.swing_time, [back, home + [0.0, cfg.step_height], front]),
        )
        return FootTrajectory(mode, phases, cfg.pitch, ground)

    if mode is GaitMode.JUMP_TAKEOFF:
        end = _push_end(home, cfg.jump_angle, reach)
        phases = (
            FootPhase("push-off", cfg.push_time, [home, end]),
            FootPhase("stretch-back", cfg.recovery_time, [end, 0.5 * (end + tuck) + [-0.03, 0.0], tuck]),
        )
        return FootTrajectory(mode, phases, cfg.pitch, ground)

    if mode is GaitMode.HEIGHT_JUMP:
        end = _push_end(home, cfg.height_jump_angle, reach)
        phases = (
            FootPhase("push-off", cfg.push_time, [home, end]),
            FootPhase("retract", cfg.recovery_time, [end, home + [0.0, 0.01]]),
        )
        return FootTrajectory(mode, phases, cfg.height_jump_pitch, ground)

    crouched = home + [0.0, cfg.crouch_depth]
    end = _push_end(crouched, cfg.hop_angle, reach)
    retracted = home + [0.0, 0.02]
    landing = home + [0.01, -0.03]
    phases = (
        FootPhase("crouch", cfg.crouch_time, [home, crouched]),
        FootPhase("push-off", cfg.push_time, [crouched, end]),
        FootPhase("retract", cfg.recovery_time, [end, retracted]),
        FootPhase("stretch", cfg.recovery_time, [retracted, landing]),
        FootPhase("balance", cfg.balance_time, [landing, home]),
    )
    return FootTrajectory(mode, phases, cfg.hop_pitch, ground)


# -- joint references ---------------------------------------------------------------


@dataclass(frozen=True)
class JointReference:
    """Hip/ankle position and velocity references on a time grid.

    After discretization ``step_edges``/``step_values`` hold the exact
    piecewise-constant velocity profile; the hip channel's edges are shifted
    by ``hip_delay``.
    """

    t: np.ndarray
    q: np.ndarray  # (n, 2) hip, ankle (rad)
    qd: np.ndarray  # (n, 2) (rad/s)
    n_steps: int | None = None
    hip_delay: float = 0.0
    step_edges: np.ndarray | None = None
    step_values: np.ndarray | None = None

    def displacement(self) -> np.ndarray:
        if self.step_values is not None:
            return self.step_values.T @ np.diff(self.step_edges)
        return _cumulative(self.t, self.qd, self.t[-1:])[0]


def _cumulative(t, v, s) -> np.ndarray:
    """Exact integral from ``t[0]`` to each ``s`` of the piecewise-linear ``v(t)``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float).reshape(len(t), -1)
    s = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), t[0], t[-1])
    h = np.diff(t)
    seg = 0.5 * h[:, None] * (v[:-1] + v[1:])
    F = np.vstack([np.zeros((1, v.shape[1])), np.cumsum(seg, axis=0)])
    i = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
    dt = (s - t[i])[:, None]
    slope = (v[i + 1] - v[i]) / h[i][:, None]
    return F[i] + v[i] * dt + 0.5 * slope * dt * dt


def discretize_reference(ref: JointReference, n_steps: int, hip_delay: float = 0.0) -> JointReference:
    """Replace velocities by ``n_steps`` equal-width steps of the same area.

    Each step carries the mean velocity over its window, so the displacement
    of every window, and hence of the whole profile, is unchanged. The hip
    channel then starts ``hip_delay`` later (zero velocity before), and the
    time grid is extended so no motion is cut off.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if hip_delay < 0:
        raise ValueError("hip_delay must be non-negative")
    t = np.asarray(ref.t, dtype=float)
    T0, T1 = t[0], t[-1]
    edges = np.linspace(T0, T1, n_steps + 1)
    F = _cumulative(t, ref.qd, edges)
    values = np.diff(F, axis=0) / np.diff(edges)[:, None]

    dt = (T1 - T0) / max(len(t) - 1, 1)
    extra = int(math.ceil(hip_delay / dt - 1e-9)) if hip_delay > 0 else 0
    t_new = np.concatenate([t, T1 + dt * np.arange(1, extra + 1)]) if extra else t.copy()
    shifts = (hip_delay, 0.0)
    q0 = np.asarray(ref.q, dtype=float)[0]
    q = np.zeros((len(t_new), 2))
    qd = np.zeros((len(t_new), 2))
    for j in range(2):
        e = edges + shifts[j]
        k = np.clip(np.searchsorted(e, t_new, side="right") - 1, 0, n_steps - 1)
        inside = (t_new >= e[0]) & (t_new < e[-1])
        qd[:, j] = np.where(inside, values[k, j], 0.0)
        # exact integral of the step profile
        cum = np.concatenate([[0.0], np.cumsum(values[:, j] * np.diff(e))])
        tc = np.clip(t_new, e[0], e[-1])
        kk = np.clip(np.searchsorted(e, tc, side="right") - 1, 0, n_steps - 1)
        q[:, j] = q0[j] + cum[kk] + values[kk, j] * (tc - e[kk])
    return JointReference(t_new, q, qd, n_steps, hip_delay, edges, values)


def gait_to_joint_commands(
    traj: FootTrajectory,
    params: RobotParams | None = None,
    cycle_time: float | None = None,
    rate: float = 1000.0,
    n_steps: int | None = None,
    hip_delay: float = 0.0,
    branch: int = 1,
) -> JointReference:
    """Sample the foot path, solve IK and map foot velocity through the leg Jacobian."""
    p = RobotParams() if params is None else params
    if cycle_time is not None:
        traj = traj.scaled(cycle_time)
    n = int(round(traj.duration * rate)) + 1
    t = np.linspace(0.0, traj.duration, n)
    pos, vel, _ = traj.sample(t)
    q = np.zeros((n, 2))
    qd = np.zeros((n, 2))
    for i in range(n):
        q[i] = ik_leg(pos[i], p, traj.pitch, branch)
        qd[i] = np.linalg.solve(leg_jacobian(*q[i], p, traj.pitch), vel[i])
    q = np.unwrap(q, axis=0)
    ref = JointReference(t, q, qd)
    if n_steps is not None:
        ref = discretize_reference(ref, n_steps, hip_delay)
    return ref


def reference_from_log(log, until: float | None = None) -> JointReference:
    """Hip/ankle references taken from a simulated take-off log."""
    m = np.ones(len(log.t), bool) if until is None else log.t <= until + 1e-12
    return JointReference(log.t[m].copy(), log.q[m][:, 3:5].copy(), log.qd[m][:, 3:5].copy())


# -- static stability ---------------------------------------------------------------


class Verdict(enum.Enum):
    STABLE_PALM = "Stable (palm support)"
    STABLE_TOE = "Stable (toe support)"
    UNSTABLE_NOSE_UP = "Unstable (nose-up)"
    UNSTABLE_NOSE_DOWN = "Unstable (nose-down)"

    @property
    def stable(self) -> bool:
        return self in (Verdict.STABLE_PALM, Verdict.STABLE_TOE)


@dataclass(frozen=True)
class SupportPolygon:
    back_claw_x: float
    toe_joint_x: float
    toe_tip_x: float
    com_x: float
    verdict: Verdict
    reorients: bool = False  # foot pivots onto the compliant toes
    extremities: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return self.verdict.stable

    @property
    def interval(self) -> tuple[float, float]:
        return self.back_claw_x, self.toe_tip_x


def static_stability(
    state: GeneralizedState, params: RobotParams, toe_joint_locked: bool = False, tol: float = 1e-6
) -> SupportPolygon:
    """Support check for a standing robot with both (synchronized) feet down.

    The toes must lie flat on the ground. The palm spans back claw to toe
    joint. With a compliant toe the palm can swing down about the toe joint,
    so its flattened back claw bounds the footprint from behind, and a CoM
    ahead of the toe joint is carried by the toes as the foot reorients.
    With a locked toe only the points currently on the ground support.
    """
    kin = kinematics(state, params)
    back = kin.pos[POINT_INDEX["back_claw"]]
    toe = kin.pos[POINT_INDEX["toe"]]
    claw = kin.pos[POINT_INDEX["claw"]]
    ground = float(claw[1])
    if abs(toe[1] - ground) > tol or back[1] < ground - tol:
        raise FeetNotOnGround(f"toes are not flat on the ground (toe joint y={toe[1]:.6g}, toe tip y={claw[1]:.6g})")
    palm_down = abs(back[1] - ground) <= tol
    if toe_joint_locked:
        rear = float(back[0]) if palm_down else float(toe[0])
    else:
        rear = float(toe[0] - np.linalg.norm(toe - back))
    com, _ = com_position(state, params)
    x = float(com[0])
    if x < rear:
        verdict = Verdict.UNSTABLE_NOSE_UP
    elif x > claw[0]:
        verdict = Verdict.UNSTABLE_NOSE_DOWN
    elif x <= toe[0]:
        verdict = Verdict.STABLE_PALM
    else:
        verdict = Verdict.STABLE_TOE
    return SupportPolygon(
        rear,
        float(toe[0]),
        float(claw[0]),
        x,
        verdict,
        verdict is Verdict.STABLE_TOE and not toe_joint_locked and not palm_down,
        {"back_claw": back.copy(), "toe": toe.copy(), "claw": claw.copy()},
    )


def write_reference_csv(ref: JointReference, path) -> None:
    data = np.column_stack([ref.t, ref.q, ref.qd])
    np.savetxt(path, data, delimiter=",", header="t,q4_ref,q5_ref,qd4_ref,qd5_ref", comments="", fmt="%.17g")


def read_reference_csv(path) -> JointReference:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return JointReference(data[:, 0], data[:, 1:3], data[:, 3:5])
