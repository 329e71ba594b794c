"""Planar geometry of the lumped winged-leg robot.

Generalized coordinates ``q = (x, y, pitch, hip, ankle, toe)``:

* ``x, y`` -- world position of the hip joint (the body reference point), m
* ``pitch`` -- body axis angle from the world x-axis, counter-clockwise, rad
* ``hip`` -- upper limb angle relative to the body axis
* ``ankle`` -- lower limb angle relative to the upper limb
* ``toe`` -- toe deflection relative to the rigid palm extension

Absolute segment angles are cumulative sums down the chain::

    upper = pitch + hip
    lower = upper + ankle
    palm  = lower + theta3          (fixed offset geometry)
    toe   = palm + toe_deflection

With the default posture (10, 135, 145, 25 deg) and ``theta3 = 45 deg`` the
toe segment lies exactly along the world x-axis, i.e. flat on the ground.

Every point of interest is written as ``(x, y) + sum_f R(phi_f) w_f`` over the
five segment frames, which gives positions, Jacobians and ``Jdot`` in one
vectorised pass.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, fields, replace

import numpy as np

GRAVITY = 9.81
DEG = np.pi / 180.0
NQ = 6

# rows: frames (body, upper, lower, palm, toe); columns: q3..q6
FRAME_MASK = np.array(
    [
        [1, 0, 0, 0],
        [1, 1, 0, 0],
        [1, 1, 1, 0],
        [1, 1, 1, 0],
        [1, 1, 1, 1],
    ],
    dtype=float,
)
BODY, UPPER, LOWER, PALM, TOE = range(5)

POINTS = (
    "hip",
    "body_com",
    "ankle",
    "upper_com",
    "foot",
    "lower_com",
    "palm_com",
    "toe",
    "toe_com",
    "claw",
    "back_claw",
    "wing",
    "tail",
    "thrust",
)
POINT_INDEX = {name: i for i, name in enumerate(POINTS)}

SEGMENTS = ("body", "upper", "lower", "palm", "toe")
_SEGMENT_POINTS = np.array([POINT_INDEX[p] for p in ("body_com", "upper_com", "lower_com", "palm_com", "toe_com")])


class ContactMode(enum.Enum):
    """Active foot constraint set."""

    FLAT_TOE = "FlatToe"
    TOE_TIP = "ToeTip"
    AIRBORNE = "Airborne"

    @property
    def constraint_dim(self) -> int:
        return {"FlatToe": 4, "ToeTip": 2, "Airborne": 0}[self.value]


class NoActiveConstraints(ValueError):
    """Raised when constraint quantities are requested for an airborne robot."""


@dataclass(frozen=True)
class RobotParams:
    """Physical constants in SI units (angles in rad, springs in N m/rad).

    Defaults reproduce the jumping take-off simulation parameter table; the
    config loader accepts the original table units and converts them.
    """

    l1: float = 0.12
    l2: float = 0.12
    l3: float = 0.023
    theta3: float = 45.0 * DEG
    l4: float = 0.06
    m_body: float = 0.5
    m_upper: float = 0.015
    m_lower: float = 0.015
    m_palm: float = 0.015
    m_toe: float = 0.005
    body_length: float = 0.5
    rho: float = 1.225
    wing_area: float = 0.18
    tail_area: float = 0.0864
    wing_offset: float = 7.0 * DEG
    tail_offset: float = 1.0 * DEG
    thrust_offset: float = 7.0 * DEG
    max_thrust: float = 0.63 * GRAVITY
    k_ankle: float = 3.207e-3 / DEG
    k_toe: float = 6.249e-3 / DEG
    wing_center: tuple[float, float] = (-0.02, 0.042)
    tail_center: tuple[float, float] = (-0.28, 0.074)
    # body CoM and thrust line are not tabulated; see README
    body_com: tuple[float, float] = (0.0, 0.02)
    thrust_point: tuple[float, float] = (0.0, 0.02)
    back_claw_length: float = 0.03
    gear_ratio: float = 19.13
    motor_max_speed: float = 99900.0 * DEG
    motor_max_torque: float = 0.0573
    motors_per_joint: int = 2
    toe_deflection_max: float = 25.0 * DEG
    ankle_rest: float = 0.0
    toe_rest: float = 25.0 * DEG
    toe_stop: bool = True
    aero_model: str = "flat_plate"
    aero_in_stance: bool = True
    gravity: float = GRAVITY

    def __post_init__(self):
        positive = ("l1", "l2", "l3", "l4", "m_body", "body_length", "rho", "wing_area", "tail_area", "gear_ratio")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        for name in ("m_upper", "m_lower", "m_palm", "m_toe", "k_ankle", "k_toe", "max_thrust", "motor_max_torque"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.aero_model not in ("flat_plate", "thin_airfoil_with_stall", "none"):
            raise ValueError(f"unknown aero_model {self.aero_model!r}")
        for name in ("wing_center", "tail_center", "body_com", "thrust_point"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.m_body, self.m_upper, self.m_lower, self.m_palm, self.m_toe])

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def inertias(self) -> np.ndarray:
        """Slender-rod inertias about each segment CoM."""
        lengths = np.array([self.body_length, self.l1, self.l2, self.l3, self.l4])
        return self.masses * lengths**2 / 12.0

    @property
    def joint_torque_limit(self) -> float:
        return self.motors_per_joint * self.gear_ratio * self.motor_max_torque

    @property
    def joint_speed_limit(self) -> float:
        return self.motor_max_speed / self.gear_ratio

    def with_updates(self, **changes) -> "RobotParams":
        return replace(self, **changes)


PARAM_NAMES = tuple(f.name for f in fields(RobotParams))


@dataclass(frozen=True, eq=False)
class GeneralizedState:
    """Six coordinates and their rates; arrays are copied and frozen."""

    q: np.ndarray
    qd: np.ndarray = field(default=None)

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(NQ)
        qd = np.zeros(NQ) if self.qd is None else np.array(self.qd, dtype=float).reshape(NQ)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("state contains non-finite values")
        q.flags.writeable = False
        qd.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeneralizedState):
            return NotImplemented
        return bool(np.array_equal(self.q, other.q) and np.array_equal(self.qd, other.qd))

    __hash__ = None

    @classmethod
    def from_degrees(cls, x=0.0, y=0.0, pitch=10.0, hip=135.0, ankle=145.0, toe=25.0, qd=None):
        return cls(np.array([x, y, pitch * DEG, hip * DEG, ankle * DEG, toe * DEG]), qd)

    def absolute_angles(self, params: RobotParams) -> np.ndarray:
        return FRAME_MASK @ self.q[2:] + _frame_offsets(params)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qd])

    @classmethod
    def from_vector(cls, y) -> "GeneralizedState":
        return cls(y[:NQ], y[NQ : 2 * NQ])


def default_state() -> GeneralizedState:
    """Initial crouched posture of the take-off simulation."""
    return GeneralizedState.from_degrees()


def rot2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _frame_offsets(params: RobotParams) -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, params.theta3, params.theta3])


@functools.lru_cache(maxsize=64)
def _point_vectors(params: RobotParams) -> np.ndarray:
    """Frame-resolved vectors ``w[p, f]`` such that ``p = base + sum_f R_f w[p, f]``."""
    W = np.zeros((len(POINTS), 5, 2))

    def put(name, frame, vec):
        W[POINT_INDEX[name], frame] += vec

    p = params
    put("body_com", BODY, p.body_com)
    put("wing", BODY, p.wing_center)
    put("tail", BODY, p.tail_center)
    put("thrust", BODY, p.thrust_point)
    for name in ("ankle", "foot", "lower_com", "palm_com", "toe", "toe_com", "claw", "back_claw"):
        put(name, UPPER, (p.l1, 0.0))
    put("upper_com", UPPER, (p.l1 / 2, 0.0))
    for name in ("foot", "palm_com", "toe", "toe_com", "claw", "back_claw"):
        put(name, LOWER, (p.l2, 0.0))
    put("lower_com", LOWER, (p.l2 / 2, 0.0))
    put("palm_com", PALM, (p.l3 / 2, 0.0))
    put("back_claw", PALM, (-p.back_claw_length, 0.0))
    for name in ("toe", "toe_com", "claw"):
        put(name, PALM, (p.l3, 0.0))
    put("toe_com", TOE, (p.l4 / 2, 0.0))
    put("claw", TOE, (p.l4, 0.0))
    W.flags.writeable = False
    return W


@dataclass(frozen=True)
class Kinematics:
    """Positions, Jacobians and ``Jdot`` of every tracked point at one state.

    ``pos[i]`` is (2,), ``jac[i]`` is (2, 6), ``jdot[i]`` is (2, 6) and
    ``jdqd[i] = jdot[i] @ qd``.
    """

    state: GeneralizedState
    params: RobotParams
    pos: np.ndarray
    jac: np.ndarray
    jdot: np.ndarray
    jdqd: np.ndarray
    angles: np.ndarray
    rates: np.ndarray

    def position(self, name: str) -> np.ndarray:
        return self.pos[POINT_INDEX[name]]

    def jacobian(self, name: str) -> np.ndarray:
        return self.jac[POINT_INDEX[name]]

    def bias_accel(self, name: str) -> np.ndarray:
        return self.jdqd[POINT_INDEX[name]]

    def velocity(self, name: str) -> np.ndarray:
        return self.jac[POINT_INDEX[name]] @ self.state.qd

    @property
    def segment_jac(self) -> np.ndarray:
        return self.jac[_SEGMENT_POINTS]

    @property
    def segment_pos(self) -> np.ndarray:
        return self.pos[_SEGMENT_POINTS]

    @property
    def segment_jdot(self) -> np.ndarray:
        return self.jdot[_SEGMENT_POINTS]

    @property
    def segment_jdqd(self) -> np.ndarray:
        return self.jdqd[_SEGMENT_POINTS]


def kinematics(state: GeneralizedState, params: RobotParams) -> Kinematics:
    q, qd = state.q, state.qd
    W = _point_vectors(params)
    phi = FRAME_MASK @ q[2:] + _frame_offsets(params)
    phid = FRAME_MASK @ qd[2:]
    c, s = np.cos(phi), np.sin(phi)

    # RW[p, f] = R(phi_f) @ W[p, f]
    RW = np.empty_like(W)
    RW[..., 0] = c * W[..., 0] - s * W[..., 1]
    RW[..., 1] = s * W[..., 0] + c * W[..., 1]
    pos = q[:2] + RW.sum(axis=1)

    ERW = np.stack([-RW[..., 1], RW[..., 0]], axis=-1)
    n = len(POINTS)
    jac = np.zeros((n, 2, NQ))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    jac[:, :, 2:] = np.einsum("pfa,fj->paj", ERW, FRAME_MASK)

    jdot = np.zeros((n, 2, NQ))
    jdot[:, :, 2:] = np.einsum("pfa,f,fj->paj", -RW, phid, FRAME_MASK)
    jdqd = -np.einsum("pfa,f->pa", RW, phid**2)
    return Kinematics(state, params, pos, jac, jdot, jdqd, phi, phid)


def forward_kinematics(state: GeneralizedState, params: RobotParams) -> dict[str, np.ndarray]:
    """World positions of all tracked points (hip, ankle, toe, claw, segment CoMs, ...)."""
    kin = kinematics(state, params)
    return {name: kin.pos[i].copy() for i, name in enumerate(POINTS)}


def constraint_positions(state: GeneralizedState, params: RobotParams, mode: ContactMode) -> np.ndarray:
    """Stacked constraint points: ``[p_toe; p_claw]`` flat, ``p_claw`` on the tip."""
    return _constraint_stack(kinematics(state, params), mode)[0]


def constraint_jacobian(state: GeneralizedState, params: RobotParams, mode: ContactMode):
    """Return ``(J_c, Jdot_c)`` for the constraint points of ``mode``."""
    _, J, Jdot, _ = _constraint_stack(kinematics(state, params), mode)
    return J, Jdot


def _constraint_stack(kin: Kinematics, mode: ContactMode):
    if mode is ContactMode.FLAT_TOE:
        idx = [POINT_INDEX["toe"], POINT_INDEX["claw"]]
    elif mode is ContactMode.TOE_TIP:
        idx = [POINT_INDEX["claw"]]
    else:
        raise NoActiveConstraints("no active constraints in Airborne mode")
    return (
        kin.pos[idx].reshape(-1),
        kin.jac[idx].reshape(-1, NQ),
        kin.jdot[idx].reshape(-1, NQ),
        kin.jdqd[idx].reshape(-1),
    )


def com_position(state: GeneralizedState, params: RobotParams):
    """Whole-robot CoM position and velocity."""
    kin = kinematics(state, params)
    p, J, _ = com_terms(kin)
    return p, J @ state.qd


def com_terms(kin: Kinematics):
    """CoM position, Jacobian (2, 6) and ``Jdot qd`` (2,)."""
    m = kin.params.masses
    mt = m.sum()
    p = m @ kin.segment_pos / mt
    J = np.einsum("s,saj->aj", m, kin.segment_jac) / mt
    jdqd = m @ kin.segment_jdqd / mt
    return p, J, jdqd


@dataclass(frozen=True)
class TaskValue:
    """Current value, rate, Jacobian row and ``Jdot qd`` of one scalar task."""

    name: str
    x: float
    xd: float
    J: np.ndarray
    jdqd: float


def task_values(state: GeneralizedState, params: RobotParams, kin: Kinematics | None = None):
    """Pitch, CoM-horizontal and CoM-vertical tasks, in priority order."""
    kin = kin if kin is not None else kinematics(state, params)
    p, J, jdqd = com_terms(kin)
    e3 = np.zeros(NQ)
    e3[2] = 1.0
    v = J @ state.qd
    return (
        TaskValue("pitch", float(state.q[2]), float(state.qd[2]), e3, 0.0),
        TaskValue("horizontal", float(p[0]), float(v[0]), J[0], float(jdqd[0])),
        TaskValue("vertical", float(p[1]), float(v[1]), J[1], float(jdqd[1])),
    )
