"""Prioritized task-space control with QR-based torque extraction.

Task accelerations come from PD laws, are resolved in priority order through
damped-least-squares null-space projections, and are mapped to hip/ankle
torques in the subspace of the equations of motion that carries no contact
force.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SELECTION,
    Actuation,
    ExternalForces,
    _bias,
    _mass_matrix,
    active_constraints,
    default_baumgarte,
    external_forces,
)
from .model import (
    NQ,
    ContactMode,
    GeneralizedState,
    Kinematics,
    NoActiveConstraints,
    RobotParams,
    com_terms,
    kinematics,
    task_values,
)


class RankDeficiency(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Task:
    """One scalar (or stacked) task ``J qdd = b`` with a PD tracking law."""

    name: str
    priority: int
    J: np.ndarray
    x: float
    xd: float
    x_des: float = 0.0
    xd_des: float = 0.0
    xdd_ff: float = 0.0
    kp: float = 400.0
    kd: float = 40.0
    jdqd: float = 0.0

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("task gains must be non-negative")

    @property
    def b(self) -> np.ndarray:
        return np.atleast_1d(task_pd(self) - self.jdqd)


@dataclass(frozen=True)
class EqualityTask:
    """A task given directly as ``J qdd = b`` (e.g. the contact constraint)."""

    name: str
    J: np.ndarray
    b: np.ndarray


def task_pd(task: Task) -> float:
    """Desired task acceleration ``kp (x_d - x) + kd (xd_d - xd)`` plus feedforward."""
    return task.kp * (task.x_des - task.x) + task.kd * (task.xd_des - task.xd) + task.xdd_ff


def damped_pinv(A, lam: float) -> np.ndarray:
    """``A^T (lam I + A A^T)^-1``."""
    if lam < 0:
        raise ValueError("damping must be non-negative")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    AAT = A @ A.T
    G = AAT + lam * np.eye(A.shape[0])
    if lam == 0.0 and np.linalg.matrix_rank(AAT) < A.shape[0]:
        raise RankDeficiency("rank deficiency requires damping")
    return np.linalg.solve(G, A).T


def nullspace(JA, lam: float = 1e-6) -> np.ndarray:
    JA = np.atleast_2d(np.asarray(JA, dtype=float))
    k = JA.shape[1]
    return np.eye(k) - damped_pinv(JA, lam) @ JA


def prioritized_accel(tasks, lam: float = 1e-6, n: int = NQ) -> np.ndarray:
    """Resolve ordered tasks; lower-priority ones act in higher ones' null space.

    ``qdd_i = qdd_{i-1} + N_{i-1} (J_i N_{i-1})^+ (b_i - J_i qdd_{i-1})`` with
    ``qdd_0 = 0`` and ``N_0 = I``.
    """
    qdd = np.zeros(n)
    N = np.eye(n)
    stacked = []
    tasks = list(tasks)
    for i, task in enumerate(tasks):
        J = np.atleast_2d(task.J)
        b = np.atleast_1d(task.b)
        JN = J @ N
        qdd = qdd + N @ damped_pinv(JN, lam) @ (b - J @ qdd)
        if i + 1 < len(tasks):
            stacked.append(J)
            N = nullspace(np.vstack(stacked), lam)
    return qdd


def _unconstrained_basis(Jc: np.ndarray, method: str = "numpy") -> np.ndarray:
    """Rows of ``Q^T`` spanning the complement of ``range(J_c^T)``; i.e. ``S_u Q^T``."""
    r = Jc.shape[0]
    if method == "numpy":
        Q, R = np.linalg.qr(Jc.T, mode="complete")
    elif method == "gram_schmidt":
        Q, R = _gram_schmidt_qr(Jc.T)
    else:
        raise ValueError(f"unknown QR method {method!r}")
    d = np.abs(np.diag(R[:r, :r]))
    if d.min() <= 1e-10 * max(d.max(), 1.0):
        raise RankDeficiency("constraint Jacobian rank deficient")
    return Q[:, r:].T


def _gram_schmidt_qr(A: np.ndarray):
    """Complete QR by modified Gram-Schmidt, padded with the standard basis."""
    m, r = A.shape
    basis = []
    R = np.zeros((m, r))
    for j in range(r):
        v = A[:, j].copy()
        for i, qi in enumerate(basis):
            R[i, j] = qi @ v
            v -= R[i, j] * qi
        R[j, j] = np.linalg.norm(v)
        basis.append(v / R[j, j] if R[j, j] > 0 else v)
    for e in np.eye(m):
        v = e.copy()
        for qi in basis:
            v -= (qi @ v) * qi
        nv = np.linalg.norm(v)
        if nv > 1e-8 and len(basis) < m:
            basis.append(v / nv)
    return np.column_stack(basis), R


def torque_extraction(
    qdd_des,
    state: GeneralizedState,
    params: RobotParams,
    mode: ContactMode,
    f_ext=None,
    lam: float = 0.0,
    qr: str = "numpy",
    kin: Kinematics | None = None,
) -> np.ndarray:
    """Hip and ankle torques realising ``qdd_des`` under the foot constraint.

    ``tau = (S_u Q^T S^T)^+ S_u Q^T (M qdd + C qd + g - f_ext)``. Omitting
    ``f_ext`` reproduces the plain form that ignores springs, thrust and
    aerodynamics.
    """
    if mode is ContactMode.AIRBORNE:
        raise NoActiveConstraints("torque extraction needs an active foot constraint")
    kin = kin if kin is not None else kinematics(state, params)
    M = _mass_matrix(kin)
    rhs = M @ np.asarray(qdd_des, dtype=float) + _bias(kin)
    if f_ext is not None:
        rhs = rhs - f_ext
    P = _unconstrained_basis(active_constraints(kin, mode).J, qr)
    A = P @ SELECTION.T
    if lam > 0:
        return damped_pinv(A, lam) @ (P @ rhs)
    return np.linalg.pinv(A, rcond=1e-12) @ (P @ rhs)


@dataclass(frozen=True)
class TakeoffReference:
    """CoM ramp from rest to the take-off speed, then a release phase.

    The release phase asks for a CoM acceleration below free fall so the
    required ground reaction turns negative as soon as the ramp ends.
    """

    com0: tuple[float, float]
    direction: tuple[float, float]
    accel: float
    v_takeoff: float
    pitch: float
    release_decel: float = 5.0
    gravity: float = 9.81

    @property
    def ramp_time(self) -> float:
        return self.v_takeoff / self.accel

    def com(self, t: float):
        """Desired CoM position, velocity and acceleration at time ``t``."""
        d = np.asarray(self.direction)
        p0 = np.asarray(self.com0)
        T = self.ramp_time
        if t <= T:
            return p0 + 0.5 * self.accel * t * t * d, self.accel * t * d, self.accel * d
        tau = t - T
        pT = p0 + 0.5 * self.accel * T * T * d
        vT = self.v_takeoff * d
        a = np.array([0.0, -self.gravity - self.release_decel])
        return pT + vT * tau + 0.5 * a * tau * tau, vT + a * tau, a


@dataclass(frozen=True)
class ControlConfig:
    lam: float = 1e-6
    priority: tuple[str, ...] = ("pitch", "horizontal", "vertical")
    gains: dict = field(
        default_factory=lambda: {"pitch": (400.0, 40.0), "horizontal": (400.0, 40.0), "vertical": (400.0, 40.0)}
    )
    v_takeoff: float = 2.5
    push_time: float = 0.18
    jump_angle: float | None = float(np.radians(76.0))
    release_decel: float = 5.0
    constraint_task: bool = True
    compensate_external: bool = True
    saturate: bool = True
    torque_speed: bool = True
    hold_gains: tuple[float, float] = (150.0**2, 2 * 150.0)
    flight_hold: bool = True  # False leaves the joints unactuated in flight
    strategy: str = "task"
    effort: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.v_takeoff <= 0 or self.push_time <= 0:
            raise ValueError("v_takeoff and push_time must be positive")
        if self.strategy not in ("task", "max_effort"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.effort <= 1.0:
            raise ValueError("effort must lie in [0, 1]")
        if sorted(self.priority) != ["horizontal", "pitch", "vertical"]:
            raise ValueError(f"priority must order pitch/horizontal/vertical, got {self.priority}")


def make_reference(state: GeneralizedState, params: RobotParams, cfg: ControlConfig, mode=ContactMode.FLAT_TOE):
    """Reference leaving from the current CoM along the leg-extension direction."""
    kin = kinematics(state, params)
    com, _, _ = com_terms(kin)
    pivot = kin.position("toe" if mode is ContactMode.FLAT_TOE else "claw")
    if cfg.jump_angle is None:
        d = com - pivot
        d = d / np.linalg.norm(d)
    else:
        d = np.array([np.cos(cfg.jump_angle), np.sin(cfg.jump_angle)])
    return TakeoffReference(
        com0=tuple(com),
        direction=tuple(d),
        accel=cfg.v_takeoff / cfg.push_time,
        v_takeoff=cfg.v_takeoff,
        pitch=float(state.q[2]),
        release_decel=cfg.release_decel,
        gravity=params.gravity,
    )


def build_tasks(state, params, cfg: ControlConfig, ref: TakeoffReference, t: float, kin=None):
    kin = kin if kin is not None else kinematics(state, params)
    values = {tv.name: tv for tv in task_values(state, params, kin)}
    p_d, v_d, a_d = ref.com(t)
    targets = {
        "pitch": (ref.pitch, 0.0, 0.0),
        "horizontal": (p_d[0], v_d[0], a_d[0]),
        "vertical": (p_d[1], v_d[1], a_d[1]),
    }
    tasks = []
    for i, name in enumerate(cfg.priority, start=1):
        tv = values[name]
        kp, kd = cfg.gains[name]
        x_des, xd_des, xdd_ff = targets[name]
        tasks.append(Task(name, i, tv.J, tv.x, tv.xd, x_des, xd_des, xdd_ff, kp, kd, tv.jdqd))
    return tasks


def saturate(tau, params: RobotParams, qd_joint=None) -> np.ndarray:
    """Clip joint torques to the actuator envelope.

    With ``qd_joint`` given, a DC-motor torque-speed line is applied: torque
    that drives the joint in its direction of motion falls linearly to zero
    at the no-load joint speed. Braking torque keeps the stall limit.
    """
    lim = np.full(2, params.joint_torque_limit)
    if qd_joint is None:
        return np.clip(tau, -lim, lim)
    w = np.asarray(qd_joint, dtype=float)
    droop = np.clip(1.0 - np.abs(w) / params.joint_speed_limit, 0.0, 1.0)
    hi = np.where(w > 0, lim * droop, lim)
    lo = np.where(w < 0, -lim * droop, -lim)
    return np.clip(tau, lo, hi)


def max_effort_torques(state: GeneralizedState, params: RobotParams, effort: float = 1.0) -> np.ndarray:
    """Open-loop full-power push: hip opens, ankle extends, both on the motor envelope."""
    demand = effort * params.joint_torque_limit * np.array([1.0, -1.0])
    return saturate(demand, params, state.qd[3:5])


def takeoff_controller(
    state: GeneralizedState,
    params: RobotParams,
    cfg: ControlConfig,
    ref: TakeoffReference,
    t: float,
    mode: ContactMode,
    u: Actuation = Actuation(),
    anchor=None,
    kin: Kinematics | None = None,
    ext: ExternalForces | None = None,
) -> np.ndarray:
    """Stance torques: task PD -> prioritized accelerations -> QR extraction.

    ``ext`` may carry precomputed external forces for this state and input.
    """
    if cfg.strategy == "max_effort":
        return max_effort_torques(state, params, cfg.effort)
    kin = kin if kin is not None else kinematics(state, params)
    tasks = build_tasks(state, params, cfg, ref, t, kin)
    if cfg.constraint_task:
        ac = active_constraints(kin, mode)
        alpha, beta = default_baumgarte()
        b = -ac.jdqd - alpha * (ac.J @ state.qd)
        if anchor is not None:
            b = b - beta * (ac.value - anchor)
        tasks = [EqualityTask("contact", ac.J, b), *tasks]
    f_ext = None
    if cfg.compensate_external:
        f_ext = (ext if ext is not None else external_forces(state, u, params, mode, kin)).f_ext
    qdd_des = prioritized_accel(tasks, cfg.lam)
    tau = torque_extraction(qdd_des, state, params, mode, f_ext, kin=kin)
    if not cfg.saturate:
        return tau
    return saturate(tau, params, state.qd[3:5] if cfg.torque_speed else None)


def hold_torques(
    state: GeneralizedState,
    params: RobotParams,
    hold: np.ndarray,
    gains: tuple[float, float],
    u: Actuation = Actuation(),
    kin: Kinematics | None = None,
) -> np.ndarray:
    """Computed-torque joint hold for flight: drive hip/ankle to ``hold`` with PD."""
    kin = kin if kin is not None else kinematics(state, params)
    r = external_forces(state, u, params, ContactMode.AIRBORNE, kin).f_ext - _bias(kin)
    return hold_solution(kin, r, hold, gains)[0]


def hold_solution(kin: Kinematics, r: np.ndarray, hold, gains: tuple[float, float]):
    """Hold torques and the resulting flight accelerations for ``M qdd = S^T tau + r``."""
    kp, kd = gains
    q, qd = kin.state.q, kin.state.qd
    a_des = kp * (np.asarray(hold) - q[3:5]) - kd * qd[3:5]
    X = np.linalg.solve(_mass_matrix(kin), np.column_stack([SELECTION.T, r]))
    Minv_ST, Minv_r = X[:, :2], X[:, 2]
    tau = np.linalg.solve(SELECTION @ Minv_ST, a_des - SELECTION @ Minv_r)
    return tau, Minv_r + Minv_ST @ tau
