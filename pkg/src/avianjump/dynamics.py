"""Equations of motion for stance (constrained) and flight.

Sign convention: the contact force returned by :func:`constrained_accel` is the
ground *reaction* acting on the robot, so a robot standing still carries a
positive vertical force equal to its weight::

    M qdd + C qd + g = S^T tau + f_ext + J_c^T f_c

The flat-toe constraint stack ``[p_toe; p_claw]`` has rank three (the toe
length is rigid), so the solve uses the independent rows
``(toe_x, toe_y, claw_y)``.  On the toe tip the toe joint sits on its
deflection stop, added as a joint-limit row when ``params.toe_stop`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    FRAME_MASK,
    NQ,
    POINT_INDEX,
    ContactMode,
    GeneralizedState,
    Kinematics,
    NoActiveConstraints,
    RobotParams,
    kinematics,
)

# Baumgarte default: gains (2w, w^2) with w = 100 1/s
BAUMGARTE_OMEGA = 100.0


class ConstraintDegeneracy(np.linalg.LinAlgError):
    """The constrained system matrix is singular or badly conditioned."""

    def __init__(self, cond: float):
        super().__init__(f"constraint degeneracy (condition number {cond:.3e})")
        self.cond = cond


def selection_matrix() -> np.ndarray:
    """Map ``tau = (hip, ankle)`` into rows q4 and q5."""
    S = np.zeros((2, NQ))
    S[0, 3] = 1.0
    S[1, 4] = 1.0
    return S


SELECTION = selection_matrix()
SELECTION.flags.writeable = False


@dataclass(frozen=True)
class DynamicsTerms:
    M: np.ndarray
    bias: np.ndarray
    S: np.ndarray = SELECTION


@dataclass(frozen=True)
class Actuation:
    """Non-leg inputs: propeller level in [0, 1] and control-surface deflections (rad)."""

    thrust: float = 0.0
    wing_deflection: float = 0.0
    tail_deflection: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.thrust <= 1.0:
            raise ValueError(f"thrust level must lie in [0, 1], got {self.thrust}")


@dataclass(frozen=True)
class ExternalForces:
    f_p: np.ndarray
    f_w: np.ndarray
    f_t: np.ndarray
    tau_a: float
    tau_t: float
    f_ext: np.ndarray


@dataclass(frozen=True)
class ContactForce:
    """Constraint multipliers and the net ground reaction ``(fx, fy)`` in N."""

    rows: np.ndarray
    net: np.ndarray

    @property
    def vertical(self) -> float:
        return float(self.net[1])


NO_CONTACT = ContactForce(np.zeros(0), np.zeros(2))


def mass_matrix(state: GeneralizedState, params: RobotParams, kin: Kinematics | None = None) -> np.ndarray:
    kin = kin if kin is not None else kinematics(state, params)
    return _mass_matrix(kin)


def _mass_matrix(kin: Kinematics) -> np.ndarray:
    p = kin.params
    J = kin.segment_jac
    M = np.einsum("s,sai,saj->ij", p.masses, J, J)
    # planar: angular velocity of a segment is the sum of the angle rates in its chain
    M[2:, 2:] += np.einsum("s,si,sj->ij", p.inertias, FRAME_MASK, FRAME_MASK)
    return M


def coriolis_matrix(state: GeneralizedState, params: RobotParams) -> np.ndarray:
    """``C = sum_i m_i J_i^T Jdot_i``; satisfies ``Mdot - 2C`` skew-symmetric."""
    kin = kinematics(state, params)
    return np.einsum("s,sai,saj->ij", params.masses, kin.segment_jac, kin.segment_jdot)


def gravity_vector(state: GeneralizedState, params: RobotParams, kin: Kinematics | None = None) -> np.ndarray:
    kin = kin if kin is not None else kinematics(state, params)
    return params.gravity * params.masses @ kin.segment_jac[:, 1, :]


def bias_forces(state: GeneralizedState, params: RobotParams, kin: Kinematics | None = None) -> np.ndarray:
    """``C(q, qd) qd + g(q)``."""
    kin = kin if kin is not None else kinematics(state, params)
    return _bias(kin)


def _bias(kin: Kinematics) -> np.ndarray:
    p = kin.params
    J = kin.segment_jac
    cqd = np.einsum("s,sai,sa->i", p.masses, J, kin.segment_jdqd)
    return cqd + p.gravity * p.masses @ J[:, 1, :]


def kinetic_energy(state: GeneralizedState, params: RobotParams) -> float:
    return 0.5 * float(state.qd @ mass_matrix(state, params) @ state.qd)


def potential_energy(state: GeneralizedState, params: RobotParams, springs: bool = True) -> float:
    kin = kinematics(state, params)
    V = params.gravity * float(params.masses @ kin.segment_pos[:, 1])
    if springs:
        V += spring_energy(state.q, params)
    return V


def spring_energy(q, params: RobotParams) -> float:
    """Elastic energy stored in the ankle and toe springs."""
    return 0.5 * params.k_ankle * (q[4] - params.ankle_rest) ** 2 + 0.5 * params.k_toe * (q[5] - params.toe_rest) ** 2


def mechanical_energy(state: GeneralizedState, params: RobotParams, springs: bool = True) -> float:
    return kinetic_energy(state, params) + potential_energy(state, params, springs)


def aero_coefficients(alpha: float, model: str = "flat_plate") -> tuple[float, float]:
    """Lift and drag coefficients at angle of attack ``alpha`` (rad)."""
    if model == "flat_plate":
        s, c = np.sin(alpha), np.cos(alpha)
        return 2.0 * s * c, 2.0 * s * s
    if model == "thin_airfoil_with_stall":
        stall = np.radians(15.0)
        if abs(alpha) <= stall:
            return 2.0 * np.pi * alpha, 0.02 + 2.0 * np.sin(alpha) ** 2
        return aero_coefficients(alpha, "flat_plate")
    if model == "none":
        return 0.0, 0.0
    raise ValueError(f"unknown aero model {model!r}")


def _surface_force(kin: Kinematics, point: str, area: float, incidence: float) -> np.ndarray:
    p = kin.params
    v = kin.velocity(point)
    speed = float(np.hypot(v[0], v[1]))
    if speed < 1e-9:
        return np.zeros(2)
    vhat = v / speed
    gamma = np.arctan2(v[1], v[0])
    alpha = (kin.state.q[2] + incidence - gamma + np.pi) % (2 * np.pi) - np.pi
    cl, cd = aero_coefficients(alpha, p.aero_model)
    qdyn = 0.5 * p.rho * speed * speed * area
    lift_dir = np.array([-vhat[1], vhat[0]])
    return qdyn * (cl * lift_dir - cd * vhat)


def external_forces(
    state: GeneralizedState,
    u: Actuation,
    params: RobotParams,
    mode: ContactMode = ContactMode.AIRBORNE,
    kin: Kinematics | None = None,
) -> ExternalForces:
    """Propeller, wing/tail aerodynamics and joint springs, projected onto q."""
    kin = kin if kin is not None else kinematics(state, params)
    q = state.q
    heading = q[2] + params.thrust_offset
    f_p = u.thrust * params.max_thrust * np.array([np.cos(heading), np.sin(heading)])

    aero_on = params.aero_model != "none" and (mode is ContactMode.AIRBORNE or params.aero_in_stance)
    if aero_on:
        f_w = _surface_force(kin, "wing", params.wing_area, params.wing_offset + u.wing_deflection)
        f_t = _surface_force(kin, "tail", params.tail_area, params.tail_offset + u.tail_deflection)
    else:
        f_w = np.zeros(2)
        f_t = np.zeros(2)

    tau_a = -params.k_ankle * (q[4] - params.ankle_rest)
    tau_t = -params.k_toe * (q[5] - params.toe_rest)

    f_ext = kin.jacobian("thrust").T @ f_p + kin.jacobian("wing").T @ f_w + kin.jacobian("tail").T @ f_t
    f_ext[4] += tau_a
    f_ext[5] += tau_t
    return ExternalForces(f_p, f_w, f_t, float(tau_a), float(tau_t), f_ext)


@dataclass(frozen=True)
class ActiveConstraints:
    """Independent constraint rows used in the stance solve."""

    J: np.ndarray
    jdqd: np.ndarray
    value: np.ndarray
    net_map: np.ndarray  # (2, rows): multipliers -> net ground reaction


def active_constraints(kin: Kinematics, mode: ContactMode) -> ActiveConstraints:
    if mode is ContactMode.FLAT_TOE:
        toe, claw = POINT_INDEX["toe"], POINT_INDEX["claw"]
        J = np.vstack([kin.jac[toe], kin.jac[claw][1]])
        jdqd = np.array([*kin.jdqd[toe], kin.jdqd[claw][1]])
        value = np.array([*kin.pos[toe], kin.pos[claw][1]])
        net_map = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
        return ActiveConstraints(J, jdqd, value, net_map)
    if mode is ContactMode.TOE_TIP:
        claw = POINT_INDEX["claw"]
        J = kin.jac[claw]
        jdqd = kin.jdqd[claw]
        value = kin.pos[claw]
        net_map = np.eye(2)
        if kin.params.toe_stop:
            e6 = np.zeros(NQ)
            e6[5] = 1.0
            J = np.vstack([J, e6])
            jdqd = np.append(jdqd, 0.0)
            value = np.append(value, kin.state.q[5])
            net_map = np.hstack([net_map, np.zeros((2, 1))])
        return ActiveConstraints(J, jdqd, value, net_map)
    raise NoActiveConstraints("no active constraints in Airborne mode")


def constraint_anchor(state: GeneralizedState, params: RobotParams, mode: ContactMode) -> np.ndarray:
    """Current values of the active rows; held fixed by Baumgarte feedback.

    The toe stop is anchored where it engages rather than at the nominal
    limit, so the event-location overshoot does not excite a correction.
    """
    return active_constraints(kinematics(state, params), mode).value.copy()


def _solve_constrained(M, rhs, ac: ActiveConstraints, qd, anchor, baumgarte):
    alpha, beta = baumgarte
    c = -ac.jdqd - alpha * (ac.J @ qd)
    if anchor is not None and beta:
        c = c - beta * (ac.value - anchor)
    sol = np.linalg.solve(M, np.column_stack([rhs, ac.J.T]))
    Minv_rhs, Minv_JT = sol[:, 0], sol[:, 1:]
    A = ac.J @ Minv_JT
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConstraintDegeneracy(cond)
    f = np.linalg.solve(A, c - ac.J @ Minv_rhs)
    qdd = Minv_rhs + Minv_JT @ f
    return qdd, f


def default_baumgarte(omega: float = BAUMGARTE_OMEGA) -> tuple[float, float]:
    return 2.0 * omega, omega * omega


def constrained_accel(
    state: GeneralizedState,
    tau,
    u: Actuation,
    params: RobotParams,
    mode: ContactMode,
    anchor: np.ndarray | None = None,
    baumgarte: tuple[float, float] | None = None,
    kin: Kinematics | None = None,
    ext: ExternalForces | None = None,
):
    """Stance accelerations and ground reaction from the KKT system.

    Args:
        tau: hip and ankle torques (N m).
        anchor: target values of the active constraint rows; with ``None`` the
            position feedback term is dropped.
        baumgarte: ``(alpha, beta)`` velocity/position gains; defaults to
            ``(2w, w^2)`` with ``w = 100``. Pass ``(0, 0)`` for the bare
            acceleration-level constraint.

    Returns:
        ``(qdd, ContactForce)``.
    """
    kin = kin if kin is not None else kinematics(state, params)
    baumgarte = default_baumgarte() if baumgarte is None else baumgarte
    M = _mass_matrix(kin)
    ext = ext if ext is not None else external_forces(state, u, params, mode, kin)
    rhs = SELECTION.T @ np.asarray(tau, dtype=float) + ext.f_ext - _bias(kin)
    ac = active_constraints(kin, mode)
    qdd, f = _solve_constrained(M, rhs, ac, state.qd, anchor, baumgarte)
    return qdd, ContactForce(f, ac.net_map @ f)


def flight_accel(
    state: GeneralizedState,
    tau,
    u: Actuation,
    params: RobotParams,
    kin: Kinematics | None = None,
) -> np.ndarray:
    """Unconstrained accelerations ``M^-1 (S^T tau + f_ext - bias)``."""
    kin = kin if kin is not None else kinematics(state, params)
    M = _mass_matrix(kin)
    ext = external_forces(state, u, params, ContactMode.AIRBORNE, kin)
    rhs = SELECTION.T @ np.asarray(tau, dtype=float) + ext.f_ext - _bias(kin)
    return np.linalg.solve(M, rhs)


def dynamics_terms(state: GeneralizedState, params: RobotParams, kin: Kinematics | None = None) -> DynamicsTerms:
    kin = kin if kin is not None else kinematics(state, params)
    return DynamicsTerms(_mass_matrix(kin), _bias(kin))
