"""Hybrid simulation of the jumping take-off and the following flight.

Stance runs in FlatToe and then ToeTip contact under the task-space
controller. The robot switches to flight when the ground reaction stops
pushing, after which the leg joints are held. Integration is fixed-step RK4
with the controller evaluated at every stage. Events are located by
bisection on the step length and the integrator re-aligns to the step grid
afterwards, so logs sample a fixed 1 kHz grid.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.integrate import solve_ivp

from .control import ControlConfig, TakeoffReference, hold_solution, make_reference, takeoff_controller
from .dynamics import (
    NO_CONTACT,
    Actuation,
    ContactForce,
    _bias,
    _mass_matrix,
    active_constraints,
    constrained_accel,
    constraint_anchor,
    spring_energy,
    external_forces,
)
from .model import (
    NQ,
    PARAM_NAMES,
    POINT_INDEX,
    ContactMode,
    GeneralizedState,
    RobotParams,
    com_terms,
    default_state,
    kinematics,
)

LOG_PERIOD = 1e-3
NY = 2 * NQ + 1  # q, qd and the accumulated actuator work


class IntegrationDiverged(FloatingPointError):
    """Raised when the state stops being finite; carries the last good state."""

    def __init__(self, t: float, last_good: GeneralizedState):
        super().__init__(f"integration diverged at t={t:.6f} s")
        self.t = t
        self.last_good = last_good


class EventKind(enum.Enum):
    TOE_SATURATION = "ToeSaturation"
    TAKEOFF = "TakeOff"
    TOUCHDOWN = "Touchdown"
    STOP = "Stop"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    state: GeneralizedState | None = None


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one take-off run.

    ``thrust_schedule`` holds ``(time, level)`` breakpoints interpolated
    linearly during stance. ``flight_thrust`` replaces the schedule once the
    robot is airborne (``None`` keeps the schedule).
    """

    state0: GeneralizedState = field(default_factory=default_state)
    params: RobotParams = field(default_factory=RobotParams)
    control: ControlConfig = field(default_factory=ControlConfig)
    thrust_schedule: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    flight_thrust: float | None = 0.9
    duration: float = 0.4
    flight_duration: float = 1.0
    dt: float = 2e-4
    event_tol: float = 1e-6
    ankle_spring: bool = True
    toe_spring: bool = True
    integrator: str = "rk4"
    rtol: float = 1e-8
    atol: float = 1e-10
    initial_mode: str = "FlatToe"
    ground: float | None = None  # None: claw height at the start (stance starts only)

    def __post_init__(self):
        if self.duration <= 0 or self.flight_duration < 0:
            raise ValueError("duration must be positive")
        if not 0.0 < self.dt <= 5e-3:
            raise ValueError(f"step size must lie in (0, 5e-3] s, got {self.dt}")
        if self.event_tol <= 0:
            raise ValueError("event_tol must be positive")
        ContactMode(self.initial_mode)
        if self.integrator not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.thrust_schedule:
            raise ValueError("thrust_schedule needs at least one breakpoint")
        times = [t for t, _ in self.thrust_schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("thrust_schedule times must be strictly increasing")
        for _, level in self.thrust_schedule:
            if not 0.0 <= level <= 1.0:
                raise ValueError("thrust levels must lie in [0, 1]")
        if self.flight_thrust is not None and not 0.0 <= self.flight_thrust <= 1.0:
            raise ValueError("flight_thrust must lie in [0, 1]")

    @property
    def effective_params(self) -> RobotParams:
        changes = {}
        if not self.ankle_spring:
            changes["k_ankle"] = 0.0
        if not self.toe_spring:
            changes["k_toe"] = 0.0
        return self.params.with_updates(**changes) if changes else self.params

    def thrust(self, t: float, airborne: bool) -> float:
        if airborne and self.flight_thrust is not None:
            return self.flight_thrust
        times, levels = zip(*self.thrust_schedule)
        return float(np.interp(t, times, levels))

    def with_updates(self, **changes) -> "Scenario":
        """Replace scenario, parameter or controller fields by name."""
        own = {f.name for f in fields(Scenario)}
        ctrl = {f.name for f in fields(ControlConfig)}
        scen, par, con = {}, {}, {}
        for key, value in changes.items():
            if key in own:
                scen[key] = value
            elif key in PARAM_NAMES:
                par[key] = value
            elif key in ctrl:
                con[key] = value
            else:
                raise KeyError(f"unknown scenario field {key!r}")
        out = replace(self, **scen)
        if par:
            out = replace(out, params=out.params.with_updates(**par))
        if con:
            out = replace(out, control=replace(out.control, **con))
        return out


@dataclass(frozen=True)
class Phase:
    """Active contact mode plus what the controller needs for it."""

    mode: ContactMode
    anchor: np.ndarray | None = None
    hold: np.ndarray | None = None

    @property
    def airborne(self) -> bool:
        return self.mode is ContactMode.AIRBORNE


@dataclass(frozen=True)
class Diagnostics:
    qdd: np.ndarray
    tau: np.ndarray
    contact: ContactForce
    contact_power: float


@dataclass
class TrajectoryLog:
    """Uniformly sampled run record plus events and step-resolution peaks."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    fc: np.ndarray
    mode: list[str]
    com: np.ndarray
    vcom: np.ndarray
    p_mech: np.ndarray
    e_mech: np.ndarray
    p_contact: np.ndarray
    events: list[Event]
    peak_joint_speed: float = 0.0  # rad/s over hip and ankle, stance only
    peak_torque: float = 0.0  # N m, stance only
    final: np.ndarray | None = None  # integrator state at the end of the run
    final_phase: Phase | None = None

    def __len__(self) -> int:
        return len(self.t)

    def event(self, kind: EventKind) -> Event | None:
        return next((e for e in self.events if e.kind is kind), None)


@dataclass(frozen=True)
class TakeoffSummary:
    takeoff_speed: float
    takeoff_time: float
    takeoff_pitch: float
    takeoff_pitch_rate: float
    takeoff_velocity: tuple[float, float]
    takeoff_height: float
    peak_joint_speed: float
    peak_torque: float
    e_mech: float

    @property
    def peak_joint_speed_deg(self) -> float:
        return math.degrees(self.peak_joint_speed)

    def as_dict(self) -> dict:
        return {
            "takeoff_speed": self.takeoff_speed,
            "takeoff_time": self.takeoff_time,
            "takeoff_pitch_deg": math.degrees(self.takeoff_pitch),
            "takeoff_pitch_rate": self.takeoff_pitch_rate,
            "takeoff_vx": self.takeoff_velocity[0],
            "takeoff_vy": self.takeoff_velocity[1],
            "takeoff_height": self.takeoff_height,
            "peak_joint_speed_deg": self.peak_joint_speed_deg,
            "peak_torque": self.peak_torque,
            "e_mech": self.e_mech,
        }


def _state(y) -> GeneralizedState:
    return GeneralizedState(y[:NQ], y[NQ : 2 * NQ])


def _impact(state: GeneralizedState, params: RobotParams, mode: ContactMode) -> GeneralizedState:
    """Inelastic velocity projection onto the new constraint set."""
    kin = kinematics(state, params)
    J = active_constraints(kin, mode).J
    M = _mass_matrix(kin)
    MiJT = np.linalg.solve(M, J.T)
    qd = state.qd - MiJT @ np.linalg.solve(J @ MiJT, J @ state.qd)
    return GeneralizedState(state.q, qd)


def detect_events(
    state: GeneralizedState,
    qdd,
    fc: ContactForce,
    mode: ContactMode,
    params: RobotParams,
    t: float | None = None,
    duration: float | None = None,
    ground: float | None = None,
) -> Event | None:
    """Threshold checks applied to one sample, in order of precedence.

    ``qdd`` is accepted for signature symmetry with the integrator's
    diagnostics; no current rule depends on it.
    """
    if mode is ContactMode.FLAT_TOE and state.q[5] > params.toe_deflection_max:
        return Event(EventKind.TOE_SATURATION, t if t is not None else math.nan, state)
    if mode is not ContactMode.AIRBORNE and fc.vertical <= 0.0:
        return Event(EventKind.TAKEOFF, t if t is not None else math.nan, state)
    if mode is ContactMode.AIRBORNE and ground is not None and _foot_clearance(state, params, ground) <= 0.0:
        return Event(EventKind.TOUCHDOWN, t if t is not None else math.nan, state)
    if t is not None and duration is not None and t >= duration:
        return Event(EventKind.STOP, t, state)
    return None


def _foot_clearance(state: GeneralizedState, params: RobotParams, ground: float) -> float:
    kin = kinematics(state, params)
    return float(min(kin.pos[POINT_INDEX["toe"]][1], kin.pos[POINT_INDEX["claw"]][1]) - ground)


class HybridSimulator:
    """Integrates one scenario; owns its reference and bookkeeping."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.params = scenario.effective_params
        s0 = scenario.state0
        self.mode0 = ContactMode(scenario.initial_mode)
        pivot = ContactMode.FLAT_TOE if self.mode0 is ContactMode.AIRBORNE else self.mode0
        self.ref: TakeoffReference = make_reference(s0, self.params, scenario.control, pivot)
        self.ground = scenario.ground
        if self.ground is None and self.mode0 is not ContactMode.AIRBORNE:
            self.ground = float(kinematics(s0, self.params).pos[POINT_INDEX["claw"]][1])
        self._last = None

    def initial_phase(self) -> Phase:
        s0 = self.scenario.state0
        if self.mode0 is ContactMode.AIRBORNE:
            return Phase(ContactMode.AIRBORNE, hold=s0.q[3:5].copy())
        return Phase(self.mode0, constraint_anchor(s0, self.params, self.mode0))

    # -- continuous dynamics -------------------------------------------------

    def evaluate(self, t: float, y: np.ndarray, phase: Phase) -> tuple[np.ndarray, Diagnostics]:
        key = (t, y.tobytes())
        if self._last is not None and self._last[0] == key and self._last[1] is phase:
            return self._last[2]
        out = self._evaluate(t, y, phase)
        self._last = (key, phase, out)
        return out

    def _evaluate(self, t: float, y: np.ndarray, phase: Phase) -> tuple[np.ndarray, Diagnostics]:
        st = _state(y)
        p = self.params
        kin = kinematics(st, p)
        u = Actuation(thrust=self.scenario.thrust(t, phase.airborne))
        if phase.airborne:
            r = external_forces(st, u, p, phase.mode, kin).f_ext - _bias(kin)
            if self.scenario.control.flight_hold:
                tau, qdd = hold_solution(kin, r, phase.hold, self.scenario.control.hold_gains)
            else:
                tau, qdd = np.zeros(2), np.linalg.solve(_mass_matrix(kin), r)
            fc, p_c = NO_CONTACT, 0.0
        else:
            ext = external_forces(st, u, p, phase.mode, kin)
            tau = takeoff_controller(st, p, self.scenario.control, self.ref, t, phase.mode, u, phase.anchor, kin, ext)
            qdd, fc = constrained_accel(st, tau, u, p, phase.mode, phase.anchor, kin=kin, ext=ext)
            J = active_constraints(kin, phase.mode).J
            p_c = float(st.qd @ J.T @ fc.rows)
        power = float(np.abs(tau * st.qd[3:5]).sum())
        dy = np.concatenate([st.qd, qdd, [power]])
        return dy, Diagnostics(qdd, np.asarray(tau, dtype=float), fc, p_c)

    def rhs(self, t: float, y: np.ndarray, phase: Phase) -> np.ndarray:
        return self.evaluate(t, y, phase)[0]

    def rk4(self, t: float, y: np.ndarray, phase: Phase, h: float, k1=None) -> np.ndarray:
        k1 = self.rhs(t, y, phase) if k1 is None else k1
        k2 = self.rhs(t + h / 2, y + h / 2 * k1, phase)
        k3 = self.rhs(t + h / 2, y + h / 2 * k2, phase)
        k4 = self.rhs(t + h, y + h * k3, phase)
        return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    # -- events ----------------------------------------------------------------

    def event_residuals(self, t: float, y: np.ndarray, phase: Phase) -> dict[EventKind, float]:
        """Signed functions that are positive before their event and <= 0 after."""
        st = _state(y)
        out = {}
        if phase.mode is ContactMode.FLAT_TOE:
            out[EventKind.TOE_SATURATION] = self.params.toe_deflection_max - st.q[5]
        if phase.airborne:
            if self.ground is not None:
                out[EventKind.TOUCHDOWN] = _foot_clearance(st, self.params, self.ground)
        else:
            out[EventKind.TAKEOFF] = self.evaluate(t, y, phase)[1].contact.vertical
        return out

    def switch(self, kind: EventKind, t: float, y: np.ndarray, phase: Phase) -> tuple[np.ndarray, Phase]:
        st = _state(y)
        if kind is EventKind.TOE_SATURATION:
            mode = ContactMode.TOE_TIP
            if self.params.toe_stop:
                st = _impact(st, self.params, mode)
            y = np.concatenate([st.q, st.qd, y[-1:]])
            return y, Phase(mode, constraint_anchor(st, self.params, mode))
        if kind is EventKind.TAKEOFF:
            return y, Phase(ContactMode.AIRBORNE, hold=st.q[3:5].copy())
        return y, phase

    def _locate(self, t0, y0, phase, h, k1, kind) -> float:
        """Bisect the step length until the crossing is bracketed to ``event_tol``."""
        lo, hi = 0.0, h
        while hi - lo > self.scenario.event_tol:
            mid = 0.5 * (lo + hi)
            ym = self.rk4(t0, y0, phase, mid, k1)
            if self.event_residuals(t0 + mid, ym, phase)[kind] <= 0.0:
                hi = mid
            else:
                lo = mid
        return hi

    def step(self, t: float, y: np.ndarray, phase: Phase, t_end: float):
        """Advance to ``t_end``, resolving any events inside the step.

        Returns ``(segments, y_end, phase_end, events)`` where ``segments``
        lists ``(ta, ya, tb, yb, phase)`` pieces used for log sampling.
        """
        events: list[Event] = []
        segments = []
        g_start = self.event_residuals(t, y, phase)
        while True:
            rem = t_end - t
            if rem <= 1e-15:
                return segments, y, phase, events
            k1 = self.rhs(t, y, phase)
            y1 = self.rk4(t, y, phase, rem, k1)
            if not np.all(np.isfinite(y1)):
                raise IntegrationDiverged(t, _state(y))
            g1 = self.event_residuals(t_end, y1, phase)
            crossed = [k for k, v in g1.items() if v <= 0.0 and g_start.get(k, 1.0) > 0.0]
            if not crossed:
                segments.append((t, y, t_end, y1, phase))
                return segments, y1, phase, events
            hits = sorted((self._locate(t, y, phase, rem, k1, k), k.value, k) for k in crossed)
            he, _, kind = hits[0]
            ye = self.rk4(t, y, phase, he, k1)
            te = t + he
            segments.append((t, y, te, ye, phase))
            events.append(Event(kind, te, _state(ye)))
            y, phase = self.switch(kind, te, ye, phase)
            t = te
            if kind is EventKind.TOUCHDOWN:
                return segments, y, phase, events
            g_start = self.event_residuals(t, y, phase)

    # -- driver ---------------------------------------------------------------

    def run(self, t_stop: float, y0=None, phase: Phase | None = None, t0: float = 0.0, log=None) -> TrajectoryLog:
        y = np.concatenate([self.scenario.state0.as_vector(), [0.0]]) if y0 is None else np.array(y0, dtype=float)
        phase = self.initial_phase() if phase is None else phase
        log = _LogBuilder(self, t0) if log is None else log
        if self.scenario.integrator == "rk45":
            return self._run_adaptive(t_stop, y, phase, t0, log)
        dt = self.scenario.dt
        n0 = int(round(t0 / dt))
        n_stop = int(math.ceil(t_stop / dt - 1e-9))
        t = t0
        for n in range(n0, n_stop):
            t_next = min((n + 1) * dt, t_stop)
            segments, y, phase, events = self.step(t, y, phase, t_next)
            log.add_segments(segments)
            log.events.extend(events)
            t = t_next
            if not phase.airborne:
                log.track(y)
            if any(e.kind is EventKind.TOUCHDOWN for e in events):
                t = events[-1].time
                break
        else:
            log.events.append(Event(EventKind.STOP, t, _state(y)))
        return log.finish(y, phase)

    def _run_adaptive(self, t_stop, y, phase, t, log) -> TrajectoryLog:
        """Event-aware RK45 alternative; phases are integrated one at a time."""
        sc = self.scenario
        while t < t_stop:
            kinds = list(self.event_residuals(t, y, phase))
            current = phase

            def make(kind):
                def g(tt, yy):
                    return self.event_residuals(tt, yy, current)[kind]

                g.terminal = True
                g.direction = -1
                return g

            sol = solve_ivp(
                lambda tt, yy: self.rhs(tt, yy, current),
                (t, t_stop),
                y,
                method="RK45",
                rtol=sc.rtol,
                atol=sc.atol,
                events=[make(k) for k in kinds],
                dense_output=True,
                max_step=sc.dt * 10,
            )
            if not sol.success:
                raise IntegrationDiverged(t, _state(y))
            log.add_dense(t, sol.t[-1], sol.sol, current)
            if not current.airborne:
                for yy in sol.y.T:
                    log.track(yy)
            hit = [(te[0], k) for te, k in zip(sol.t_events, kinds) if len(te)]
            y = sol.y[:, -1]
            t = float(sol.t[-1])
            if not hit:
                break
            te, kind = min(hit, key=lambda e: e[0])
            log.events.append(Event(kind, te, _state(y)))
            y, phase = self.switch(kind, te, y, current)
            if kind is EventKind.TOUCHDOWN:
                break
        if not log.events or log.events[-1].kind is not EventKind.TOUCHDOWN:
            log.events.append(Event(EventKind.STOP, t, _state(y)))
        return log.finish(y, phase)


class _LogBuilder:
    def __init__(self, sim: HybridSimulator, t0: float = 0.0, base: TrajectoryLog | None = None):
        self.sim = sim
        self.rows: list[tuple] = []
        self.events: list[Event] = [] if base is None else list(base.events)
        self.next_index = int(math.floor(t0 / LOG_PERIOD + 1e-9))
        if base is not None and len(base.t):
            self.next_index = int(round(base.t[-1] / LOG_PERIOD)) + 1
        self.peak_speed = 0.0 if base is None else base.peak_joint_speed
        self.peak_torque = 0.0 if base is None else base.peak_torque
        self.base = base

    def _sample_time(self) -> float:
        return self.next_index * LOG_PERIOD

    def _record(self, ts: float, ys: np.ndarray, phase: Phase):
        dy, diag = self.sim.evaluate(ts, ys, phase)
        if not phase.airborne:
            self.peak_torque = max(self.peak_torque, float(np.abs(diag.tau).max()))
        self.rows.append((ts, ys, diag, phase.mode, dy[-1]))
        self.next_index += 1

    def add_segments(self, segments):
        for ta, ya, tb, yb, phase in segments:
            fa = fb = None
            while self._sample_time() <= tb + 1e-12 and self._sample_time() >= ta - 1e-12:
                ts = self._sample_time()
                if abs(ts - tb) < 1e-12:
                    ys = yb
                elif abs(ts - ta) < 1e-12:
                    ys = ya
                else:
                    fa = self.sim.rhs(ta, ya, phase) if fa is None else fa
                    fb = self.sim.rhs(tb, yb, phase) if fb is None else fb
                    ys = _hermite(ta, ya, fa, tb, yb, fb, ts)
                self._record(ts, ys, phase)

    def add_dense(self, ta, tb, dense, phase):
        while ta - 1e-12 <= self._sample_time() <= tb + 1e-12:
            ts = self._sample_time()
            self._record(ts, dense(min(ts, tb)), phase)

    def track(self, y):
        self.peak_speed = max(self.peak_speed, float(np.abs(y[3 + NQ : 5 + NQ]).max()))

    def finish(self, y, phase) -> TrajectoryLog:
        p = self.sim.params
        n = len(self.rows)
        t = np.array([r[0] for r in self.rows])
        Y = np.array([r[1] for r in self.rows]).reshape(n, NY)
        com = np.zeros((n, 2))
        vcom = np.zeros((n, 2))
        for i, yy in enumerate(Y):
            c, J, _ = com_terms(kinematics(_state(yy), p))
            com[i] = c
            vcom[i] = J @ yy[NQ : 2 * NQ]
        new = TrajectoryLog(
            t=t,
            q=Y[:, :NQ],
            qd=Y[:, NQ : 2 * NQ],
            qdd=np.array([r[2].qdd for r in self.rows]).reshape(n, NQ),
            tau=np.array([r[2].tau for r in self.rows]).reshape(n, 2),
            fc=np.array([r[2].contact.net for r in self.rows]).reshape(n, 2),
            mode=[r[3].value for r in self.rows],
            com=com,
            vcom=vcom,
            p_mech=np.array([r[4] for r in self.rows]),
            e_mech=Y[:, -1],
            p_contact=np.array([r[2].contact_power for r in self.rows]),
            events=self.events,
            peak_joint_speed=self.peak_speed,
            peak_torque=self.peak_torque,
            final=np.array(y, dtype=float),
            final_phase=phase,
        )
        return new if self.base is None else _concat(self.base, new)


def _hermite(ta, ya, fa, tb, yb, fb, ts):
    h = tb - ta
    s = (ts - ta) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb


def _concat(a: TrajectoryLog, b: TrajectoryLog) -> TrajectoryLog:
    cat = lambda x, y: np.concatenate([x, y]) if len(y) else x  # noqa: E731
    return TrajectoryLog(
        t=cat(a.t, b.t),
        q=cat(a.q, b.q),
        qd=cat(a.qd, b.qd),
        qdd=cat(a.qdd, b.qdd),
        tau=cat(a.tau, b.tau),
        fc=cat(a.fc, b.fc),
        mode=a.mode + b.mode,
        com=cat(a.com, b.com),
        vcom=cat(a.vcom, b.vcom),
        p_mech=cat(a.p_mech, b.p_mech),
        e_mech=cat(a.e_mech, b.e_mech),
        p_contact=cat(a.p_contact, b.p_contact),
        events=b.events,
        peak_joint_speed=b.peak_joint_speed,
        peak_torque=b.peak_torque,
        final=b.final,
        final_phase=b.final_phase,
    )


def run_takeoff(scenario: Scenario) -> TrajectoryLog:
    """Stance under the take-off controller, then held-joint flight, until ``duration``."""
    return HybridSimulator(scenario).run(scenario.duration)


def run_flight(log: TrajectoryLog, scenario: Scenario) -> TrajectoryLog:
    """Continue a take-off log until ``flight_duration`` after lift-off."""
    takeoff = log.event(EventKind.TAKEOFF)
    if takeoff is None:
        raise ValueError("run_flight needs a log that contains a TakeOff event")
    if log.event(EventKind.TOUCHDOWN) is not None:
        return log
    sim = HybridSimulator(scenario)
    t_end = takeoff.time + scenario.flight_duration
    t0 = log.events[-1].time if log.events[-1].kind is EventKind.STOP else float(log.t[-1])
    base = replace(log, events=[e for e in log.events if e.kind is not EventKind.STOP])
    builder = _LogBuilder(sim, t0, base)
    return sim.run(t_end, log.final, log.final_phase, t0, builder)


def summarize(log: TrajectoryLog, params: RobotParams | None = None) -> TakeoffSummary:
    """Take-off quantities read from the exact event state."""
    ev = log.event(EventKind.TAKEOFF)
    if ev is None:
        raise ValueError("no TakeOff event in log")
    params = RobotParams() if params is None else params
    c, J, _ = com_terms(kinematics(ev.state, params))
    v = J @ ev.state.qd
    e = float(np.interp(ev.time, log.t, log.e_mech))
    return TakeoffSummary(
        takeoff_speed=float(np.linalg.norm(v)),
        takeoff_time=ev.time,
        takeoff_pitch=float(ev.state.q[2]),
        takeoff_pitch_rate=float(ev.state.qd[2]),
        takeoff_velocity=(float(v[0]), float(v[1])),
        takeoff_height=float(c[1]),
        peak_joint_speed=log.peak_joint_speed,
        peak_torque=log.peak_torque,
        e_mech=e,
    )


def released_elastic_energy(t, q, takeoff_time: float, params: RobotParams) -> float:
    """Spring energy given up between the first sample and take-off.

    Joint angles are interpolated from the sampled log so the value can be
    recomputed from an exported CSV.
    """
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    q_to = np.array([np.interp(takeoff_time, t, q[:, j]) for j in range(q.shape[1])])
    return spring_energy(q[0], params) - spring_energy(q_to, params)


# -- sweeps ---------------------------------------------------------------------


def _cell(args) -> dict:
    scenario, combo = args
    row = dict(combo)
    try:
        sc = scenario.with_updates(**combo)
        log = run_takeoff(sc)
        s = summarize(log, sc.effective_params)
        p = sc.effective_params
        row.update(s.as_dict())
        row["joint_speed_limit_deg"] = math.degrees(p.joint_speed_limit)
        row["feasible"] = bool(s.peak_joint_speed < p.joint_speed_limit)
        row["error"] = ""
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
        row["feasible"] = False
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(scenario: Scenario, grid: dict[str, list], workers: int | None = None) -> list[dict]:
    """Run the Cartesian product of ``grid`` values; one summary row per cell.

    A cell is feasible when its peak stance joint speed stays below the
    no-load joint speed ``motor_max_speed / gear_ratio``. Failures are
    recorded in the ``error`` column.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("sweep grid must be non-empty")
    keys = list(grid)
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    jobs = [(scenario, c) for c in combos]
    if workers is None or workers <= 1:
        return [_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, jobs))
