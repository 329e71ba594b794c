"""Energetics and locomotion metrics.

Electrical energy comes from ``t, V, I`` logs; simulated runs use the
mechanical proxy ``sum_j |tau_j * omega_j|`` (no regeneration credit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .model import GRAVITY

# bird data points used for the take-off speed target: (body mass kg, speed m/s)
BIRD_TAKEOFF_POINTS = ((0.491, 1.85), (0.783, 3.21))


class ConvergenceError(RuntimeError):
    pass


def takeoff_power(m_b: float, v_takeoff: float, g: float = GRAVITY) -> float:
    """Mechanical power to lift the body weight at the take-off speed, ``m g v``."""
    if m_b <= 0 or v_takeoff < 0:
        raise ValueError("need m_b > 0 and v >= 0")
    return m_b * g * v_takeoff


def interpolate_takeoff_speed(m_b: float, round_to: float | None = None) -> float:
    """Line through the two bird data points, optionally rounded to a grid.

    ``round_to=0.5`` reproduces the rounded design target (2.5 m/s at 0.6 kg).
    """
    if m_b <= 0:
        raise ValueError("body mass must be positive")
    (m0, v0), (m1, v1) = BIRD_TAKEOFF_POINTS
    v = v0 + (v1 - v0) * (m_b - m0) / (m1 - m0)
    if round_to:
        v = round(v / round_to) * round_to
    return v


def electrical_power(V, I) -> np.ndarray:
    return np.asarray(V, dtype=float) * np.asarray(I, dtype=float)


def mechanical_power(tau, omega) -> np.ndarray:
    """Summed absolute joint power; rows are samples, columns joints."""
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    return np.abs(tau * omega).sum(axis=1)


def energy_input(t, power, until: float | None = None) -> float:
    """Trapezoidal integral of power; ``until`` cuts the series (interpolated)."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(power, dtype=float)
    if t.ndim != 1 or len(t) < 2 or p.shape != t.shape:
        raise ValueError("need at least two samples of matching t and power")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    if until is not None:
        if not t[0] < until <= t[-1]:
            raise ValueError("until lies outside the series")
        keep = t < until
        p = np.append(p[keep], np.interp(until, t, p))
        t = np.append(t[keep], until)
    return float(np.trapezoid(p, t))


def energy_output(m_b: float, v: float, h: float, g: float = GRAVITY) -> float:
    """Kinetic plus potential energy ``m v^2 / 2 + m g h``."""
    if m_b <= 0:
        raise ValueError("body mass must be positive")
    return 0.5 * m_b * v * v + m_b * g * h


def efficiency(e_out: float, e_in: float) -> float:
    if e_in <= 0:
        raise ValueError("input energy must be positive")
    return e_out / e_in


def average_acceleration(t, speed, takeoff_time: float) -> float:
    """Mean of the speed derivative over ``[t0, takeoff_time]``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(speed, dtype=float)
    if takeoff_time <= t[0] or takeoff_time > t[-1]:
        raise ValueError("series must cover the window up to take-off")
    return float((np.interp(takeoff_time, t, v) - v[0]) / (takeoff_time - t[0]))


def froude(v: float, leg_length: float, g: float = GRAVITY) -> float:
    if leg_length <= 0:
        raise ValueError("leg length must be positive")
    return v * v / (g * leg_length)


def cost_of_transport(energy: float, m_b: float, distance: float, g: float = GRAVITY) -> float:
    if distance <= 0:
        raise ValueError("distance must be positive")
    if m_b <= 0:
        raise ValueError("body mass must be positive")
    return energy / (m_b * g * distance)


def gear_ratio_bound(motor_max_speed: float, required_joint_speed: float) -> float:
    """Largest reduction that still reaches the required joint speed (same units)."""
    if motor_max_speed <= 0 or required_joint_speed <= 0:
        raise ValueError("speeds must be positive")
    return motor_max_speed / required_joint_speed


def speed_contribution(v_legs: float, v_required: float) -> float:
    """Share of the take-off speed produced by the legs alone."""
    if v_required <= 0:
        raise ValueError("required speed must be positive")
    return v_legs / v_required


@dataclass(frozen=True)
class EnergyReport:
    e_in: float
    e_out: float
    eta: float
    avg_accel: float
    label: str = "E_elec"


def energy_report(t, power, speed, height, m_b: float, takeoff_time: float, label: str = "E_elec") -> EnergyReport:
    """Metrics at the take-off instant from aligned power, speed and height series."""
    t = np.asarray(t, dtype=float)
    e_in = energy_input(t, power, until=takeoff_time)
    v = float(np.interp(takeoff_time, t, speed))
    h = float(np.interp(takeoff_time, t, height))
    e_out = energy_output(m_b, v, h)
    return EnergyReport(e_in, e_out, efficiency(e_out, e_in), average_acceleration(t, speed, takeoff_time), label)


def takeoff_metrics(
    t,
    speed,
    height,
    m_b: float,
    takeoff_time: float,
    leg_length: float,
    power=None,
    energy=None,
    label: str = "E_elec",
    elastic: float | None = None,
) -> dict:
    """Energetics at take-off from aligned series.

    Input energy comes from a cumulative ``energy`` series when given
    (interpolated at take-off), otherwise from integrating ``power``.
    ``elastic`` is stored spring energy released before take-off; it is
    reported separately and counted as input for the efficiency.
    """
    t = np.asarray(t, dtype=float)
    if energy is not None:
        e = np.asarray(energy, dtype=float)
        e_in = float(np.interp(takeoff_time, t, e) - e[0])
    elif power is not None:
        e_in = energy_input(t, power, until=takeoff_time)
    else:
        raise ValueError("need a power or a cumulative energy series")
    v = float(np.interp(takeoff_time, t, speed))
    h = float(np.interp(takeoff_time, t, height))
    e_out = energy_output(m_b, v, h)
    out = {"takeoff_time": float(takeoff_time), "takeoff_speed": v, "takeoff_rise": h, label: e_in}
    if elastic is not None:
        out["E_elastic"] = float(elastic)
    return out | {
        "E_out": e_out,
        "eta": efficiency(e_out, e_in + (elastic or 0.0)),
        "avg_accel": average_acceleration(t, speed, takeoff_time),
        "froude_takeoff": froude(v, leg_length),
    }


# -- allometry -----------------------------------------------------------------------


@dataclass(frozen=True)
class AllometryFit:
    a: float
    b: float
    r2: float

    def predict(self, m_b):
        return self.a * np.asarray(m_b, dtype=float) ** self.b


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``y = a x^b`` in linear space.

    A straight-line fit in log-log space seeds a Levenberg-Marquardt
    (damped Gauss-Newton) refinement on the linear residuals.

    Parameters
    ----------
    max_iter : int
        Residual evaluations allowed before giving up.
    tol : float
        Relative tolerance on parameters and cost.
    r2_space : {"linear", "log"}
        Space in which ``r2_`` is reported.
    """

    def __init__(self, max_iter: int = 200, tol: float = 1e-14, r2_space: str = "linear"):
        self.max_iter = max_iter
        self.tol = tol
        self.r2_space = r2_space

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        if X.shape[1] != 1:
            raise ValueError("PowerLawRegressor expects a single feature")
        if self.r2_space not in ("linear", "log"):
            raise ValueError("r2_space must be 'linear' or 'log'")
        x = X[:, 0]
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("power-law fit needs positive data")
        b0, loga0 = np.polyfit(np.log(x), np.log(y), 1)
        # parameterize by log(a) so a stays positive
        theta0 = np.array([loga0, b0])

        def resid(th):
            return np.exp(th[0]) * x ** th[1] - y

        def jac(th):
            f = np.exp(th[0]) * x ** th[1]
            return np.column_stack([f, f * np.log(x)])

        sol = least_squares(
            resid, theta0, jac=jac, method="lm", xtol=self.tol, ftol=self.tol, gtol=self.tol, max_nfev=self.max_iter
        )
        if sol.status <= 0:
            raise ConvergenceError(f"power-law fit did not converge: {sol.message}")
        self.a_ = float(np.exp(sol.x[0]))
        self.b_ = float(sol.x[1])
        self.n_iter_ = int(sol.nfev)
        self.r2_ = self._r2(x, y)
        return self

    def _r2(self, x, y) -> float:
        pred = self.a_ * x**self.b_
        if self.r2_space == "log":
            y, pred = np.log(y), np.log(pred)
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return min(1.0, max(0.0, r2))

    def predict(self, X):
        check_is_fitted(self, ("a_", "b_"))
        X = check_array(X)
        return self.a_ * X[:, 0] ** self.b_


def fit_allometry(m_body, m_leg, **kwargs) -> AllometryFit:
    """Fit ``m_leg = a m_body^b``; two points give the exact interpolant."""
    m_body = np.asarray(m_body, dtype=float).reshape(-1, 1)
    reg = PowerLawRegressor(**kwargs).fit(m_body, np.asarray(m_leg, dtype=float))
    return AllometryFit(reg.a_, reg.b_, reg.r2_)


def allometric_leg_mass(m_b, a: float = 0.1289, b: float = 1.2):
    return a * np.asarray(m_b, dtype=float) ** b


__all__ = [
    "AllometryFit",
    "ConvergenceError",
    "EnergyReport",
    "PowerLawRegressor",
    "average_acceleration",
    "cost_of_transport",
    "efficiency",
    "electrical_power",
    "energy_input",
    "energy_output",
    "energy_report",
    "fit_allometry",
    "froude",
    "gear_ratio_bound",
    "interpolate_takeoff_speed",
    "mechanical_power",
    "speed_contribution",
    "takeoff_metrics",
    "takeoff_power",
]
