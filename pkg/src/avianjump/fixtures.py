"""Synthetic hardware-style logs encoding the published bench measurements.

The physical experiments cannot be repeated here, so these fixtures carry the
reported numbers in ``t, V, I`` form (plus speed and height traces) and let the
metric formulas be checked end to end against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import allometric_leg_mass
from .model import GRAVITY

ROBOT_MASS = 0.62  # kg, jumping robot in the energetics experiment
RATE = 1000.0  # Hz
BATTERY_V = 11.1  # V, average of before/after readings
TAKEOFF_TIME = 0.17  # s
JUMP_SPEED = 2.4  # m/s at take-off
JUMP_HEIGHT = 0.4  # m of CoM rise at take-off
LEG_ONLY_SPEED = 2.2  # m/s reached without thrust

# published input energies (J) per strategy
ENERGY_IN = {"jumping": 60.1, "standing": 55.7, "falling": 56.2}
# output-energy ratios chosen so every rounded figure in the report comes back:
# 10.43 -> 10.4x output and 9.7x efficiency; 5.27 -> 5.3x and 4.9x
OUTPUT_RATIO = {"standing": 10.43, "falling": 5.27}
ACCEL_RATIO = {"standing": 15.1, "falling": 4.3}

WALK_SPEED = 0.23  # m/s
WALK_ENERGY = 5.0  # J over WALK_DISTANCE
WALK_DISTANCE = 1.0  # m
WALK_MASS = 0.623  # kg, walking configuration
HOP_DISTANCE = 0.266  # m
JUMP_DISTANCE = 0.370  # m


@dataclass(frozen=True)
class StrategyLog:
    """One take-off trial: electrical samples plus CoM speed and rise."""

    name: str
    t: np.ndarray
    V: np.ndarray
    I: np.ndarray
    speed: np.ndarray
    height: np.ndarray
    takeoff_time: float
    m_b: float = ROBOT_MASS


def _strategy_targets(name: str) -> tuple[float, float, float]:
    """(energy in, take-off speed, take-off height) for a strategy."""
    e_out_jump = 0.5 * ROBOT_MASS * JUMP_SPEED**2 + ROBOT_MASS * GRAVITY * JUMP_HEIGHT
    if name == "jumping":
        return ENERGY_IN[name], JUMP_SPEED, JUMP_HEIGHT
    v = JUMP_SPEED / ACCEL_RATIO[name]
    e_out = e_out_jump / OUTPUT_RATIO[name]
    h = (e_out - 0.5 * ROBOT_MASS * v * v) / (ROBOT_MASS * GRAVITY)
    return ENERGY_IN[name], v, h


def strategy_log(name: str, rate: float = RATE, tail: float = 0.05) -> StrategyLog:
    """Current ramps linearly so that ``int V I dt`` over take-off hits the target.

    Speed rises linearly to the take-off value and the height follows the
    integral of speed scaled to the take-off rise; samples continue for
    ``tail`` seconds after take-off.
    """
    if name not in ENERGY_IN:
        raise KeyError(f"unknown strategy {name!r}")
    e_in, v_to, h_to = _strategy_targets(name)
    T = TAKEOFF_TIME
    n = int(round((T + tail) * rate)) + 1
    t = np.arange(n) / rate
    # I(t) = I0 (1 + t / T) on [0, T]: integral = 1.5 V I0 T
    i0 = e_in / (1.5 * BATTERY_V * T)
    current = np.where(t <= T, i0 * (1.0 + t / T), 0.0)
    speed = np.where(t <= T, v_to * t / T, v_to)
    height = np.where(t <= T, h_to * (t / T) ** 2, h_to)
    return StrategyLog(name, t, np.full(n, BATTERY_V), current, speed, height, T)


def strategy_logs(rate: float = RATE) -> dict[str, StrategyLog]:
    return {name: strategy_log(name, rate) for name in ENERGY_IN}


@dataclass(frozen=True)
class WalkLog:
    t: np.ndarray
    V: np.ndarray
    I: np.ndarray
    distance: float
    m_b: float = WALK_MASS
    leg_length: float = 0.24


def walk_log(rate: float = RATE) -> WalkLog:
    """Constant-current walk covering ``WALK_DISTANCE`` at ``WALK_SPEED``."""
    duration = WALK_DISTANCE / WALK_SPEED
    n = int(np.floor(duration * rate)) + 1
    t = np.append(np.arange(n) / rate, duration)
    t = np.unique(t)
    current = np.full(len(t), WALK_ENERGY / (BATTERY_V * duration))
    return WalkLog(t, np.full(len(t), BATTERY_V), current, WALK_DISTANCE)


def allometry_data(n: int = 12, lo: float = 0.05, hi: float = 5.0, noise: float = 0.0, seed: int = 0):
    """Body/leg mass pairs from the allometric law, optional multiplicative noise."""
    m_b = np.geomspace(lo, hi, n)
    m_l = allometric_leg_mass(m_b)
    if noise:
        rng = np.random.default_rng(seed)
        m_l = m_l * (1.0 + noise * rng.standard_normal(n))
    return m_b, m_l


__all__ = [
    "ENERGY_IN",
    "StrategyLog",
    "WalkLog",
    "allometry_data",
    "strategy_log",
    "strategy_logs",
    "walk_log",
]
