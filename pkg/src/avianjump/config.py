"""Scenario files: sectioned ``key = value unit`` text with unit conversion.

Parameter keys use the simulation parameter table names verbatim
(``Body mass``, ``l_1``, ``θ_3``, ``P_{w,x}`` ...); quantities without a table
entry use the Python field name. Every dimensional value carries a unit,
converted to SI (angles in rad, springs in N m/rad) at load. Errors name the
file, line and key.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .control import ControlConfig
from .gaits import GaitConfig, GaitMode
from .model import DEG, GRAVITY, GeneralizedState, RobotParams
from .sim import Scenario

SCHEMA_VERSION = 1
SECTIONS = ("meta", "params", "initial_state", "controller", "thrust_schedule", "integration", "gait", "sweep", "metrics")


class ConfigError(ValueError):
    """Bad scenario file; the message carries ``file:line: [section] key``."""


UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "mass": {"kg": 1.0, "g": 1e-3},
    "angle": {"rad": 1.0, "deg": DEG, "°": DEG},
    # thrust is tabulated in kilograms-force
    "force": {"N": 1.0, "kgf": GRAVITY, "kg": GRAVITY, "gf": 1e-3 * GRAVITY},
    "density": {"kg/m^3": 1.0, "kg/m³": 1.0, "kg/m3": 1.0},
    "area": {"m^2": 1.0, "m²": 1.0, "m2": 1.0, "cm^2": 1e-4, "cm²": 1e-4},
    "stiffness": {"Nm/rad": 1.0, "Nm/deg": 1.0 / DEG, "Nm/°": 1.0 / DEG, "Nmm/deg": 1e-3 / DEG, "Nmm/°": 1e-3 / DEG},
    "torque": {"Nm": 1.0, "Nmm": 1e-3, "mNm": 1e-3},
    "angular_speed": {"rad/s": 1.0, "deg/s": DEG, "°/s": DEG, "rpm": 2.0 * math.pi / 60.0},
    "speed": {"m/s": 1.0},
    "accel": {"m/s^2": 1.0, "m/s²": 1.0, "m/s2": 1.0},
    "time": {"s": 1.0, "ms": 1e-3},
    "voltage": {"V": 1.0},
    "frequency": {"Hz": 1.0},
    "none": {"": 1.0},
}

# key -> (field, dimension); tuples are assembled from the x/y keys
PARAM_KEYS = {
    "Body mass": ("m_body", "mass"),
    "Upper limb mass": ("m_upper", "mass"),
    "Lower limb mass": ("m_lower", "mass"),
    "Palm mass": ("m_palm", "mass"),
    "Toe mass": ("m_toe", "mass"),
    "Body length": ("body_length", "length"),
    "l_1": ("l1", "length"),
    "l_2": ("l2", "length"),
    "l_3": ("l3", "length"),
    "l_4": ("l4", "length"),
    "θ_3": ("theta3", "angle"),
    "Air density": ("rho", "density"),
    "Wing area": ("wing_area", "area"),
    "Tail area": ("tail_area", "area"),
    "Wing angle offset": ("wing_offset", "angle"),
    "Tail angle offset": ("tail_offset", "angle"),
    "Thrust angle offset": ("thrust_offset", "angle"),
    "Max thrust": ("max_thrust", "force"),
    "Ankle spring constant": ("k_ankle", "stiffness"),
    "Toe spring constant": ("k_toe", "stiffness"),
    "P_{w,x}": (("wing_center", 0), "length"),
    "P_{w,y}": (("wing_center", 1), "length"),
    "P_{t,x}": (("tail_center", 0), "length"),
    "P_{t,y}": (("tail_center", 1), "length"),
    "body_com": ("body_com", "length"),
    "thrust_point": ("thrust_point", "length"),
    "back_claw_length": ("back_claw_length", "length"),
    "gear_ratio": ("gear_ratio", "none"),
    "motor_max_speed": ("motor_max_speed", "angular_speed"),
    "motor_max_torque": ("motor_max_torque", "torque"),
    "motors_per_joint": ("motors_per_joint", "int"),
    "toe_deflection_max": ("toe_deflection_max", "angle"),
    "ankle_rest": ("ankle_rest", "angle"),
    "toe_rest": ("toe_rest", "angle"),
    "toe_stop": ("toe_stop", "bool"),
    "aero_model": ("aero_model", "str"),
    "aero_in_stance": ("aero_in_stance", "bool"),
    "gravity": ("gravity", "accel"),
}
PARAM_FIELD_DIM = {f: d for f, d in PARAM_KEYS.values() if isinstance(f, str)}
PARAM_FIELD_DIM.update({"wing_center": "length", "tail_center": "length"})

STATE_KEYS = {
    "x": ("x", "length"),
    "y": ("y", "length"),
    "Initial pitch angle": ("pitch", "angle"),
    "Initial hip angle": ("hip", "angle"),
    "Initial ankle angle": ("ankle", "angle"),
    "Initial toe deflection angle": ("toe", "angle"),
}

CONTROL_KEYS = {
    "lam": "none",
    "v_takeoff": "speed",
    "push_time": "time",
    "jump_angle": "angle?",
    "release_decel": "none",
    "constraint_task": "bool",
    "compensate_external": "bool",
    "saturate": "bool",
    "torque_speed": "bool",
    "strategy": "str",
    "effort": "none",
    "priority": "list",
    "kp_pitch": "none",
    "kd_pitch": "none",
    "kp_horizontal": "none",
    "kd_horizontal": "none",
    "kp_vertical": "none",
    "kd_vertical": "none",
    "hold_kp": "none",
    "hold_kd": "none",
    "flight_hold": "bool",
}

INTEGRATION_KEYS = {
    "integrator": "str",
    "dt": "time",
    "duration": "time",
    "flight_duration": "time",
    "event_tol": "time",
    "rtol": "none",
    "atol": "none",
    "ankle_spring": "bool",
    "toe_spring": "bool",
    "initial_mode": "str",
    "ground": "length?",
}

GAIT_KEYS = {
    "mode": "str",
    "pitch": "angle",
    "height_jump_pitch": "angle",
    "hop_pitch": "angle",
    "stroke": "length",
    "step_height": "length",
    "walk_speed": "speed",
    "swing_time": "time",
    "jump_angle": "angle",
    "height_jump_angle": "angle",
    "hop_angle": "angle",
    "extension": "none",
    "push_time": "time",
    "crouch_depth": "length",
    "tuck": "length",
    "recovery_time": "time",
    "crouch_time": "time",
    "balance_time": "time",
    "n_steps": "int?",
    "hip_delay": "time",
    "cycle_time": "time?",
    "rate": "frequency",
    "branch": "int",
}

METRIC_KEYS = {
    "V_avg": "voltage?",
    "leg_length": "length",
    "m_b": "mass?",
    "takeoff_time": "time?",
    "takeoff_speed": "speed?",
    "takeoff_height": "length?",
    "distance": "length?",
}

NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)")


@dataclass(frozen=True)
class MetricsConfig:
    V_avg: float | None = None
    leg_length: float = 0.24
    m_b: float | None = None  # None: robot mass from params
    takeoff_time: float | None = None
    takeoff_speed: float | None = None
    takeoff_height: float | None = None
    distance: float | None = None  # travelled distance for the cost of transport


@dataclass(frozen=True)
class GaitSettings:
    mode: GaitMode = GaitMode.WALK
    config: GaitConfig = field(default_factory=GaitConfig)
    cycle_time: float | None = None
    rate: float = 1000.0
    branch: int = 1


@dataclass(frozen=True)
class Config:
    """Parsed scenario file."""

    scenario: Scenario = field(default_factory=Scenario)
    gait: GaitSettings = field(default_factory=GaitSettings)
    sweep: dict = field(default_factory=dict)
    sweep_workers: int = 1
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    version: int = SCHEMA_VERSION
    source: str = "<defaults>"


def _normalize_unit(u: str) -> str:
    return re.sub(r"[\s·*⋅]", "", u)


def parse_quantity(text: str, dim: str, where: str = "value"):
    """``'3.207 Nmm/°'`` -> SI float. Comma-separated numbers give a tuple.

    A list takes one trailing unit (``0, 0.02 m``) or the same unit on every
    item (``0.4 kg, 0.5 kg``).
    """
    text = text.strip()
    parts = [p.strip() for p in text.split(",")]
    values = []
    units = []
    for part in parts:
        m = NUMBER.match(part)
        if not m:
            raise ConfigError(f"{where}: expected a number, got {part!r}")
        values.append(float(m.group(1)))
        units.append(part[m.end() :].strip())
    unit = units[-1]
    if any(u and _normalize_unit(u) != _normalize_unit(unit) for u in units[:-1]):
        raise ConfigError(f"{where}: list items must share one unit")
    table = UNITS[dim]
    key = _normalize_unit(unit)
    if key not in table:
        if not key:
            raise ConfigError(f"{where}: missing unit (expected one of {', '.join(u for u in table if u)})")
        raise ConfigError(f"{where}: unknown unit {unit!r} for {dim} (expected one of {', '.join(table)})")
    factor = table[key]
    out = [v if factor == 1.0 else v * factor for v in values]
    return out[0] if len(out) == 1 else tuple(out)


def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected true/false, got {text!r}")


def parse_value(text: str, dim: str, where: str):
    optional = dim.endswith("?")
    dim = dim.rstrip("?")
    if optional and text.strip().lower() in ("none", ""):
        return None
    if dim == "bool":
        return _parse_bool(text, where)
    if dim == "str":
        return text.strip()
    if dim == "list":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if dim == "int":
        try:
            return int(text.strip())
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {text!r}") from None
    return parse_quantity(text, dim, where)


class _Source:
    """configparser plus a ``(section, key) -> line`` index for messages."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=name)
        except configparser.Error as exc:
            raise ConfigError(f"{name}: {exc}") from None
        self.lines: dict[tuple[str, str], int] = {}
        section = None
        for n, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
                self.lines[(section, "")] = n
            elif section and s and not s.startswith(("#", ";")) and ("=" in s or ":" in s):
                key = re.split(r"\s*[=:]\s*", s, maxsplit=1)[0].strip()
                self.lines.setdefault((section, key), n)
        unknown = [s for s in self.cp.sections() if s not in SECTIONS]
        if unknown:
            sec = unknown[0]
            raise ConfigError(f"{self.where(sec)}: unknown section (expected one of {', '.join(SECTIONS)})")

    def where(self, section: str, key: str = "") -> str:
        line = self.lines.get((section, key), self.lines.get((section, ""), 0))
        label = f"[{section}] {key}".rstrip()
        return f"{self.name}:{line}: {label}"

    def items(self, section: str):
        if not self.cp.has_section(section):
            return []
        return [(k, v) for k, v in self.cp.items(section)]

    def parse(self, section: str, table: dict, strip=lambda spec: spec):
        out = {}
        for key, raw in self.items(section):
            if key not in table:
                raise ConfigError(f"{self.where(section, key)}: unknown key")
            out[key] = parse_value(raw, strip(table[key]), self.where(section, key))
        return out


def _build(src: _Source) -> Config:
    # meta
    meta = dict(src.items("meta"))
    version = SCHEMA_VERSION
    if "version" in meta:
        try:
            version = int(meta["version"])
        except ValueError:
            raise ConfigError(f"{src.where('meta', 'version')}: expected an integer") from None
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{src.where('meta', 'version')}: schema version {version} != {SCHEMA_VERSION}")

    def guarded(section: str, key: str, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"{src.where(section, key)}: {exc}") from None

    # params
    par: dict = {}
    pairs: dict = {}
    for key, raw in src.items("params"):
        if key not in PARAM_KEYS:
            raise ConfigError(f"{src.where('params', key)}: unknown parameter")
        target, dim = PARAM_KEYS[key]
        value = parse_value(raw, dim, src.where("params", key))
        if isinstance(target, tuple):
            pairs.setdefault(target[0], {})[target[1]] = value
        else:
            par[target] = value
    base = RobotParams()
    for name, comps in pairs.items():
        cur = list(getattr(base, name))
        for i, v in comps.items():
            cur[i] = v
        par[name] = tuple(cur)
    first_param = next((k for k, _ in src.items("params")), "")
    params = guarded("params", first_param, lambda: RobotParams(**par))

    # initial state
    st = {}
    for key, raw in src.items("initial_state"):
        if key not in STATE_KEYS:
            raise ConfigError(f"{src.where('initial_state', key)}: unknown key")
        name, dim = STATE_KEYS[key]
        st[name] = parse_value(raw, dim, src.where("initial_state", key))
    q0 = GeneralizedState.from_degrees()
    names = ("x", "y", "pitch", "hip", "ankle", "toe")
    q = [st.get(n, q0.q[i]) for i, n in enumerate(names)]
    state0 = GeneralizedState(np.array(q))

    # controller
    ctl = src.parse("controller", CONTROL_KEYS)
    cfg = ControlConfig()
    gains = dict(cfg.gains)
    for task in ("pitch", "horizontal", "vertical"):
        kp, kd = gains[task]
        gains[task] = (ctl.pop(f"kp_{task}", kp), ctl.pop(f"kd_{task}", kd))
    hold = (ctl.pop("hold_kp", cfg.hold_gains[0]), ctl.pop("hold_kd", cfg.hold_gains[1]))
    first_ctl = next((k for k, _ in src.items("controller")), "")
    control = guarded("controller", first_ctl, lambda: replace(cfg, gains=gains, hold_gains=hold, **ctl))

    # thrust schedule
    schedule = Scenario().thrust_schedule
    flight = Scenario().flight_thrust
    for key, raw in src.items("thrust_schedule"):
        where = src.where("thrust_schedule", key)
        if key == "breakpoints":
            schedule = _parse_schedule(raw, where)
        elif key == "flight_thrust":
            flight = parse_value(raw, "none?", where)
        else:
            raise ConfigError(f"{where}: unknown key")

    integ = src.parse("integration", INTEGRATION_KEYS)
    first_int = next((k for k, _ in src.items("integration")), "")
    scenario = guarded(
        "integration",
        first_int,
        lambda: Scenario(
            state0=state0, params=params, control=control, thrust_schedule=schedule, flight_thrust=flight, **integ
        ),
    )

    # gait
    g = src.parse("gait", GAIT_KEYS)
    mode = g.pop("mode", "walk")
    cycle = g.pop("cycle_time", None)
    rate = g.pop("rate", 1000.0)
    branch = g.pop("branch", 1)
    first_gait = next((k for k, _ in src.items("gait")), "")
    gait_mode = guarded("gait", "mode", lambda: parse_gait_mode(mode))
    gcfg = guarded("gait", first_gait, lambda: GaitConfig(**g))
    gait = GaitSettings(gait_mode, gcfg, cycle, rate, branch)

    # sweep grid: keys are field names or table names, values comma lists
    grid = {}
    workers = 1
    for key, raw in src.items("sweep"):
        where = src.where("sweep", key)
        if key == "workers":
            workers = parse_value(raw, "int", where)
            continue
        name, dim = _sweep_target(key, where)
        vals = parse_value(raw, dim, where)
        grid[name] = list(vals) if isinstance(vals, tuple) else [vals]
        guarded("sweep", key, lambda: [scenario.with_updates(**{name: v}) for v in grid[name]])

    m = src.parse("metrics", METRIC_KEYS)
    metrics = guarded("metrics", next(iter(m), ""), lambda: MetricsConfig(**m))
    return Config(scenario, gait, grid, workers, metrics, version, src.name)


def parse_gait_mode(text: str) -> GaitMode:
    """Accept the enum value or name in any case (``walk``, ``ForwardHop``, ``forward_hop``)."""
    key = text.strip().lower().replace("_", "").replace("-", "")
    for m in GaitMode:
        if key in (m.value.lower(), m.name.lower().replace("_", "")):
            return m
    raise ValueError(f"unknown gait mode {text!r} (expected one of {', '.join(m.value for m in GaitMode)})")


def _sweep_target(key: str, where: str) -> tuple[str, str]:
    if key in PARAM_KEYS and isinstance(PARAM_KEYS[key][0], str):
        return PARAM_KEYS[key]
    if key in PARAM_FIELD_DIM:
        return key, PARAM_FIELD_DIM[key]
    if key in CONTROL_KEYS and CONTROL_KEYS[key] not in ("bool", "str", "list"):
        return key, CONTROL_KEYS[key].rstrip("?")
    if key in INTEGRATION_KEYS and INTEGRATION_KEYS[key] != "str":
        return key, INTEGRATION_KEYS[key]
    raise ConfigError(f"{where}: cannot sweep over this key")


def _parse_schedule(raw: str, where: str) -> tuple[tuple[float, float], ...]:
    """``0 s: 0.0, 0.1 s: 0.5`` -> ((0.0, 0.0), (0.1, 0.5))."""
    out = []
    for item in raw.split(","):
        if ":" not in item:
            raise ConfigError(f"{where}: breakpoints are 'time unit: level' pairs, got {item.strip()!r}")
        t, level = item.split(":", 1)
        out.append((parse_quantity(t, "time", where), parse_quantity(level, "none", where)))
    return tuple(out)


def loads(text: str, name: str = "<string>") -> Config:
    return _build(_Source(text, name))


def load(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return loads(text, str(path))


def default_config_text() -> str:
    return resources.files("avianjump").joinpath("data/default_scenario.ini").read_text(encoding="utf-8")


def load_default() -> Config:
    return loads(default_config_text(), "default_scenario.ini")


__all__ = [
    "Config",
    "ConfigError",
    "GaitSettings",
    "MetricsConfig",
    "SCHEMA_VERSION",
    "load",
    "load_default",
    "loads",
    "parse_quantity",
]
