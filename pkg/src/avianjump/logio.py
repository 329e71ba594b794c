"""CSV export and ingestion for trajectory logs, event sidecars and power logs.

Floats are written with ``%.17g`` so every value round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import NQ

LOG_HEADER = (
    ["t"]
    + [f"q{i}" for i in range(1, NQ + 1)]
    + [f"qd{i}" for i in range(1, NQ + 1)]
    + ["tau_hip", "tau_ankle", "fc_x", "fc_y", "mode", "com_x", "com_y", "vcom_x", "vcom_y", "P_mech", "E_mech"]
)
EVENT_HEADER = ["t", "kind"]
HARDWARE_HEADER = ["t", "V", "I"]
CURRENT_HEADER = ["t", "I"]
SUMMARY_HEADER = ["key", "value"]


class LogFormatError(ValueError):
    pass


def fmt(x) -> str:
    """Lossless text form of a float (shortest form for ints stays readable)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def log_rows(log):
    fc = np.asarray(log.fc)
    for k in range(len(log.t)):
        yield (
            [log.t[k], *log.q[k], *log.qd[k], log.tau[k, 0], log.tau[k, 1], fc[k, 0], fc[k, 1], log.mode[k]]
            + [log.com[k, 0], log.com[k, 1], log.vcom[k, 0], log.vcom[k, 1], log.p_mech[k], log.e_mech[k]]
        )


def write_log_csv(log, path) -> None:
    write_rows(path, LOG_HEADER, log_rows(log))


def write_events_csv(events, path) -> None:
    write_rows(path, EVENT_HEADER, ([e.time, e.kind.value] for e in events))


@dataclass
class LogTable:
    """Columns of a trajectory CSV; ``mode`` stays textual."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    fc: np.ndarray
    mode: list[str]
    com: np.ndarray
    vcom: np.ndarray
    p_mech: np.ndarray
    e_mech: np.ndarray


def _read(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise LogFormatError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if r]


def _floats(rows, idx, path) -> np.ndarray:
    try:
        return np.array([[float(r[i]) for i in idx] for r in rows], dtype=float).reshape(len(rows), len(idx))
    except (ValueError, IndexError) as exc:
        raise LogFormatError(f"{path}: malformed numeric row ({exc})") from None


def read_log_csv(path) -> LogTable:
    header, rows = _read(path)
    if header != LOG_HEADER:
        raise LogFormatError(f"{path}: not a trajectory log (header {header[:4]}...)")
    col = {name: i for i, name in enumerate(header)}
    numeric = [i for i, name in enumerate(header) if name != "mode"]
    data = _floats(rows, numeric, path)
    get = {name: data[:, numeric.index(col[name])] for name in header if name != "mode"}

    def stack(*names):
        return np.column_stack([get[n] for n in names]) if rows else np.zeros((0, len(names)))

    return LogTable(
        t=get["t"],
        q=stack(*[f"q{i}" for i in range(1, NQ + 1)]),
        qd=stack(*[f"qd{i}" for i in range(1, NQ + 1)]),
        tau=stack("tau_hip", "tau_ankle"),
        fc=stack("fc_x", "fc_y"),
        mode=[r[col["mode"]] for r in rows],
        com=stack("com_x", "com_y"),
        vcom=stack("vcom_x", "vcom_y"),
        p_mech=get["P_mech"],
        e_mech=get["E_mech"],
    )


def read_events_csv(path) -> list[tuple[float, str]]:
    header, rows = _read(path)
    if header != EVENT_HEADER:
        raise LogFormatError(f"{path}: expected header t,kind")
    return [(float(r[0]), r[1]) for r in rows]


@dataclass
class PowerSeries:
    """Power samples from either a hardware log or a simulated one."""

    t: np.ndarray
    power: np.ndarray
    source: str  # "hardware" or "sim"
    label: str  # E_elec or E_mech
    table: LogTable | None = None


def detect_format(path) -> str:
    header, _ = _read(path)
    if header == LOG_HEADER:
        return "sim"
    if header[:3] == HARDWARE_HEADER:
        return "hardware"
    if header[:2] == CURRENT_HEADER:
        return "current"
    raise LogFormatError(f"{path}: unrecognised header {','.join(header)}")


def read_power_csv(path, v_avg: float | None = None) -> PowerSeries:
    """Load power from ``t,V,I``, ``t,I`` (needs ``v_avg``) or a sim log."""
    kind = detect_format(path)
    if kind == "sim":
        table = read_log_csv(path)
        return PowerSeries(table.t, table.p_mech, "sim", "E_mech", table)
    _, rows = _read(path)
    if kind == "hardware":
        d = _floats(rows, [0, 1, 2], path)
        return PowerSeries(d[:, 0], d[:, 1] * d[:, 2], "hardware", "E_elec")
    if v_avg is None:
        raise LogFormatError(f"{path}: current-only log needs an average battery voltage")
    d = _floats(rows, [0, 1], path)
    return PowerSeries(d[:, 0], v_avg * d[:, 1], "hardware", "E_elec")


def write_hardware_csv(t, V, I, path) -> None:
    write_rows(path, HARDWARE_HEADER, zip(t, V, I))


def read_hardware_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    header, rows = _read(path)
    if header[:3] != HARDWARE_HEADER:
        raise LogFormatError(f"{path}: expected header t,V,I")
    d = _floats(rows, [0, 1, 2], path)
    return d[:, 0], d[:, 1], d[:, 2]


def write_table_csv(rows: list[dict], path, columns: list[str] | None = None) -> None:
    """Rows of dicts as CSV; column order follows first appearance."""
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    write_rows(path, columns, ([r.get(c, "") for c in columns] for r in rows))


def read_table_csv(path) -> list[dict]:
    """Inverse of :func:`write_table_csv`; numbers and booleans are parsed back."""
    header, rows = _read(path)

    def parse(s: str):
        if s in ("true", "false"):
            return s == "true"
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    return [dict(zip(header, (parse(v) for v in r))) for r in rows]


def write_summary_csv(summary: dict, path) -> None:
    write_rows(path, SUMMARY_HEADER, summary.items())


def read_pairs_csv(path, columns=("body_mass_kg", "leg_mass_kg")) -> tuple[np.ndarray, np.ndarray]:
    header, rows = _read(path)
    try:
        idx = [header.index(c) for c in columns]
    except ValueError:
        raise LogFormatError(f"{path}: expected columns {','.join(columns)}") from None
    d = _floats(rows, idx, path)
    return d[:, 0], d[:, 1]


def write_pairs_csv(x, y, path, columns=("body_mass_kg", "leg_mass_kg")) -> None:
    write_rows(path, list(columns), zip(x, y))
