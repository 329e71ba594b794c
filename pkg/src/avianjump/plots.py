"""Minimal SVG line plots (polylines, axes and ticks) with no plotting dependency."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    """Round tick positions covering ``[lo, hi]``."""
    if not math.isfinite(lo) or not math.isfinite(hi):
        return np.array([0.0])
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    return np.arange(start, hi + step * 1e-9, step)


def line_plot(series, title="", xlabel="", ylabel="", vlines=(), equal_aspect=False) -> str:
    """``series`` is a list of ``(label, x, y)``; returns SVG text."""
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series]) if series else np.array([0.0, 1.0])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    if equal_aspect:
        scale = max((x1 - x0) / pw, (y1 - y0) / ph)
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        x0, x1 = cx - scale * pw / 2, cx + scale * pw / 2
        y0, y1 = cy - scale * ph / 2, cy + scale * ph / 2

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tx in nice_ticks(x0, x1):
        X = px(tx)
        out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{tx:g}</text>')
    for ty in nice_ticks(y0, y1):
        Y = py(ty)
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" font-size="11" text-anchor="end">{ty:g}</text>')
    for v in vlines:
        if x0 <= v <= x1:
            X = px(v)
            out.append(
                f'<line x1="{X:.2f}" y1="{top}" x2="{X:.2f}" y2="{top + ph}" stroke="gray" stroke-dasharray="5,4"/>'
            )
    for i, (label, x, y) in enumerate(series):
        pts = " ".join(
            f"{px(a):.2f},{py(b):.2f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)) if np.isfinite(b)
        )
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if label:
            ly = top + 16 + 16 * i
            out.append(f'<line x1="{left + 10}" y1="{ly - 4}" x2="{left + 30}" y2="{ly - 4}" stroke="{color}"/>')
            out.append(f'<text x="{left + 35}" y="{ly}" font-size="12">{escape(label)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="18" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def takeoff_panels(log, out_dir) -> list[Path]:
    """CoM path, speed, pitch, joint angles and torques of a take-off log."""
    out_dir = Path(out_dir)
    takeoff = [e.time for e in log.events if e.kind.value == "TakeOff"]
    t = log.t
    deg = np.degrees
    speed = np.linalg.norm(log.vcom, axis=1)
    panels = {
        "com_trajectory.svg": line_plot(
            [("CoM", log.com[:, 0], log.com[:, 1])], "CoM trajectory", "x (m)", "y (m)", equal_aspect=True
        ),
        "com_speed.svg": line_plot([("|v|", t, speed)], "CoM speed", "t (s)", "m/s", takeoff),
        "pitch.svg": line_plot([("pitch", t, deg(log.q[:, 2]))], "Pitch angle", "t (s)", "deg", takeoff),
        "joint_angles.svg": line_plot(
            [("hip", t, deg(log.q[:, 3])), ("ankle", t, deg(log.q[:, 4])), ("toe", t, deg(log.q[:, 5]))],
            "Joint angles",
            "t (s)",
            "deg",
            takeoff,
        ),
        "joint_speeds.svg": line_plot(
            [("hip", t, deg(log.qd[:, 3])), ("ankle", t, deg(log.qd[:, 4]))], "Joint speeds", "t (s)", "deg/s", takeoff
        ),
        "joint_torques.svg": line_plot(
            [("hip", t, log.tau[:, 0]), ("ankle", t, log.tau[:, 1])], "Joint torques", "t (s)", "N m", takeoff
        ),
    }
    paths = []
    for name, svg in panels.items():
        p = out_dir / name
        p.write_text(svg)
        paths.append(p)
    return paths


def reference_panel(ref, path) -> Path:
    """Joint reference angles of a gait."""
    path = Path(path)
    path.write_text(
        line_plot(
            [("hip", ref.t, np.degrees(ref.q[:, 0])), ("ankle", ref.t, np.degrees(ref.q[:, 1]))],
            "Joint references",
            "t (s)",
            "deg",
        )
    )
    return path
