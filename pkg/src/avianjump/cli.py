"""Command-line front end: ``avianjump simulate | gait | metrics | fit | sweep``.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import logio, metrics, plots
from .dynamics import ConstraintDegeneracy
from .gaits import gait_to_joint_commands, gen_trajectory, static_stability, write_reference_csv
from .metrics import ConvergenceError
from .sim import EventKind, IntegrationDiverged, released_elastic_energy, run_flight, run_takeoff, summarize, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (IntegrationDiverged, ConstraintDegeneracy, ConvergenceError, np.linalg.LinAlgError, ArithmeticError)
# checked after NUMERIC_ERRORS: LinAlgError is a ValueError
INPUT_ERRORS = (cfgmod.ConfigError, logio.LogFormatError, OSError, ValueError)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    config: Path | None = None
    out: Path = Path("out")
    plots: bool = False
    seed: int = 0
    dry_run: bool = False
    version: int = cfgmod.SCHEMA_VERSION
    inputs: tuple[Path, ...] = ()
    flight: bool = False
    workers: int | None = None
    noise: float = 0.0
    events: Path | None = None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def load_config(run: RunConfig) -> cfgmod.Config:
    return cfgmod.load_default() if run.config is None else cfgmod.load(run.config)


def _outdir(run: RunConfig) -> Path:
    try:
        run.out.mkdir(parents=True, exist_ok=True)
        probe = run.out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise cfgmod.ConfigError(f"output directory {run.out} is not writable: {exc.strerror}") from None
    return run.out


# -- simulate ---------------------------------------------------------------------


def simulation_summary(log, scenario, leg_length: float = 0.24) -> dict:
    """Take-off quantities plus energetics with the mechanical-energy proxy."""
    params = scenario.effective_params
    out = {"events": [{"t": e.time, "kind": e.kind.value} for e in log.events]}
    ev = log.event(EventKind.TAKEOFF)
    out["took_off"] = ev is not None
    out["peak_joint_speed_deg"] = float(np.degrees(log.peak_joint_speed))
    out["peak_torque"] = log.peak_torque
    if ev is None:
        return out
    out.update(summarize(log, params).as_dict())
    speed = np.linalg.norm(log.vcom, axis=1)
    rise = log.com[:, 1] - log.com[0, 1]
    elastic = released_elastic_energy(log.t, log.q, ev.time, params)
    out["energetics"] = metrics.takeoff_metrics(
        log.t, speed, rise, params.total_mass, ev.time, leg_length, energy=log.e_mech, label="E_mech", elastic=elastic
    )
    return out


def cmd_simulate(run: RunConfig) -> int:
    conf = load_config(run)
    if run.dry_run:
        print(f"{conf.source}: ok (schema version {conf.version})")
        return EXIT_OK
    out = _outdir(run)
    sc = conf.scenario
    log = run_takeoff(sc)
    if run.flight and log.event(EventKind.TAKEOFF) is not None:
        log = run_flight(log, sc)
    logio.write_log_csv(log, out / "trajectory.csv")
    logio.write_events_csv(log.events, out / "trajectory.events.csv")
    summary = simulation_summary(log, sc, conf.metrics.leg_length)
    (out / "summary.json").write_text(dumps(summary))
    if run.plots:
        plots.takeoff_panels(log, out)
    if not summary["took_off"]:
        print("no take-off within the simulated duration", file=sys.stderr)
        return EXIT_NUMERIC
    print(
        f"take-off at {summary['takeoff_time']:.4f} s: speed {summary['takeoff_speed']:.3f} m/s, "
        f"pitch rate {summary['takeoff_pitch_rate']:.3f} rad/s, peak joint speed "
        f"{summary['peak_joint_speed_deg']:.0f} deg/s"
    )
    return EXIT_OK


# -- gait ---------------------------------------------------------------------------


def gait_outputs(conf: cfgmod.Config):
    g = conf.gait
    params = conf.scenario.params
    traj = gen_trajectory(g.mode, g.config, params)
    ref = gait_to_joint_commands(
        traj, params, g.cycle_time, g.rate, g.config.n_steps, g.config.hip_delay, g.branch
    )
    return traj, ref


def cmd_gait(run: RunConfig) -> int:
    conf = load_config(run)
    if run.dry_run:
        print(f"{conf.source}: ok (schema version {conf.version})")
        return EXIT_OK
    out = _outdir(run)
    traj, ref = gait_outputs(conf)
    write_reference_csv(ref, out / "joint_reference.csv")
    scaled = traj if conf.gait.cycle_time is None else traj.scaled(conf.gait.cycle_time)
    tf = np.linspace(0.0, scaled.duration, int(round(scaled.duration * conf.gait.rate)) + 1)
    pos, _, idx = scaled.sample(tf)
    rows = ([t, x, y, scaled.phases[i].name] for t, (x, y), i in zip(tf, pos, idx))
    logio.write_rows(out / "foot_path.csv", ["t", "x", "y", "phase"], rows)
    support = static_stability(conf.scenario.state0, conf.scenario.params)
    summary = {
        "mode": conf.gait.mode.value,
        "duration": scaled.duration,
        "phases": [{"name": p.name, "duration": p.duration} for p in scaled.phases],
        "swing_clearance": scaled.swing_clearance(),
        "max_joint_speed_deg": float(np.degrees(np.abs(ref.qd).max())),
        "initial_stability": support.verdict.value,
    }
    (out / "gait_summary.json").write_text(dumps(summary))
    if run.plots:
        plots.reference_panel(ref, out / "joint_reference.svg")
    print(f"{summary['mode']}: {len(ref.t)} samples over {summary['duration']:.3f} s")
    return EXIT_OK


# -- metrics ------------------------------------------------------------------------


def file_metrics(path: Path, conf: cfgmod.Config, events: Path | None = None) -> dict:
    """Metrics of one ingested log; the format is detected from the header."""
    m = conf.metrics
    kind = logio.detect_format(path)
    series = logio.read_power_csv(path, m.V_avg)
    row: dict = {"file": str(path), "source": series.source}
    if series.source == "sim":
        table = series.table
        sidecar = events or path.with_name(path.stem + ".events.csv")
        takeoff = m.takeoff_time
        if takeoff is None and sidecar.exists():
            takeoff = next((t for t, k in logio.read_events_csv(sidecar) if k == EventKind.TAKEOFF.value), None)
        if takeoff is None:
            airborne = [i for i, mode in enumerate(table.mode) if mode == "Airborne"]
            if not airborne:
                raise logio.LogFormatError(f"{path}: no take-off found (no events sidecar, never airborne)")
            takeoff = float(table.t[airborne[0]])
        params = conf.scenario.effective_params
        m_b = params.total_mass if m.m_b is None else m.m_b
        speed = np.linalg.norm(table.vcom, axis=1)
        rise = table.com[:, 1] - table.com[0, 1]
        elastic = released_elastic_energy(table.t, table.q, takeoff, params)
        row.update(
            metrics.takeoff_metrics(
                table.t, speed, rise, m_b, takeoff, m.leg_length, energy=table.e_mech, label="E_mech", elastic=elastic
            )
        )
        return row
    row["format"] = kind
    e_total = metrics.energy_input(series.t, series.power)
    row["E_elec_total"] = e_total
    if m.takeoff_time is not None:
        row["E_elec"] = metrics.energy_input(series.t, series.power, until=m.takeoff_time)
        if m.takeoff_speed is not None and m.takeoff_height is not None and m.m_b is not None:
            e_out = metrics.energy_output(m.m_b, m.takeoff_speed, m.takeoff_height)
            row["E_out"] = e_out
            row["eta"] = metrics.efficiency(e_out, row["E_elec"])
            row["froude_takeoff"] = metrics.froude(m.takeoff_speed, m.leg_length)
    if m.distance is not None and m.m_b is not None:
        row["CoT"] = metrics.cost_of_transport(e_total, m.m_b, m.distance)
    return row


def cmd_metrics(run: RunConfig) -> int:
    conf = load_config(run)
    if not run.inputs:
        raise cfgmod.ConfigError("metrics needs at least one log file")
    for p in run.inputs:
        logio.detect_format(p)
    if run.dry_run:
        print(f"{len(run.inputs)} input file(s) recognised")
        return EXIT_OK
    out = _outdir(run)
    rows = [file_metrics(Path(p), conf, run.events) for p in run.inputs]
    (out / "metrics.json").write_text(dumps(rows))
    logio.write_table_csv(rows, out / "metrics.csv")
    for r in rows:
        print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    return EXIT_OK


# -- fit --------------------------------------------------------------------------


def fit_inputs(run: RunConfig):
    if run.inputs:
        return logio.read_pairs_csv(run.inputs[0])
    from importlib import resources

    path = resources.files("avianjump").joinpath("data/allometry_fixture.csv")
    with resources.as_file(path) as p:
        m_b, m_l = logio.read_pairs_csv(p)
    if run.noise:
        rng = np.random.default_rng(run.seed)
        m_l = m_l * (1.0 + run.noise * rng.standard_normal(len(m_l)))
    return m_b, m_l


def cmd_fit(run: RunConfig) -> int:
    m_b, m_l = fit_inputs(run)
    if run.dry_run:
        print(f"{len(m_b)} pairs read")
        return EXIT_OK
    out = _outdir(run)
    fit = metrics.fit_allometry(m_b, m_l)
    result = {"a": fit.a, "b": fit.b, "r2": fit.r2, "n": int(len(m_b)), "noise": run.noise, "seed": run.seed}
    (out / "fit.json").write_text(dumps(result))
    logio.write_pairs_csv(m_b, m_l, out / "fit_input.csv")
    if run.plots:
        xs = np.geomspace(m_b.min(), m_b.max(), 100)
        svg = plots.line_plot(
            [("data", m_b, m_l), ("fit", xs, fit.predict(xs))], "Leg mass allometry", "body mass (kg)", "leg mass (kg)"
        )
        (out / "fit.svg").write_text(svg)
    print(f"m_leg = {fit.a:.6g} * m_body^{fit.b:.6g}  (r2 = {fit.r2:.6f})")
    return EXIT_OK


# -- sweep ------------------------------------------------------------------------


def cmd_sweep(run: RunConfig) -> int:
    conf = load_config(run)
    if not conf.sweep:
        raise cfgmod.ConfigError(f"{conf.source}: [sweep] section defines no grid")
    if run.dry_run:
        n = int(np.prod([len(v) for v in conf.sweep.values()]))
        print(f"{conf.source}: ok, {n} cells")
        return EXIT_OK
    out = _outdir(run)
    workers = conf.sweep_workers if run.workers is None else run.workers
    rows = sweep(conf.scenario, conf.sweep, workers)
    logio.write_table_csv(rows, out / "sweep.csv")
    for r in rows:
        keys = ", ".join(f"{k}={r[k]}" for k in conf.sweep)
        print(f"{keys}: feasible={r['feasible']} {r['error']}".rstrip())
    if all(r["error"] for r in rows):
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "gait": cmd_gait, "metrics": cmd_metrics, "fit": cmd_fit, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (default: bundled scenario)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--plots", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=int, default=0, help="seed for noise fixtures")
    common.add_argument("--dry-run", action="store_true", help="validate inputs without running")

    parser = argparse.ArgumentParser(prog="avianjump", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    s = sub.add_parser("simulate", parents=[common], help="run the take-off scenario")
    s.add_argument("--flight", action="store_true", help="continue the flight until touchdown")
    sub.add_parser("gait", parents=[common], help="generate foot paths and joint references")
    m = sub.add_parser("metrics", parents=[common], help="energetics of hardware or simulated logs")
    m.add_argument("inputs", nargs="+", type=Path)
    m.add_argument("--events", type=Path, help="events sidecar for a sim log")
    f = sub.add_parser("fit", parents=[common], help="fit the leg-mass power law")
    f.add_argument("inputs", nargs="?", type=Path, help="CSV with body_mass_kg,leg_mass_kg")
    f.add_argument("--noise", type=float, default=0.0, help="multiplicative noise on the bundled fixture")
    w = sub.add_parser("sweep", parents=[common], help="parameter sweep from the [sweep] section")
    w.add_argument("--workers", type=int, help="worker processes")
    return parser


def parse_run(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    inputs = getattr(ns, "inputs", None) or []
    if isinstance(inputs, Path):
        inputs = [inputs]
    return RunConfig(
        subcommand=ns.subcommand,
        config=ns.config,
        out=ns.out,
        plots=ns.plots,
        seed=ns.seed,
        dry_run=ns.dry_run,
        inputs=tuple(inputs),
        flight=getattr(ns, "flight", False),
        workers=getattr(ns, "workers", None),
        noise=getattr(ns, "noise", 0.0),
        events=getattr(ns, "events", None),
    )


def main(argv=None) -> int:
    run = parse_run(argv)
    try:
        return COMMANDS[run.subcommand](run)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
