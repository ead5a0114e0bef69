"""Command-line front end.

Subcommands:
  simulate     run a configured scenario; write trajectory CSV, report,
               figures
  check-gains  print the gain certificate for a config
  bounds       export the rho/L/mu envelopes over a gap grid as CSV
  sweep        batch runs over a grid of gains / initial positions /
               fringing realizations, resumable per row

Exit codes are stable API: 0 success, 2 configuration error, 3 uncertified
gains without --force, 4 diverged simulation.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis
from .config import Config, ConfigError, OutputSpec, find_config, load_config
from .controller import certify_gains
from .model import PlantParams
from .sim import (
    DivergenceError,
    Scenario,
    UncertifiedGainsError,
    run,
    sample_fringing,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNCERTIFIED = 3
EXIT_DIVERGED = 4

SWEEP_COLUMNS = (
    "row",
    "alpha1",
    "alpha2",
    "x1_0",
    "realization",
    "status",
    "settling_time",
    "overshoot",
    "steady_state_error",
    "max_abs_u",
    "reaching_time",
    "ultimate_bound_ok",
    "lyapunov_violations",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _apply_overrides(cfg: Config, args) -> Config:
    scenario = cfg.scenario
    if args.duration is not None:
        scenario = replace(scenario, duration=args.duration)
    if args.dt is not None:
        scenario = replace(scenario, dt=args.dt)
    if getattr(args, "force", False):
        scenario = replace(scenario, allow_uncertified=True)
    return replace(cfg, scenario=scenario)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(find_config(args.config)), args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: OutputSpec = cfg.outputs

    cert = certify_gains(cfg.gains, cfg.plant, cfg.scenario.reference.max_abs())
    started = time.perf_counter()
    try:
        traj = run(cfg.scenario, cert)
    except UncertifiedGainsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    elapsed = time.perf_counter() - started

    csv_path = out_dir / outputs.trajectory_csv
    traj.to_csv(csv_path)
    report = analysis.build_report(traj, cert, cfg.plant)
    report_path = out_dir / outputs.report
    report_path.write_text(report.to_text(), encoding="ascii")

    figures: list[Path] = []
    if outputs.figures and not args.no_figures:
        from .plots import render_trajectory_figures

        figures = render_trajectory_figures(traj, out_dir, cert)

    _say(args, report.to_text().rstrip())
    _say(args, f"trajectory: {csv_path}")
    _say(args, f"report:     {report_path}")
    for fig in figures:
        _say(args, f"figure:     {fig}")
    _say(args, f"wall time:  {elapsed:.2f} s for {len(traj)} logged rows")
    return EXIT_OK


def cmd_check_gains(args) -> int:
    cfg = load_config(find_config(args.config))
    y_r_max = args.y_r_max if args.y_r_max is not None else cfg.scenario.reference.max_abs()
    cert = certify_gains(cfg.gains, cfg.plant, y_r_max)
    (q11, q12), (_, q22) = cert.q
    det = q11 * q22 - q12 * q12
    lines = [
        "gain certificate",
        f"  alpha1 = {cert.gains.alpha1!r}",
        f"  alpha2 = {cert.gains.alpha2!r}",
        f"  epsilon1 = {cert.gains.epsilon1!r}",
        f"  theta = {cert.gains.theta!r}",
        f"  a = {cert.a!r}",
        f"  b = {cert.b!r}",
        f"  Q = [[{q11!r}, {q12!r}], [{q12!r}, {q22!r}]]",
        f"  det(Q) = {det!r}",
        f"  eigenvalues = [{cert.eigenvalues[0]!r}, {cert.eigenvalues[1]!r}]",
        f"  negative_definite = {_fmt(cert.negative_definite)}",
        f"  certified = {_fmt(cert.certified)}",
        f"  y_r_max = {cert.y_r_max!r}",
        f"  delta = {cert.delta!r}",
        f"  alpha (certified decay) = {cert.alpha!r}",
        f"  radius = {cert.radius!r}",
        f"  alpha_extreme = {cert.alpha_extreme!r}",
        f"  radius_extreme = {cert.radius_extreme!r}",
    ]
    print("\n".join(lines))
    return EXIT_OK if cert.certified else EXIT_UNCERTIFIED


def cmd_bounds(args) -> int:
    from .bounds import envelope_table

    cfg = load_config(find_config(args.config))
    stroke = cfg.plant.fringing.stroke
    x_max = args.x1_max if args.x1_max is not None else stroke
    grid = np.linspace(0.0, x_max, args.points)
    table = envelope_table(cfg.plant, grid)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "bounds.csv"
    columns = ("x1", "rho_lo", "rho_hi", "L_lo", "L_hi", "mu_lo", "mu_hi")
    with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in zip(*(table[c] for c in columns)):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    _say(args, f"envelopes:  {csv_path}")
    if not args.no_figures:
        from .plots import render_envelope_figure

        fig = render_envelope_figure(cfg.plant, grid, out_dir / "bounds.png")
        _say(args, f"figure:     {fig}")
    return EXIT_OK


def _sweep_rows(cfg: Config) -> list[dict]:
    sweep = cfg.sweep
    rows: list[dict] = []
    if sweep is None or sweep.is_empty():
        return rows
    fringings: list[tuple[int, PlantParams]] = [(0, cfg.plant)]
    if sweep.fringing_realizations > 0:
        realizations = sample_fringing(
            sweep.seed,
            cfg.plant.fringing.bounds,
            sweep.fringing_realizations,
            stroke=cfg.plant.fringing.stroke,
        )
        fringings = [(i + 1, replace(cfg.plant, fringing=f)) for i, f in enumerate(realizations)]
    index = 0
    for a1 in sweep.alpha1:
        for a2 in sweep.alpha2:
            gains = replace(cfg.gains, alpha1=a1, alpha2=a2)
            for x1_0 in sweep.initial_positions:
                for realization, plant in fringings:
                    plant_r = replace(plant, x0=replace(plant.x0, x1=x1_0))
                    scen = replace(cfg.scenario, plant=plant_r, gains=gains)
                    rows.append(
                        {
                            "row": index,
                            "alpha1": a1,
                            "alpha2": a2,
                            "x1_0": x1_0,
                            "realization": realization,
                            "scenario": scen,
                        }
                    )
                    index += 1
    return rows


def _run_sweep_row(row: dict) -> list[str]:
    scen: Scenario = row["scenario"]
    cert = certify_gains(scen.gains, scen.plant, scen.reference.max_abs())
    base = [
        str(row["row"]),
        repr(float(row["alpha1"])),
        repr(float(row["alpha2"])),
        repr(float(row["x1_0"])),
        str(row["realization"]),
    ]
    try:
        traj = run(scen, cert)
    except UncertifiedGainsError:
        return base + ["uncertified"] + ["nan"] * 5 + ["false", "0"]
    except DivergenceError:
        return base + ["diverged"] + ["nan"] * 5 + ["false", "0"]
    report = analysis.build_report(traj, cert, scen.plant)
    return base + [
        "ok",
        repr(report.settling_time),
        repr(report.overshoot),
        repr(report.steady_state_error),
        repr(report.max_abs_u),
        repr(report.reaching_time),
        _fmt(report.ultimate_bound_ok),
        str(report.lyapunov_violations),
    ]


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(find_config(args.config)), args)
    out_dir = Path(args.out_dir)
    rows_dir = out_dir / "sweep_rows"
    rows_dir.mkdir(parents=True, exist_ok=True)
    rows = _sweep_rows(cfg)

    lines: list[str] = []
    for row in rows:
        marker = rows_dir / f"row_{row['row']:04d}.done"
        row_file = rows_dir / f"row_{row['row']:04d}.csv"
        if marker.is_file() and row_file.is_file():
            lines.append(row_file.read_text(encoding="ascii").rstrip("\n"))
            continue
        record = ",".join(_run_sweep_row(row))
        tmp = row_file.with_suffix(".tmp")
        tmp.write_text(record + "\n", encoding="ascii")
        tmp.replace(row_file)
        marker.touch()
        lines.append(record)
        _say(args, f"row {row['row']}: {record.split(',')[5]}")

    csv_path = out_dir / "sweep.csv"
    tmp = csv_path.with_suffix(".tmp")
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for line in lines:
            fh.write(line + "\n")
    tmp.replace(csv_path)
    _say(args, f"sweep:      {csv_path} ({len(lines)} rows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emasim",
        description="Uncertain electromagnetic-actuator simulation and robust-control toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, overrides: bool = False) -> None:
        p.add_argument("--config", required=True, help="config path or bundled name (e.g. step3mm)")
        p.add_argument("--out-dir", default="out", help="artifact directory (default: ./out)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument(
            "--force", action="store_true",
            help="run even with uncertified gains (no effect on read-only commands)",
        )
        if overrides:
            p.add_argument("--duration", type=float, default=None, help="override scenario duration [s]")
            p.add_argument("--dt", type=float, default=None, help="override integration step [s]")

    p_sim = sub.add_parser("simulate", help="run one scenario and write artifacts")
    common(p_sim, overrides=True)
    p_sim.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_sim.set_defaults(fn=cmd_simulate)

    p_check = sub.add_parser("check-gains", help="print the gain certificate")
    common(p_check)
    p_check.add_argument("--y-r-max", type=float, default=None, help="reference bound [m] (default: from config)")
    p_check.set_defaults(fn=cmd_check_gains)

    p_bounds = sub.add_parser("bounds", help="export rho/L/mu envelopes as CSV")
    common(p_bounds)
    p_bounds.add_argument("--points", type=int, default=121, help="grid points (default 121)")
    p_bounds.add_argument("--x1-max", type=float, default=None, help="grid end [m] (default: stroke)")
    p_bounds.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_bounds.set_defaults(fn=cmd_bounds)

    p_sweep = sub.add_parser("sweep", help="batch runs over the config sweep grid")
    common(p_sweep, overrides=True)
    p_sweep.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
