"""Command line interface ``warpflow`` and the on-disk formats of a run.

Subcommands::

    warpflow run CONFIG [CONFIG ...] [--jobs J]
    warpflow profile CONFIG        # isoperimetric table only
    warpflow check CONFIG          # conditions, photon sphere, stability

Exit codes: 0 Converged, 2 TMaxReached, 3 NumericalFailure, 4 conditions
violated without override, 5 I/O error, 1 config or usage error. With
several configs ``run`` returns the largest code.

Output of ``run`` (in ``output_dir``, overridden by ``$WARPFLOW_OUTPUT``)::

    series.csv      one row per record, floats in shortest round-trip form
    report.json     conditions, photon sphere, stability, decay fit, endpoint
    state_<k>.csv   the k-th recorded state (only with emit_states = true)

Configs of one ``run`` command that resolve to the same output directory
write into ``<output_dir>/<config stem>`` instead.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .base import BaseGrid, SphereGrid
from .config import (RunConfig, build_grid, build_warping, format_errors, initial_rho,
                     load_config)
from .diagnostics import SERIES_COLUMNS, DiagnosticsRecord, decay_fit, run_summary
from .errors import ConfigError, InsufficientData, NonFinite, OutOfBand
from .flow import FlowConfig, Termination, Trajectory, run
from .hypersurface import GraphState
from .isoperimetric import IsoProfile, build_profile
from .warping import check_conditions, photon_sphere_roots, stability_check

log = logging.getLogger("warpflow")

EXIT_CONVERGED = 0
EXIT_CONFIG = 1
EXIT_TMAX = 2
EXIT_FAILURE = 3
EXIT_CONDITIONS = 4
EXIT_IO = 5

EXIT_CODES = {
    Termination.CONVERGED: EXIT_CONVERGED,
    Termination.TMAX: EXIT_TMAX,
    Termination.FAILURE: EXIT_FAILURE,
}
OUTPUT_ENV = "WARPFLOW_OUTPUT"


# ----------------------------------------------------------------- formats
def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_series(records, path, with_h: bool = False) -> Path:
    """``series.csv``: header row, then one row per record."""
    path = Path(path)
    header = list(SERIES_COLUMNS) + (["h_evolution_residual"] if with_h else [])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([_fmt(v) for v in r.row(with_h)])
    return path


def read_series(path) -> list[DiagnosticsRecord]:
    """Inverse of :func:`write_series` (bit-exact)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = list(SERIES_COLUMNS)
    if header[:len(expected)] != expected:
        raise ValueError(f"{path}: unexpected header {header!r}")
    out = []
    for row in body:
        vals = {k: (None if v == "" else float(v)) for k, v in zip(header, row)}
        out.append(DiagnosticsRecord(**vals))
    return out


def write_state(state: GraphState, grid: BaseGrid, path) -> Path:
    """``state_<k>.csv``: node coordinates and rho (shortest round-trip floats)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(grid, SphereGrid):
            w.writerow(["theta", "rho"])
            for th, r in zip(grid.theta, state.rho):
                w.writerow([repr(float(th)), repr(float(r))])
        else:
            w.writerow(["x", "y", "rho"])
            for x, y, r in zip(grid.x.ravel(), grid.y.ravel(), state.rho.ravel()):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(r))])
    return path


def _clean(obj):
    """Make a structure JSON-safe (non-finite floats become null)."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(data: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(data), indent=2) + "\n", encoding="utf-8")
    return path


def geometry_report(grid: BaseGrid, profile, iso: IsoProfile, K: float, volume: float) -> dict:
    """Conditions, photon-sphere roots and the stability margin at r*(volume)."""
    cond = check_conditions(profile, K)
    roots = photon_sphere_roots(profile)
    r_s = iso.r_star(volume)
    ok, margin = stability_check(profile, grid.lambda1(), r_s)
    return {
        "conditions": {**cond.to_dict(), "satisfied": cond.satisfied},
        "photon_sphere": roots.to_dict(),
        "stability": {"lambda1": grid.lambda1(), "r": r_s, "margin": margin, "stable": ok},
        "r_star": r_s,
    }


def endpoint_report(trajectory: Trajectory, iso: IsoProfile) -> dict:
    first, last = trajectory.records[0], trajectory.records[-1]
    r_s = iso.r_star(first.V)
    xi0 = iso.xi(first.V)
    rho = trajectory.final_state.rho
    return {
        "V0": first.V,
        "r_star": r_s,
        "xi_V0": xi0,
        "A_final": last.A,
        "A_gap_rel": abs(last.A - xi0) / last.A,
        "rho_final_min": float(rho.min()),
        "rho_final_max": float(rho.max()),
        "rho_final_dev": float(np.max(np.abs(rho - r_s))),
    }


def emit(trajectory: Trajectory, iso: IsoProfile, output_dir, *, grid: BaseGrid, profile,
         config: RunConfig | None = None, K: float | None = None) -> Path:
    """Write series.csv, report.json and (optionally) the state files."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with_h = bool(config.h_evolution) if config is not None else any(
        r.h_evolution_residual is not None for r in trajectory.records)
    K = config.K if config is not None else (K if K is not None else trajectory.conditions.K)
    write_series(trajectory.records, out / "series.csv", with_h)
    try:
        fit = decay_fit(trajectory.records, K)
        decay = {**fit.to_dict(), "increasing": fit.increasing}
    except InsufficientData as exc:
        decay = {"mode": None, "rate": None, "quality": None, "points": 0, "error": str(exc)}
    report = {
        "termination": trajectory.termination.value,
        "admissible": trajectory.admissible,
        "steps": trajectory.steps,
        "t_final": trajectory.final_state.t,
        "message": trajectory.message,
        **geometry_report(grid, profile, iso, K, trajectory.records[0].V),
        "decay": decay,
        "endpoint": endpoint_report(trajectory, iso),
        "summary": {**run_summary(trajectory.records),
                    "rho_min": trajectory.rho_min, "rho_max": trajectory.rho_max},
    }
    if config is not None:
        report["config"] = config.to_dict()
    write_json(report, out / "report.json")
    if config is None or config.emit_states:
        for k, state in enumerate(trajectory.states):
            write_state(state, grid, out / f"state_{k}.csv")
    return out


# ------------------------------------------------------------- execution
def output_dir(config: RunConfig, subdir: str | None = None) -> Path:
    """``$WARPFLOW_OUTPUT`` if set, else the config's output_dir (relative to the cwd)."""
    path = Path(os.environ.get(OUTPUT_ENV) or config.output_dir)
    return path / subdir if subdir else path


def flow_config(config: RunConfig) -> FlowConfig:
    return FlowConfig(cfl=config.cfl, t_max=config.t_max, tol_osc=config.tol_osc,
                      record_every=config.record_every, K=config.K,
                      override_conditions=config.override_conditions,
                      h_evolution=config.h_evolution, keep_states=config.emit_states)


def execute(config: RunConfig, subdir: str | None = None) -> int:
    """Run one validated config end to end and return the exit code."""
    out = output_dir(config, subdir)
    try:
        grid = build_grid(config)
        profile = build_warping(config, grid)
        try:
            rho0 = initial_rho(config, grid, profile)
        except (OutOfBand, NonFinite, ValueError) as exc:
            log.error("initial data rejected: %s", exc)
            return EXIT_FAILURE
        iso = build_profile(profile, grid.area)
        cond = check_conditions(profile, config.K)
        if not cond.satisfied and not config.override_conditions:
            log.error("conditions 0 <= Q <= K violated for K=%r (min Q=%r, max Q=%r); "
                      "set override_conditions = true to run anyway",
                      config.K, cond.min_Q, cond.max_Q)
            return EXIT_CONDITIONS
        if not cond.satisfied:
            log.warning("running outside the admissible conditions (override)")
        log.info("running %s on %s, N=%d", profile.source, config.base, config.resolution)
        traj = run(grid, profile, flow_config(config), GraphState(rho0, 0.0), iso=iso)
        emit(traj, iso, out, grid=grid, profile=profile, config=config)
        log.info("%s after %d steps, t=%r; output in %s", traj.termination.value, traj.steps,
                 traj.final_state.t, out)
        if traj.message:
            log.warning("%s", traj.message)
        return EXIT_CODES[traj.termination]
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


def execute_profile(config: RunConfig) -> int:
    try:
        grid = build_grid(config)
        profile = build_warping(config, grid)
        iso = build_profile(profile, grid.area)
        out = output_dir(config)
        out.mkdir(parents=True, exist_ok=True)
        path = iso.write_csv(out / "profile.csv")
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    print(path)
    return EXIT_CONVERGED


def execute_check(config: RunConfig) -> int:
    grid = build_grid(config)
    profile = build_warping(config, grid)
    iso = build_profile(profile, grid.area)
    try:
        rho0 = initial_rho(config, grid, profile)
    except (OutOfBand, NonFinite, ValueError) as exc:
        log.error("initial data rejected: %s", exc)
        return EXIT_FAILURE
    from .hypersurface import enclosed_volume

    report = geometry_report(grid, profile, iso, config.K, enclosed_volume(grid, profile, rho0))
    report["profile"] = profile.source
    report["band"] = [profile.r0, profile.r_bar]
    try:
        out = output_dir(config)
        out.mkdir(parents=True, exist_ok=True)
        write_json(report, out / "check.json")
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    print(json.dumps(_clean(report), indent=2))
    return EXIT_CONVERGED if report["conditions"]["satisfied"] else EXIT_CONDITIONS


def _load(path) -> RunConfig | None:
    try:
        return load_config(path)
    except ConfigError as exc:
        log.error("invalid config %s:\n%s", path, format_errors(exc))
    except OSError as exc:
        log.error("cannot read %s: %s", path, exc)
    except UnicodeDecodeError as exc:
        log.error("%s is not UTF-8: %s", path, exc)
    return None


def _run_one(args) -> int:
    path, subdir, level = args
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    config = _load(path)
    if config is None:
        return EXIT_CONFIG
    return execute(config, subdir)


def _shared_output_subdirs(paths) -> list[str | None]:
    """Per-config subdirectory (the file stem) for configs that would
    otherwise write into the same output directory."""
    targets = []
    for path in paths:
        try:
            targets.append(output_dir(load_config(path)).resolve())
        except (ConfigError, OSError, UnicodeDecodeError):
            targets.append(None)
    counts = {}
    for t in targets:
        counts[t] = counts.get(t, 0) + 1
    return [p.stem if t is not None and counts[t] > 1 else None for p, t in zip(paths, targets)]


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors, which would read as TMaxReached."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="warpflow", description="Volume-preserving flow of graphs in warped products.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run the flow and write series.csv / report.json")
    r.add_argument("configs", nargs="+", type=Path)
    r.add_argument("--jobs", type=int, default=1, help="configs to run concurrently")
    pr = sub.add_parser("profile", help="write the isoperimetric table (r, A, V)")
    pr.add_argument("config", type=Path)
    c = sub.add_parser("check", help="report conditions, photon sphere and stability")
    c.add_argument("config", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    if args.command == "run":
        if args.jobs < 1:
            log.error("--jobs must be >= 1")
            return EXIT_CONFIG
        subdirs = _shared_output_subdirs(args.configs)
        tasks = [(path, sub, level) for path, sub in zip(args.configs, subdirs)]
        if args.jobs == 1 or len(tasks) == 1:
            codes = [_run_one(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_run_one, tasks))
        return max(codes)
    config = _load(args.config)
    if config is None:
        return EXIT_CONFIG
    if args.command == "profile":
        return execute_profile(config)
    return execute_check(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
