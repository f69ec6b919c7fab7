"""Standard runs and refinement studies shared by the scripts and the tests.

The three standard configurations are kept here as config text (the files
in ``configs/`` carry the same keys plus an output directory), so every
experiment goes through the same parser as the command line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import BaseGrid, SphereGrid
from .config import RunConfig, build_grid, build_warping, initial_rho, parse_config
from .diagnostics import (decay_fit, h_evolution_residual, laplace_phi_residual,
                          minkowski_residual, run_summary)
from .flow import FlowConfig, Trajectory, run, stable_dt, step
from .hypersurface import GraphState
from .isoperimetric import IsoProfile, build_profile
from .warping import WarpingProfile

STANDARD = {
    "sphere_sin": """
        phi = "sin"
        base = "sphere"
        resolution = 256
        r0 = 0.1
        r_bar = 1.5
        K = 1
        cfl = 0.5
        t_max = 20
        record_every = 100
        rho0 = "expr:0.8 + 0.2*cos(theta)"
    """,
    "torus_exp": """
        phi = "exp(1, 0.5)"
        base = "torus(2*pi)"
        resolution = 128
        r0 = -1
        r_bar = 1
        K = 0
        cfl = 0.25
        t_max = 1.5
        record_every = 20
        rho0 = "expr:0.3*cos(x) + 0.2*sin(y)"
    """,
    "torus_const": """
        phi = "const(1)"
        base = "torus(2*pi)"
        resolution = 128
        r0 = -1
        r_bar = 1
        K = 0
        cfl = 0.25
        t_max = 8
        record_every = 50
        rho0 = "expr:0.3*cos(x) + 0.2*sin(y) + 0.1*cos(x + 2*y)"
    """,
}

# smooth fixed state used by the residual refinement studies
SPHERE_STATE = "0.8 + 0.2*cos(theta)"


def standard_config(name: str, **overrides) -> RunConfig:
    """Parsed standard configuration, optionally with keys replaced."""
    text = "\n".join(line.strip() for line in STANDARD[name].strip().splitlines())
    config = parse_config(text)
    return config.replace(**overrides) if overrides else config


@dataclass
class Prepared:
    config: RunConfig
    grid: BaseGrid
    profile: WarpingProfile
    flow: FlowConfig
    initial: GraphState
    iso: IsoProfile


def prepare(config: RunConfig, keep_states: bool = False) -> Prepared:
    grid = build_grid(config)
    profile = build_warping(config, grid)
    rho0 = initial_rho(config, grid, profile)
    flow = FlowConfig(cfl=config.cfl, t_max=config.t_max, tol_osc=config.tol_osc,
                      record_every=config.record_every, K=config.K,
                      override_conditions=config.override_conditions,
                      h_evolution=config.h_evolution, keep_states=keep_states)
    return Prepared(config, grid, profile, flow, GraphState(rho0, 0.0),
                    build_profile(profile, grid.area))


def run_prepared(p: Prepared) -> Trajectory:
    return run(p.grid, p.profile, p.flow, p.initial, iso=p.iso)


def sphere_run(N: int, cfl: float = 0.5, record_every: int | None = None) -> dict:
    """The sin / S^2 standard run at resolution N, summarised.

    ``record_every`` defaults to 100 (N/256)^2 so that every resolution
    records at the same times.
    """
    if record_every is None:
        record_every = max(1, round(100 * (N / 256) ** 2))
    config = standard_config("sphere_sin", resolution=N, cfl=cfl, record_every=record_every)
    p = prepare(config)
    traj = run_prepared(p)
    recs = traj.records
    V0 = recs[0].V
    r_s = p.iso.r_star(V0)
    fit = decay_fit(recs, config.K)
    return {
        "N": N,
        "steps": traj.steps,
        "t_end": traj.final_state.t,
        "termination": traj.termination,
        "drift": abs(recs[-1].V - V0) / V0,
        "A_gap": abs(recs[-1].A - p.iso.xi(V0)) / recs[-1].A,
        "rho_dev": float(np.max(np.abs(traj.final_state.rho - r_s))),
        "osc": traj.final_state.osc,
        "rate": fit.rate,
        "quality": fit.quality,
        "mode": fit.mode,
        "summary": run_summary(recs),
        "trajectory": traj,
        "prepared": p,
    }


def residual_refinement(sizes=(128, 256, 512), state: str = SPHERE_STATE) -> dict:
    """Minkowski and Phi-balance residuals of a fixed sphere state at several N."""
    from .expr import evaluate

    out = {"N": list(sizes), "minkowski": [], "laplace_phi": []}
    for N in sizes:
        grid = SphereGrid(N)
        profile = WarpingProfile("sin", 0.1, 1.5)
        rho = GraphState(evaluate(state, grid.variables()))
        out["minkowski"].append(abs(minkowski_residual(grid, profile, rho, 1.0)))
        out["laplace_phi"].append(laplace_phi_residual(grid, profile, rho))
    return out


def h_evolution_refinement(sizes=(128, 256, 512), ratio: float | None = None) -> dict:
    """H-evolution residual on the first window of the sin / S^2 run.

    The window is (rho0, one step, two steps) with dt = ratio h^2, so the
    time step shrinks four-fold each time h halves. ``ratio`` defaults to
    the stable step of the coarsest grid.
    """
    config = standard_config("sphere_sin")
    out = {"N": list(sizes), "dt": [], "residual": []}
    for N in sizes:
        p = prepare(config.replace(resolution=N))
        if ratio is None:
            ratio = stable_dt(p.grid, p.profile, p.initial, config.cfl) / p.grid.h ** 2
        dt = ratio * p.grid.h ** 2
        s1 = step(p.grid, p.profile, p.initial, dt)
        s2 = step(p.grid, p.profile, s1, dt)
        out["dt"].append(dt)
        out["residual"].append(h_evolution_residual(p.grid, p.profile, [p.initial, s1, s2], config.K))
    return out


def observed_orders(values, ratio: float = 2.0) -> list[float]:
    """log_ratio(e_k / e_{k+1}) for consecutive refinement levels."""
    v = np.asarray(values, dtype=float)
    return list(np.log(v[:-1] / v[1:]) / np.log(ratio))
