"""Explicit time stepping of rho_t = (n phi' - H u) omega / phi."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .base import BaseGrid, SphereGrid
from .diagnostics import DiagnosticsRecord, record
from .errors import ConditionsViolated, NonFinite, OutOfBand
from .hypersurface import GraphState, fast_speed
from .isoperimetric import IsoProfile, build_profile
from .warping import ConditionReport, WarpingProfile, check_conditions


@dataclass(frozen=True)
class FlowConfig:
    """Time-stepping and recording parameters.

    Parameters
    ----------
    cfl : float
        Fraction of the parabolic bound h^2 min(omega), in (0, 1].
    t_max : float
        Final time.
    tol_osc : float
        The run is Converged once max rho - min rho < tol_osc.
    record_every : int
        Steps between diagnostics records (t = 0 and the final state are
        always recorded).
    K : float
        Curvature constant for the admissibility check and the residuals.
    override_conditions : bool
        Run even if the profile violates 0 <= Q <= K (the trajectory is
        then flagged non-admissible).
    h_evolution : bool
        Evaluate the H-evolution residual at every record.
    keep_states : bool
        Store the GraphState of every record in the trajectory.
    """

    cfl: float = 0.2
    t_max: float = 10.0
    tol_osc: float = 1e-8
    record_every: int = 100
    K: float = 1.0
    override_conditions: bool = False
    h_evolution: bool = False
    keep_states: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.tol_osc > 0:
            raise ValueError("tol_osc must be positive")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if self.K < 0:
            raise ValueError("K must be non-negative")


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    TMAX = "TMaxReached"
    FAILURE = "NumericalFailure"


@dataclass
class Trajectory:
    states: list
    records: list
    termination: Termination
    conditions: ConditionReport
    admissible: bool
    final_state: GraphState
    steps: int = 0
    message: str = ""
    rho_min: float = math.inf      # extrema of rho over every accepted step
    rho_max: float = -math.inf
    iso: IsoProfile | None = field(default=None, repr=False)


def stable_dt(grid: BaseGrid, profile: WarpingProfile, state, cfl: float,
              remaining: float | None = None) -> float:
    """cfl * h_eff^2 * min(omega), capped by the remaining time."""
    rho = state.rho if isinstance(state, GraphState) else np.asarray(state, dtype=float)
    phi = profile.phi(rho)
    omega_min = float(np.sqrt(np.min(phi * phi + grid.gradient_sq(rho))))
    dt = cfl * grid.h_eff ** 2 * omega_min
    if remaining is not None:
        dt = min(dt, remaining)
    return dt


def _rk4(grid, profile, rho, dt, work):
    k1, k2, k3, k4 = work
    fast_speed(grid, profile, rho, k1)
    fast_speed(grid, profile, rho + 0.5 * dt * k1, k2)
    fast_speed(grid, profile, rho + 0.5 * dt * k2, k3)
    fast_speed(grid, profile, rho + dt * k3, k4)
    new = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    profile.check_band(new)
    return new


def step(grid: BaseGrid, profile: WarpingProfile, state: GraphState, dt: float,
         work=None) -> GraphState:
    """One classical RK4 step; raises OutOfBand / NonFinite from any stage."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    work = work if work is not None else [np.empty(grid.shape) for _ in range(4)]
    new = _rk4(grid, profile, state.rho, dt, work)
    return GraphState(new, state.t + dt)


class _Stepper:
    """RK4 stepper choosing the fused compiled kernel when phi has one."""

    def __init__(self, grid: BaseGrid, profile: WarpingProfile):
        self.grid = grid
        self.profile = profile
        self.code = _kernels.KIND_CODES.get(profile.kind)
        self.sphere = isinstance(grid, SphereGrid)
        self.shape2 = (grid.resolution, 1) if self.sphere else grid.shape
        self.cot = grid.cot if self.sphere else np.zeros(1)
        self.work = np.empty((9,) + self.shape2)
        self.generic_work = [np.empty(grid.shape) for _ in range(4)]

    def step(self, rho, dt):
        if self.code is None:
            return _rk4(self.grid, self.profile, rho, dt, self.generic_work)
        p = self.profile
        out = np.empty(self.shape2)
        status = _kernels.rk4_step(
            np.ascontiguousarray(rho).reshape(self.shape2), dt, self.code, p.a, p.b,
            p.r0, p.r_bar, self.cot, self.grid.h, float(p.n), self.sphere, self.work, out)
        if status == _kernels.NON_FINITE:
            raise NonFinite("non-finite value in an RK4 stage")
        if status == _kernels.OUT_OF_BAND:
            stage = np.concatenate((self.work[4].ravel(), np.ravel(rho)))
            raise OutOfBand(_first_outside(stage, p), p.r0, p.r_bar)
        return out.reshape(self.grid.shape)

    def min_omega(self, rho):
        if self.code is None:
            phi = self.profile.phi(rho)
            return float(np.sqrt(np.min(phi * phi + self.grid.gradient_sq(rho))))
        p = self.profile
        phi = self.work[5].reshape(self.grid.shape)
        _kernels.fill_phi_only(rho, self.code, p.a, p.b, phi)
        if self.sphere:
            return _kernels.sphere_min_omega(rho, phi, self.grid.h)
        return _kernels.torus_min_omega(rho, phi, self.grid.h)


def _first_outside(arr, profile):
    arr = np.asarray(arr)
    bad = arr[(arr < profile.r0) | (arr > profile.r_bar)]
    return float(bad[0]) if bad.size else float("nan")


def _window(grid, profile, state, dt, work):
    s1 = step(grid, profile, state, dt, work)
    s2 = step(grid, profile, s1, dt, work)
    return [state, s1, s2]


def run(grid: BaseGrid, profile: WarpingProfile, config: FlowConfig, initial: GraphState,
        iso: IsoProfile | None = None, progress=None) -> Trajectory:
    """Integrate until osc rho < tol_osc, t = t_max, or a numerical failure.

    Raises
    ------
    ConditionsViolated
        If the profile fails the conditions for ``config.K`` and the
        override flag is off.
    OutOfBand
        If the initial state is not inside the band.
    """
    if profile.n != grid.n:
        raise ValueError(f"profile dimension n={profile.n} does not match the base (n={grid.n})")
    cond = check_conditions(profile, config.K)
    if not cond.satisfied and not config.override_conditions:
        raise ConditionsViolated(cond)
    rho = grid.field(initial.rho)
    profile.check_band(rho)
    if np.min(profile.phi(rho)) <= 0:
        raise OutOfBand(float(rho.min()), profile.r0, profile.r_bar)
    iso = iso if iso is not None else build_profile(profile, grid.area)
    K = config.K
    work = [np.empty(grid.shape) for _ in range(4)]

    def make_record(s, dt_hint):
        window = None
        if config.h_evolution:
            try:
                window = _window(grid, profile, s, dt_hint, work)
            except (OutOfBand, NonFinite):
                window = None
        return record(grid, profile, s, iso, K, window)

    state = GraphState(rho, initial.t)
    t_end = float(config.t_max)
    stepper = _Stepper(grid, profile)
    dt0 = stable_dt(grid, profile, state, config.cfl)
    records: list[DiagnosticsRecord] = [make_record(state, dt0)]
    states = [state] if config.keep_states else []
    steps = 0
    last_recorded = 0
    rho_min, rho_max = float(rho.min()), float(rho.max())
    termination = Termination.TMAX
    message = ""
    dt = dt0

    def on_record():
        nonlocal last_recorded
        records.append(make_record(state, dt))
        if config.keep_states:
            states.append(state)
        last_recorded = steps
        if progress is not None:
            progress(state, records[-1])

    if stepper.code is not None:
        # compiled loop between records
        p = profile
        work_rho = np.array(rho, dtype=float).reshape(stepper.shape2)
        out = np.empty(stepper.shape2)
        stats = np.array([state.t, dt, rho_min, rho_max, 0.0])
        while True:
            budget = config.record_every - steps % config.record_every
            status = _kernels.advance(
                work_rho, state.t, t_end, config.cfl, grid.h_eff, budget, config.tol_osc,
                stepper.code, p.a, p.b, p.r0, p.r_bar, stepper.cot, grid.h, float(p.n),
                stepper.sphere, stepper.work, out, stats)
            done = int(stats[4])
            if done:
                steps += done
                dt = float(stats[1])
                state = GraphState(work_rho.reshape(grid.shape), float(stats[0]))
            rho_min, rho_max = float(stats[2]), float(stats[3])
            if status == _kernels.BUDGET:
                on_record()
                continue
            if status == _kernels.CONVERGED:
                termination = Termination.CONVERGED
            elif status == _kernels.TMAX:
                termination = Termination.TMAX
            else:
                termination = Termination.FAILURE
                if status == _kernels.NON_FINITE:
                    exc = NonFinite("non-finite value in an RK4 stage")
                else:
                    stage = np.concatenate((stepper.work[4].ravel(), out.ravel()))
                    exc = OutOfBand(_first_outside(stage, p), p.r0, p.r_bar)
                message = f"step {steps + 1} at t={state.t!r}: {exc}"
            break
    else:
        while True:
            if state.osc < config.tol_osc:
                termination = Termination.CONVERGED
                break
            remaining = t_end - state.t
            if remaining <= 1e-14 * max(1.0, t_end):
                termination = Termination.TMAX
                break
            dt = min(config.cfl * grid.h_eff ** 2 * stepper.min_omega(state.rho), remaining)
            try:
                try:
                    new_rho = stepper.step(state.rho, dt)
                except NonFinite:
                    dt = 0.5 * dt
                    new_rho = stepper.step(state.rho, dt)
            except (NonFinite, OutOfBand) as exc:
                termination = Termination.FAILURE
                message = f"step {steps + 1} at t={state.t!r}: {exc}"
                break
            t_new = t_end if dt == remaining else state.t + dt
            state = GraphState(new_rho, t_new)
            steps += 1
            rho_min = min(rho_min, float(new_rho.min()))
            rho_max = max(rho_max, float(new_rho.max()))
            if steps % config.record_every == 0:
                on_record()
    if last_recorded != steps:
        records.append(make_record(state, dt))
        if config.keep_states:
            states.append(state)
    return Trajectory(
        states=states,
        records=records,
        termination=termination,
        conditions=cond,
        admissible=cond.satisfied,
        final_state=state,
        steps=steps,
        message=message,
        rho_min=rho_min,
        rho_max=rho_max,
        iso=iso,
    )
