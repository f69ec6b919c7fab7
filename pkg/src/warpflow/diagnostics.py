"""Identity residuals, per-state records and per-run statistics.

The residuals measure how well the discrete geometry satisfies exact
identities of the continuous problem:

* Minkowski balance  (n-1) int phi' sigma_1 = 2 int sigma_2 u + int Ric(nu, grad Phi)
* Phi balance        Delta_g Phi = n phi' - H u
* the evolution equation of H along the flow.

Each is exactly zero on slices and O(h^2) on smooth states.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .base import BaseGrid
from .errors import InsufficientData, InsufficientWindow
from .hypersurface import (ExtrinsicBundle, GraphState, area, enclosed_volume, extrinsic,
                           shape_from_h)
from .warping import WarpingProfile

SERIES_COLUMNS = (
    "t", "V", "A", "max_grad_sq", "osc_rho", "min_u", "max_H",
    "minkowski_residual", "laplace_phi_residual", "iso_slack", "shape_consistency",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    V: float
    A: float
    max_grad_sq: float
    osc_rho: float
    min_u: float
    max_H: float
    minkowski_residual: float
    laplace_phi_residual: float
    iso_slack: float
    shape_consistency: float
    h_evolution_residual: float | None = None

    def row(self, with_h: bool = False) -> list:
        vals = [getattr(self, c) for c in SERIES_COLUMNS]
        if with_h:
            vals.append(self.h_evolution_residual)
        return vals

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecayFit:
    mode: str          # "Exponential" or "Algebraic"
    rate: float
    quality: float     # R^2 of the straight-line fit
    points: int

    @property
    def increasing(self) -> bool:
        """For the algebraic mode: 1/max|grad rho|^2 grows along the window."""
        return self.rate > 0

    def to_dict(self) -> dict:
        return {"mode": self.mode, "rate": self.rate, "quality": self.quality,
                "points": self.points}


def _measure(grid: BaseGrid, ext: ExtrinsicBundle):
    return grid.weights * ext.area_element


def _g_inner(gi, a, b):
    return gi[0] * a[0] * b[0] + gi[1] * (a[0] * b[1] + a[1] * b[0]) + gi[2] * a[1] * b[1]


def curvature_term(grid: BaseGrid, profile: WarpingProfile, ext: ExtrinsicBundle, K: float, Q):
    """g^{ij} Ric(nu, e_i) grad_j Phi on an Einstein base.

    -(n-1)(K - Q)|grad rho|^2/omega^3 - (n-1)(K_base - K)|grad rho|^2/omega^3.
    For closed-form kinds Q is symbolic, so both coefficients are exact
    zeros in the equality cases (Q = K = K_base).
    """
    n = profile.n
    w3 = ext.omega ** 3
    c_profile = K - Q
    c_base = grid.k_base - K
    return -(n - 1) * c_profile * ext.grad_sq / w3 - (n - 1) * c_base * ext.grad_sq / w3


def minkowski_residual(grid: BaseGrid, profile: WarpingProfile, state, K: float,
                       ext: ExtrinsicBundle | None = None) -> float:
    """(LHS - RHS) of the Minkowski balance, normalised by the area."""
    rho = state.rho if isinstance(state, GraphState) else np.asarray(state, dtype=float)
    ext = ext if ext is not None else extrinsic(grid, profile, rho)
    n = profile.n
    dmu = _measure(grid, ext)
    Q = profile.Q(rho, check=False)
    ric = curvature_term(grid, profile, ext, K, Q)
    lhs = (n - 1) * np.sum(ext.dphi * ext.sigma1 * dmu)
    rhs = 2.0 * np.sum(ext.sigma2 * ext.u * dmu) + np.sum(ric * dmu)
    return float((lhs - rhs) / np.sum(dmu))


def induced_laplacian(grid: BaseGrid, profile: WarpingProfile, ext: ExtrinsicBundle, f):
    """Laplace-Beltrami of the induced metric, (1/sqrt g) d_i(sqrt g g^ij d_j f)."""
    jac = ext.area_element                     # sqrt(det g) / sqrt(det g~)
    gi = ext.induced_inverse()
    M = tuple(jac * c for c in gi)
    return grid.div_tensor_grad(M, f) / jac


def _weighted_norm(grid, ext, field_):
    dmu = _measure(grid, ext)
    return float(math.sqrt(np.sum(field_ * field_ * dmu)) / np.sum(dmu))


def laplace_phi_residual(grid: BaseGrid, profile: WarpingProfile, state,
                         ext: ExtrinsicBundle | None = None) -> float:
    """|| Delta_g Phi(rho) - (n phi' - H u) ||_{L^2(dmu)} / A."""
    rho = state.rho if isinstance(state, GraphState) else np.asarray(state, dtype=float)
    ext = ext if ext is not None else extrinsic(grid, profile, rho)
    lap = induced_laplacian(grid, profile, ext, profile.big_phi(rho))
    res = lap - (profile.n * ext.dphi - ext.H * ext.u)
    return _weighted_norm(grid, ext, res)


def shape_consistency(grid: BaseGrid, profile: WarpingProfile, state,
                      ext: ExtrinsicBundle | None = None) -> float:
    """Largest node gap between the b_ij and h_ij mean curvatures.

    The gap is measured relative to the curvature scale of the state,
    max(max |H|, max 1/phi), so that states with H = 0 (flat slices) are
    well defined.
    """
    ext = ext if ext is not None else extrinsic(grid, profile, state)
    h_route = shape_from_h(grid, ext)
    H_h = h_route[..., 0, 0] + h_route[..., 1, 1]
    scale = max(float(np.max(np.abs(ext.H))), float(np.max(1.0 / ext.phi)))
    return float(np.max(np.abs(ext.H - H_h)) / scale)


def h_evolution_rhs(grid: BaseGrid, profile: WarpingProfile, state, K: float,
                    ext: ExtrinsicBundle | None = None):
    """Right side of the H evolution at fixed base point.

    Normal-velocity form

        u Lap H + H <dH, dPhi> + 2 <dH, du> + phi'(H^2 - n|A|^2)
        - (n/phi^2)[(n-1)phi'(K - phi'^2) + (n-2) phi phi' phi'' + phi^2 phi'''](1 - u^2/phi^2)
        - n (n-1) phi' (K_base - K) |grad rho|^2 / (phi^2 omega^2)

    plus the tangential term (rho_t / phi) <dH, dPhi> that appears because
    the graph moves with velocity rho_t d_r rather than along its normal.
    Inner products use the induced metric.
    """
    rho = state.rho if isinstance(state, GraphState) else np.asarray(state, dtype=float)
    ext = ext if ext is not None else extrinsic(grid, profile, rho)
    n = profile.n
    phi, dphi, ddphi, dddphi = profile.derivatives(rho)
    H, u, omega = ext.H, ext.u, ext.omega
    gi = ext.induced_inverse()
    dH = grid.gradient(H)
    du = grid.gradient(u)
    dPhi = (phi * ext.grad[0], phi * ext.grad[1])
    dH_dPhi = _g_inner(gi, dH, dPhi)
    bracket = ((n - 1) * dphi * (K - dphi * dphi) + (n - 2) * phi * dphi * ddphi
               + phi * phi * dddphi)
    rhs = (u * induced_laplacian(grid, profile, ext, H)
           + H * dH_dPhi
           + 2.0 * _g_inner(gi, dH, du)
           + dphi * (H * H - n * ext.norm_A_sq)
           - n / (phi * phi) * bracket * (1.0 - u * u / (phi * phi))
           - n * (n - 1) * dphi * (grid.k_base - K) * ext.grad_sq / (phi * phi * omega * omega))
    rho_t = (n * dphi - H * u) * omega / phi
    return rhs + rho_t / phi * dH_dPhi, ext


def h_evolution_residual(grid: BaseGrid, profile: WarpingProfile, window, K: float) -> float:
    """Central-difference dH/dt minus :func:`h_evolution_rhs` on a 3-state window."""
    if len(window) < 3:
        raise InsufficientWindow("need three consecutive states")
    s0, s1, s2 = window[-3], window[-2], window[-1]
    dt = 0.5 * (s2.t - s0.t)
    if not dt > 0 or abs((s2.t - s1.t) - (s1.t - s0.t)) > 1e-9 * dt:
        raise InsufficientWindow("window states must be equally spaced in time")
    H0 = extrinsic(grid, profile, s0).H
    H2 = extrinsic(grid, profile, s2).H
    rhs, ext = h_evolution_rhs(grid, profile, s1, K)
    return _weighted_norm(grid, ext, (H2 - H0) / (2.0 * dt) - rhs)


def record(grid: BaseGrid, profile: WarpingProfile, state: GraphState, iso, K: float,
           window=None) -> DiagnosticsRecord:
    """All per-state scalars for one series row."""
    ext = extrinsic(grid, profile, state)
    V = enclosed_volume(grid, profile, state)
    A = area(grid, profile, state)
    h_res = None if window is None else h_evolution_residual(grid, profile, window, K)
    return DiagnosticsRecord(
        t=state.t,
        V=V,
        A=A,
        max_grad_sq=float(np.max(ext.grad_sq)),
        osc_rho=state.osc,
        min_u=float(np.min(ext.u)),
        max_H=float(np.max(ext.H)),
        minkowski_residual=minkowski_residual(grid, profile, state, K, ext),
        laplace_phi_residual=laplace_phi_residual(grid, profile, state, ext),
        iso_slack=A - iso.xi(V),
        shape_consistency=shape_consistency(grid, profile, state, ext),
        h_evolution_residual=h_res,
    )


def _line_fit(t, y):
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    quality = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), quality


def decay_fit(records, K: float, floor: float = 1e-14, min_points: int = 20) -> DecayFit:
    """Fit the decay of max|grad rho|^2 over the second half of the usable records.

    K > 0: log(max_grad_sq) against t, rate = -slope (Exponential).
    K = 0: 1/max_grad_sq against t, rate = slope (Algebraic).
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    t = np.array([r.t for r in records], dtype=float)
    g = np.array([r.max_grad_sq for r in records], dtype=float)
    keep = g > floor
    if keep.sum() < min_points:
        raise InsufficientData(f"{int(keep.sum())} usable records, need {min_points}")
    t, g = t[keep], g[keep]
    half = t >= 0.5 * (t[0] + t[-1])
    if half.sum() < 2:
        raise InsufficientData("second half of the run has fewer than two records")
    t, g = t[half], g[half]
    if K > 0:
        slope, q = _line_fit(t, np.log(g))
        return DecayFit("Exponential", -slope, q, int(t.size))
    slope, q = _line_fit(t, 1.0 / g)
    return DecayFit("Algebraic", slope, q, int(t.size))


def run_summary(records) -> dict:
    """Conservation and monotonicity statistics of a recorded series."""
    V = np.array([r.V for r in records])
    A = np.array([r.A for r in records])
    slack = np.array([r.iso_slack for r in records])
    dA = np.diff(A)
    return {
        "records": len(records),
        "max_volume_drift": float(np.max(np.abs(V - V[0])) / V[0]) if V.size else 0.0,
        "final_volume_drift": float(abs(V[-1] - V[0]) / V[0]) if V.size else 0.0,
        "max_area_increase": float(dA.max() / A[0]) if dA.size else 0.0,
        "min_iso_slack": float(slack.min()) if slack.size else 0.0,
    }


def record_fields() -> tuple:
    return tuple(f.name for f in fields(DiagnosticsRecord))
