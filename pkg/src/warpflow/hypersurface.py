"""Extrinsic geometry of a graph r = rho(p) over the base.

Notation (covariant derivatives with respect to the base metric g~)::

    omega = sqrt(phi^2 + |grad rho|^2),   u = phi^2 / omega
    g_ij  = phi^2 g~_ij + rho_i rho_j
    g^ij  = (g~^ij - rho^i rho^j / omega^2) / phi^2
    b_ij  = -phi omega^2 rho_ij + phi rho_i q_j + phi' phi^2 rho_i rho_j
            + phi' phi^2 omega^2 g~_ij,     q_j = rho^k rho_kj
    h^i_j = g~^ik b_kj / (phi^2 omega^3)

q_j is the gradient of |grad rho|^2 / 2, written through the discrete
Hessian so that the b_ij route above and the h_ij route used by
:func:`shape_from_h` are the same discrete formula up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .base import BaseGrid, SphereGrid
from .warping import WarpingProfile


@dataclass(frozen=True)
class GraphState:
    """Radial field rho on the base grid at flow time t."""

    rho: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if not np.all(np.isfinite(rho)):
            from .errors import NonFinite

            raise NonFinite("rho contains NaN or Inf")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "t", float(self.t))

    @property
    def osc(self) -> float:
        return float(self.rho.max() - self.rho.min())


@dataclass(frozen=True)
class ExtrinsicBundle:
    """Pointwise extrinsic quantities of a graph (plus the ingredients
    reused by the diagnostics)."""

    omega: np.ndarray
    u: np.ndarray
    H: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    area_element: np.ndarray
    shape: np.ndarray          # (..., 2, 2) mixed tensor h^i_j
    phi: np.ndarray
    dphi: np.ndarray
    grad: tuple                # rho_i
    grad_up: tuple             # rho^i
    grad_sq: np.ndarray
    hess: tuple                # (rho_11, rho_12, rho_22)
    ginv: tuple                # base metric inverse g~^{ij}

    @property
    def norm_A_sq(self) -> np.ndarray:
        """|A|^2 = h^i_j h^j_i."""
        s = self.shape
        return np.einsum("...ij,...ji->...", s, s)

    def induced_inverse(self):
        """Contravariant induced metric g^{ij} as (g^11, g^12, g^22)."""
        return induced_inverse(self.ginv, self.phi, self.omega, self.grad_up)


def _lower_metric(grid: BaseGrid):
    if isinstance(grid, SphereGrid):
        return (np.ones(grid.shape), np.zeros(grid.shape), grid.sin ** 2)
    one = np.ones(grid.shape)
    return (one, np.zeros(grid.shape), one)


def induced_inverse(ginv, phi, omega, grad_up):
    """g^{ij} = (g~^{ij} - rho^i rho^j / omega^2) / phi^2."""
    g11, g12, g22 = ginv
    w2 = omega * omega
    p2 = phi * phi
    return ((g11 - grad_up[0] ** 2 / w2) / p2,
            (g12 - grad_up[0] * grad_up[1] / w2) / p2,
            (g22 - grad_up[1] ** 2 / w2) / p2)


def extrinsic(grid: BaseGrid, profile: WarpingProfile, state) -> ExtrinsicBundle:
    """Compute omega, u, the shape operator, H, sigma_2 and the area element."""
    rho = _rho(grid, state)
    phi, dphi = profile.phi_dphi(rho)
    n = profile.n
    grad = grid.gradient(rho)
    up = grid.raise_index(grad)
    gsq = up[0] * grad[0] + up[1] * grad[1]
    hess = grid.covariant_hessian(rho)
    w2 = phi * phi + gsq
    omega = np.sqrt(w2)

    R = ((hess[0], hess[1]), (hess[1], hess[2]))
    q = (up[0] * hess[0] + up[1] * hess[1], up[0] * hess[1] + up[1] * hess[2])
    glow = _lower_metric(grid)
    G = ((glow[0], glow[1]), (glow[1], glow[2]))
    c_iso = dphi * phi * phi
    b = [[-phi * w2 * R[k][j] + phi * grad[k] * q[j] + c_iso * grad[k] * grad[j]
          + c_iso * w2 * G[k][j] for j in range(2)] for k in range(2)]
    gi = ((grid.ginv[0], grid.ginv[1]), (grid.ginv[1], grid.ginv[2]))
    denom = phi * phi * w2 * omega
    shape = np.empty(grid.shape + (2, 2))
    for i in range(2):
        for j in range(2):
            shape[..., i, j] = (gi[i][0] * b[0][j] + gi[i][1] * b[1][j]) / denom
    H = shape[..., 0, 0] + shape[..., 1, 1]
    sigma2 = shape[..., 0, 0] * shape[..., 1, 1] - shape[..., 0, 1] * shape[..., 1, 0]
    bundle = ExtrinsicBundle(
        omega=omega,
        u=phi * phi / omega,
        H=H,
        sigma1=H,
        sigma2=sigma2,
        area_element=phi ** (n - 1) * omega,
        shape=shape,
        phi=phi,
        dphi=dphi,
        grad=grad,
        grad_up=up,
        grad_sq=gsq,
        hess=hess,
        ginv=grid.ginv,
    )
    return bundle


def shape_from_h(grid: BaseGrid, ext: ExtrinsicBundle) -> np.ndarray:
    """Mixed shape tensor through h_ij and the full graph inverse metric."""
    phi, dphi, omega = ext.phi, ext.dphi, ext.omega
    grad, hess = ext.grad, ext.hess
    glow = _lower_metric(grid)
    R = ((hess[0], hess[1]), (hess[1], hess[2]))
    G = ((glow[0], glow[1]), (glow[1], glow[2]))
    hl = [[(-phi * R[k][j] + 2 * dphi * grad[k] * grad[j] + phi * phi * dphi * G[k][j]) / omega
           for j in range(2)] for k in range(2)]
    g11, g12, g22 = ext.induced_inverse()
    gi = ((g11, g12), (g12, g22))
    out = np.empty(grid.shape + (2, 2))
    for i in range(2):
        for j in range(2):
            out[..., i, j] = gi[i][0] * hl[0][j] + gi[i][1] * hl[1][j]
    return out


def _rho(grid, state):
    rho = state.rho if isinstance(state, GraphState) else state
    return grid.field(rho)


def area(grid: BaseGrid, profile: WarpingProfile, state) -> float:
    """A = int phi^{n-1} omega dmu~ (fourth-order gradient and weights)."""
    rho = _rho(grid, state)
    phi = profile.phi(rho)
    omega = np.sqrt(phi * phi + grid.gradient_sq(rho, order=4))
    return grid.integrate(phi ** (profile.n - 1) * omega, accurate=True)


def enclosed_volume(grid: BaseGrid, profile: WarpingProfile, state) -> float:
    """V = int Phi_hat(rho) dmu~, the volume between r = r0 and the graph."""
    rho = _rho(grid, state)
    return grid.integrate(profile.shell_primitive(rho), accurate=True)


def speed(grid: BaseGrid, profile: WarpingProfile, state) -> np.ndarray:
    """(n phi' - H u) omega / phi, evaluated through :func:`extrinsic`."""
    ext = extrinsic(grid, profile, state)
    return (profile.n * ext.dphi - ext.H * ext.u) * ext.omega / ext.phi


def fast_speed(grid: BaseGrid, profile: WarpingProfile, rho, out=None, check=True) -> np.ndarray:
    """Compiled evaluation of the same speed (used by the time stepper)."""
    if check:
        profile.check_band(rho)
    phi, dphi = profile.phi_dphi(rho, check=False)
    if out is None:
        out = np.empty(grid.shape)
    if isinstance(grid, SphereGrid):
        _kernels.sphere_speed(rho, phi, dphi, grid.cot, grid.h, float(profile.n), out)
    else:
        _kernels.torus_speed(rho, phi, dphi, grid.h, float(profile.n), out)
    return out
