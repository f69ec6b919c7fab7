"""Isoperimetric profile xi = A o V^{-1} of the slices r = const."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfRange
from .warping import WarpingProfile


@dataclass(frozen=True)
class IsoProfile:
    """Tabulated slice areas and enclosed volumes.

    Attributes
    ----------
    profile : WarpingProfile
    base_area : float
        Area of the base (4 pi for the unit sphere, L^2 for the torus).
    r_nodes, A_of_r, V_of_r : ndarray
        Uniform r grid on the band with A(r) = phi^n(r) Area and
        V(r) = Phi_hat(r) Area.

    Queries (:meth:`xi`, :meth:`r_star`) bracket the answer on the table and
    then solve V(r) = x exactly with Brent's method, so their accuracy is
    that of the primitive, not of the table.
    """

    profile: WarpingProfile
    base_area: float
    r_nodes: np.ndarray
    A_of_r: np.ndarray
    V_of_r: np.ndarray
    xtol: float = field(default=1e-14, repr=False)

    @property
    def v_max(self) -> float:
        return float(self.V_of_r[-1])

    def A(self, r):
        return self.profile.phi(r) ** self.profile.n * self.base_area

    def V(self, r):
        return self.profile.shell_primitive(r) * self.base_area

    def r_star(self, volume: float) -> float:
        """The unique r with V(r) = volume."""
        x = float(volume)
        if not (0.0 <= x <= self.v_max) or math.isnan(x):
            raise OutOfRange(f"volume {x!r} outside [0, {self.v_max!r}]")
        k = int(np.searchsorted(self.V_of_r, x, side="left"))
        if k == 0:
            return float(self.r_nodes[0])
        if self.V_of_r[k] == x:
            return float(self.r_nodes[k])
        a, b = float(self.r_nodes[k - 1]), float(self.r_nodes[k])
        return float(brentq(lambda r: float(self.V(r)) - x, a, b,
                            xtol=self.xtol, rtol=4 * np.finfo(float).eps))

    def xi(self, x: float) -> float:
        return float(self.A(self.r_star(x)))

    def check_inequality(self, A: float, V: float, tol_rel: float = 1e-8):
        """``(slack, holds)`` with slack = A - xi(V), holds iff slack >= -tol_rel A."""
        slack = float(A) - self.xi(V)
        return slack, slack >= -tol_rel * float(A)

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "A", "V"])
            for row in zip(self.r_nodes, self.A_of_r, self.V_of_r):
                w.writerow([repr(float(v)) for v in row])
        return path


def build_profile(profile: WarpingProfile, base_area: float, nodes: int = 1025) -> IsoProfile:
    """Tabulate A(r) and V(r) on ``nodes`` uniform points of the band."""
    if nodes < 64:
        raise ValueError("need at least 64 nodes")
    r = np.linspace(profile.r0, profile.r_bar, int(nodes))
    A = profile.phi(r) ** profile.n * base_area
    V = profile.shell_primitive(r) * base_area
    V[0] = 0.0
    if np.any(np.diff(V) <= 0):
        raise ValueError("V(r) is not strictly increasing on the band")
    for arr in (r, A, V):
        arr.setflags(write=False)
    return IsoProfile(profile, float(base_area), r, A, V)


def xi(iso: IsoProfile, x: float) -> float:
    return iso.xi(x)


def r_star(iso: IsoProfile, volume: float) -> float:
    return iso.r_star(volume)


def check_inequality(iso: IsoProfile, A: float, V: float):
    return iso.check_inequality(A, V)
