"""Warping functions phi(r) for metrics dr^2 + phi(r)^2 g~.

A :class:`WarpingProfile` bundles phi with its first three derivatives on a
band ``[r0, r_bar]``, the primitives

    Phi(r)     = int_{r0}^r phi(s) ds
    Phi_hat(r) = int_{r0}^r phi(s)^n ds

and the scalar conditions built on Q(r) = phi'(r)^2 - phi(r) phi''(r).

Closed-form kinds (sin, sinh, linear, exp, const) are exact. The
``schwarzschild`` kind is integrated from phi' = sqrt(1 - m/phi) with RK4
and the ``table`` kind is a cubic spline through user data; for those two
the primitives integrate the piecewise polynomial interpolant exactly with
Gauss-Legendre rules on each interpolation panel.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import NonFinite, OutOfBand

TOL_COND = 1e-10
N_SAMPLES = 4096

DEFAULT_BANDS = {
    "sin": (0.05, math.pi - 0.05),
    "sinh": (0.05, 3.0),
    "linear": (0.05, 3.0),
    "exp": (-2.0, 2.0),
    "const": (-2.0, 2.0),
}

# Gauss-Legendre rule used for exact integration of piecewise polynomials
# (degree <= 15, enough for phi^n with cubic phi and n <= 5).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of :func:`check_conditions`."""

    K: float
    min_Q: float
    max_Q: float
    satisfied_lower: bool
    satisfied_upper: bool
    phi_prime_positive: bool
    strict_upper: bool
    strict_lower: bool

    @property
    def satisfied(self) -> bool:
        return self.satisfied_lower and self.satisfied_upper

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "min_Q": self.min_Q,
            "max_Q": self.max_Q,
            "satisfied_lower": self.satisfied_lower,
            "satisfied_upper": self.satisfied_upper,
            "phi_prime_positive": self.phi_prime_positive,
            "strict_upper": self.strict_upper,
            "strict_lower": self.strict_lower,
        }


@dataclass(frozen=True)
class PhotonSphere:
    """Roots of Q in the band, or a flag when Q vanishes identically."""

    roots: tuple
    identically_zero: bool

    def to_dict(self) -> dict:
        return {"roots": list(self.roots), "identically_zero": self.identically_zero}


def schwarzschild_arclength(s, m):
    """Arclength from the horizon to areal radius ``s`` for the metric
    ds^2/(1 - m/s) + s^2 g~, i.e. the r-coordinate at which phi(r) = s."""
    s = np.asarray(s, dtype=float)
    root = np.sqrt(np.maximum(s - m, 0.0))
    return np.sqrt(s * np.maximum(s - m, 0.0)) + m * np.log((np.sqrt(s) + root) / math.sqrt(m))


def _sin_power_primitive(r, n):
    if n == 0:
        return np.asarray(r, dtype=float)
    if n == 1:
        return -np.cos(r)
    s, c = np.sin(r), np.cos(r)
    return -(s ** (n - 1)) * c / n + (n - 1) / n * _sin_power_primitive(r, n - 2)


def _sinh_power_primitive(r, n):
    if n == 0:
        return np.asarray(r, dtype=float)
    if n == 1:
        return np.cosh(r)
    s, c = np.sinh(r), np.cosh(r)
    return (s ** (n - 1)) * c / n - (n - 1) / n * _sinh_power_primitive(r, n - 2)


class _PiecewisePrimitive:
    """Exact running integral of ``f(r)**p`` for a piecewise cubic f."""

    def __init__(self, f, knots, p):
        self._f = f
        self._p = p
        self._knots = np.asarray(knots, dtype=float)
        a, b = self._knots[:-1], self._knots[1:]
        panel = self._gl(a, b)
        self._cum = np.concatenate(([0.0], np.cumsum(panel)))

    def _gl(self, a, b):
        half = 0.5 * (b - a)
        x = 0.5 * (a + b)[..., None] + half[..., None] * _GL_X
        return half * np.sum(_GL_W * self._f(x) ** self._p, axis=-1)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self._knots, r, side="right") - 1, 0, self._knots.size - 2)
        left = self._knots[idx]
        return self._cum[idx] + self._gl(left, r)


class WarpingProfile:
    """Warping function phi on the band ``[r0, r_bar]``.

    Parameters
    ----------
    kind : {"sin", "sinh", "linear", "exp", "const", "schwarzschild", "table"}
        Functional family.
    r0, r_bar : float, optional
        Band endpoints. Defaults depend on ``kind``.
    n : int
        Base dimension (exponent in Phi_hat and in the flow formulas).
    a, b : float
        Parameters of ``exp`` (phi = a e^{b r}) and ``const`` (phi = a).
    m : float
        Mass parameter of ``schwarzschild``.
    table : tuple of arrays, optional
        ``(r, phi)`` samples for ``table``; r strictly increasing.
    source : str, optional
        Label used when echoing the profile (e.g. the config string).
    """

    def __init__(self, kind, r0=None, r_bar=None, n=2, *, a=1.0, b=0.0, m=1.0,
                 table=None, source=None):
        if kind not in ("sin", "sinh", "linear", "exp", "const", "schwarzschild", "table"):
            raise ValueError(f"unknown warping kind {kind!r}")
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        self.kind = kind
        self.n = n
        self.a = float(a)
        self.b = float(b)
        self.m = float(m)
        self.source = source if source is not None else self._default_label()
        # symbolic value of Q when it is constant, else None
        self.q_constant = {"sin": 1.0, "sinh": 1.0, "linear": 1.0,
                           "exp": 0.0, "const": 0.0}.get(kind)

        if kind == "table":
            if table is None:
                raise ValueError("table kind needs (r, phi) samples")
            tr, tp = (np.asarray(v, dtype=float) for v in table)
            if tr.ndim != 1 or tr.shape != tp.shape or tr.size < 4:
                raise ValueError("table needs at least 4 (r, phi) rows")
            if np.any(np.diff(tr) <= 0):
                raise ValueError("table r values must be strictly increasing")
            lo, hi = tr[0], tr[-1]
        elif kind == "schwarzschild":
            if self.m <= 0:
                raise ValueError("schwarzschild mass must be positive")
            lo, hi = 0.1 * self.m, 4.0 * self.m
        else:
            lo, hi = DEFAULT_BANDS[kind]
        self.r0 = float(lo if r0 is None else r0)
        self.r_bar = float(hi if r_bar is None else r_bar)
        if not self.r0 < self.r_bar:
            raise ValueError(f"need r0 < r_bar, got [{self.r0}, {self.r_bar}]")
        if kind == "table" and (self.r0 < tr[0] or self.r_bar > tr[-1]):
            raise ValueError("band exceeds the tabulated range")
        if kind == "const" and self.a <= 0:
            raise ValueError("const(a) needs a > 0")
        if kind == "exp" and self.a <= 0:
            raise ValueError("exp(a,b) needs a > 0")

        if kind == "schwarzschild":
            self._build_schwarzschild()
        elif kind == "table":
            self._spline = CubicSpline(tr, tp)
            self._dspl = [self._spline.derivative(k) for k in (1, 2, 3)]
            knots = np.union1d(tr[(tr > self.r0) & (tr < self.r_bar)], [self.r0, self.r_bar])
            knots = _refine(knots, N_SAMPLES)
            self._prim1 = _PiecewisePrimitive(self._spline, knots, 1)
            self._primn = _PiecewisePrimitive(self._spline, knots, n)
        self._check_positive()

    # ------------------------------------------------------------------ setup
    def _default_label(self):
        if self.kind == "exp":
            return f"exp({self.a!r},{self.b!r})"
        if self.kind == "const":
            return f"const({self.a!r})"
        if self.kind == "schwarzschild":
            return f"schwarzschild({self.m!r})"
        return self.kind

    def _build_schwarzschild(self):
        m = self.m
        if self.r0 <= 0:
            raise ValueError("schwarzschild band must start at r0 > 0 (phi(0) = m is degenerate)")
        hi = m + 1.0
        while schwarzschild_arclength(hi, m) < self.r0:
            hi = m + 2.0 * (hi - m)
        s0 = brentq(lambda s: float(schwarzschild_arclength(s, m)) - self.r0, m, hi,
                    xtol=1e-15, rtol=4 * np.finfo(float).eps)
        steps = 10_000
        dr = (self.r_bar - self.r0) / steps
        f = lambda p: math.sqrt(max(1.0 - m / p, 0.0))  # noqa: E731
        vals = np.empty(steps + 1)
        vals[0] = p = s0
        for k in range(steps):
            k1 = f(p)
            k2 = f(p + 0.5 * dr * k1)
            k3 = f(p + 0.5 * dr * k2)
            k4 = f(p + dr * k3)
            p = p + dr * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            vals[k + 1] = p
        knots = self.r0 + dr * np.arange(steps + 1)
        knots[-1] = self.r_bar
        slopes = np.sqrt(1.0 - m / vals)
        self._spline = CubicHermiteSpline(knots, vals, slopes)
        self._prim1 = _PiecewisePrimitive(self._spline, knots, 1)
        self._primn = _PiecewisePrimitive(self._spline, knots, self.n)

    def _check_positive(self):
        r = np.linspace(self.r0, self.r_bar, N_SAMPLES + 1)
        phi = self._derivs(r)[0]
        if not np.all(np.isfinite(phi)):
            raise ValueError("phi is not finite on the band")
        if np.any(phi[1:-1] <= 0) or phi[0] < 0 or phi[-1] < 0:
            raise ValueError("phi must be positive on the band")

    # ------------------------------------------------------------- evaluation
    def check_band(self, r):
        """Raise :class:`OutOfBand` (or :class:`NonFinite`) unless every r is in the band."""
        r = np.asarray(r, dtype=float)
        if r.size == 0:
            return r
        lo, hi = r.min(), r.max()
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise NonFinite("non-finite radial value")
        if lo < self.r0:
            raise OutOfBand(lo, self.r0, self.r_bar)
        if hi > self.r_bar:
            raise OutOfBand(hi, self.r0, self.r_bar)
        return r

    def in_band(self, r) -> bool:
        r = np.asarray(r, dtype=float)
        return bool(np.all(np.isfinite(r)) and r.min() >= self.r0 and r.max() <= self.r_bar)

    def _derivs(self, r):
        k = self.kind
        if k == "sin":
            s, c = np.sin(r), np.cos(r)
            return s, c, -s, -c
        if k == "sinh":
            s, c = np.sinh(r), np.cosh(r)
            return s, c, s, c
        if k == "linear":
            r = np.asarray(r, dtype=float)
            return r.copy(), np.ones_like(r), np.zeros_like(r), np.zeros_like(r)
        if k == "exp":
            e = self.a * np.exp(self.b * r)
            return e, self.b * e, self.b ** 2 * e, self.b ** 3 * e
        if k == "const":
            z = np.zeros_like(np.asarray(r, dtype=float))
            return z + self.a, z, z.copy(), z.copy()
        if k == "schwarzschild":
            m = self.m
            p = self._spline(r)
            dp = np.sqrt(np.maximum(1.0 - m / p, 0.0))
            return p, dp, m / (2 * p * p), -m * dp / p ** 3
        sp = self._spline
        return sp(r), self._dspl[0](r), self._dspl[1](r), self._dspl[2](r)

    def derivatives(self, r):
        """Return ``(phi, phi', phi'', phi''')`` at r (scalar or array)."""
        r = self.check_band(r)
        return self._derivs(r)

    def phi(self, r, check=True):
        if check:
            r = self.check_band(r)
        return self.phi_dphi(r, check=False)[0]

    def phi_dphi(self, r, check=True):
        """``(phi, phi')`` only; the flow's hot path."""
        if check:
            r = self.check_band(r)
        k = self.kind
        if k == "sin":
            return np.sin(r), np.cos(r)
        if k == "sinh":
            return np.sinh(r), np.cosh(r)
        if k == "exp":
            e = self.a * np.exp(self.b * r)
            return e, self.b * e
        d = self._derivs(r)
        return d[0], d[1]

    def Q(self, r, check=True):
        """Q = phi'^2 - phi phi'' (symbolic constant for closed forms)."""
        if check:
            r = self.check_band(r)
        r = np.asarray(r, dtype=float)
        if self.q_constant is not None:
            return np.full_like(r, self.q_constant)
        if self.kind == "schwarzschild":
            return 1.0 - 1.5 * self.m / self._spline(r)
        p, dp, ddp, _ = self._derivs(r)
        return dp * dp - p * ddp

    def big_phi(self, r):
        """Phi(r) = int_{r0}^r phi, so Phi(r0) = 0."""
        r = self.check_band(r)
        k, r0 = self.kind, self.r0
        if k == "sin":
            return np.cos(r0) - np.cos(r)
        if k == "sinh":
            return np.cosh(r) - np.cosh(r0)
        if k == "linear":
            return 0.5 * (r - r0) * (r + r0)
        if k == "const":
            return self.a * (r - r0)
        if k == "exp":
            if self.b == 0.0:
                return self.a * (r - r0)
            return self.a / self.b * np.expm1(self.b * (r - r0)) * np.exp(self.b * r0)
        return self._prim1(r)

    def shell_primitive(self, r):
        """Phi_hat(r) = int_{r0}^r phi^n, so Phi_hat(r0) = 0."""
        r = self.check_band(r)
        k, r0, n = self.kind, self.r0, self.n
        if k == "sin":
            return _sin_power_primitive(r, n) - _sin_power_primitive(r0, n)
        if k == "sinh":
            return _sinh_power_primitive(r, n) - _sinh_power_primitive(r0, n)
        if k == "linear":
            return (np.asarray(r, dtype=float) ** (n + 1) - r0 ** (n + 1)) / (n + 1)
        if k == "const":
            return self.a ** n * (r - r0)
        if k == "exp":
            if self.b == 0.0:
                return self.a ** n * (r - r0)
            nb = n * self.b
            return self.a ** n / nb * np.expm1(nb * (r - r0)) * np.exp(nb * r0)
        return self._primn(r)

    def __repr__(self):
        return f"WarpingProfile({self.source!r}, r0={self.r0!r}, r_bar={self.r_bar!r}, n={self.n})"


def _refine(knots, minimum):
    """Subdivide panels uniformly until there are at least ``minimum`` of them."""
    knots = np.asarray(knots, dtype=float)
    panels = knots.size - 1
    if panels >= minimum:
        return knots
    split = int(math.ceil(minimum / panels))
    t = np.linspace(0.0, 1.0, split + 1)[:-1]
    fine = (knots[:-1, None] + np.diff(knots)[:, None] * t).ravel()
    return np.append(fine, knots[-1])


def evaluate(profile: WarpingProfile, r):
    """``(phi, phi', phi'', phi''')`` at r; raises :class:`OutOfBand` outside the band."""
    return profile.derivatives(r)


def big_phi(profile: WarpingProfile, r):
    return profile.big_phi(r)


def shell_primitive(profile: WarpingProfile, r):
    return profile.shell_primitive(r)


def _sample_grid(profile):
    return np.linspace(profile.r0, profile.r_bar, N_SAMPLES)


def _refined_extrema(profile, r, q):
    """Refine interior local extrema of sampled Q with bounded 1-D searches."""
    lo, hi = float(q.min()), float(q.max())
    inner = np.arange(1, q.size - 1)
    is_min = (q[inner] <= q[inner - 1]) & (q[inner] <= q[inner + 1])
    is_max = (q[inner] >= q[inner - 1]) & (q[inner] >= q[inner + 1])
    qf = lambda x: float(profile.Q(x, check=False))  # noqa: E731
    for i in inner[is_min & ~is_max]:
        res = minimize_scalar(qf, bounds=(r[i - 1], r[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        lo = min(lo, float(res.fun))
    for i in inner[is_max & ~is_min]:
        res = minimize_scalar(lambda x: -qf(x), bounds=(r[i - 1], r[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        hi = max(hi, -float(res.fun))
    return lo, hi


def check_conditions(profile: WarpingProfile, K: float, tol: float = TOL_COND) -> ConditionReport:
    """Check 0 <= Q <= K on the band and report phi' positivity."""
    if K < 0:
        raise ValueError("K must be non-negative")
    r = _sample_grid(profile)
    if profile.q_constant is not None:
        lo = hi = profile.q_constant
    else:
        lo, hi = _refined_extrema(profile, r, profile.Q(r, check=False))
    dphi = profile.phi_dphi(r, check=False)[1]
    return ConditionReport(
        K=float(K),
        min_Q=float(lo),
        max_Q=float(hi),
        satisfied_lower=bool(lo >= -tol),
        satisfied_upper=bool(hi <= K + tol),
        phi_prime_positive=bool(np.all(dphi > 0)),
        strict_upper=bool(hi < K),
        strict_lower=bool(lo > 0),
    )


def photon_sphere_roots(profile: WarpingProfile, xtol: float = 1e-12) -> PhotonSphere:
    """Locate the zeros of Q on the band (sign changes refined by Brent's method)."""
    if profile.q_constant is not None:
        return PhotonSphere((), profile.q_constant == 0.0)
    r = _sample_grid(profile)
    q = profile.Q(r, check=False)
    if np.max(np.abs(q)) <= 1e-13:
        return PhotonSphere((), True)
    qf = lambda x: float(profile.Q(x, check=False))  # noqa: E731
    roots = [float(x) for x in r[q == 0.0]]
    for i in np.nonzero(q[:-1] * q[1:] < 0)[0]:
        roots.append(float(brentq(qf, r[i], r[i + 1], xtol=xtol)))
    return PhotonSphere(tuple(sorted(roots)), False)


def stability_check(profile: WarpingProfile, lambda1: float, r: float,
                    tol: float = TOL_COND):
    """Return ``(satisfied, margin)`` with margin = lambda1 - n Q(r)."""
    if lambda1 < 0:
        raise ValueError("lambda1 must be non-negative")
    margin = float(lambda1 - profile.n * profile.Q(r))
    return margin >= -tol, margin


_PHI_PATTERNS = [
    (re.compile(r"^(sin|sinh|linear)$"), lambda g: {"kind": g[0]}),
    (re.compile(r"^exp\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$"),
     lambda g: {"kind": "exp", "a": float(g[0]), "b": float(g[1])}),
    (re.compile(r"^const\(\s*([^,()]+)\s*\)$"), lambda g: {"kind": "const", "a": float(g[0])}),
    (re.compile(r"^schwarzschild\(\s*([^,()]+)\s*\)$"),
     lambda g: {"kind": "schwarzschild", "m": float(g[0])}),
]


def parse_phi(text: str) -> dict:
    """Parse the config grammar for ``phi`` into constructor keywords.

    Table paths are returned unresolved under ``"path"``; reading them is
    left to :func:`load_table` so parsing never touches the filesystem.
    """
    text = text.strip()
    if text.startswith("table:"):
        path = text[len("table:"):].strip()
        if not path:
            raise ValueError("table: needs a path")
        return {"kind": "table", "path": path}
    for pattern, build in _PHI_PATTERNS:
        match = pattern.match(text)
        if match:
            return build(match.groups())
    raise ValueError(f"unrecognised profile {text!r}")


def load_table(path) -> tuple:
    """Read a two-column whitespace-separated ``r phi`` file."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1]


def make_profile(text: str, r0=None, r_bar=None, n=2, base_dir=None) -> WarpingProfile:
    """Build a profile from its config string (reads table files)."""
    spec = parse_phi(text)
    kind = spec.pop("kind")
    if kind == "table":
        path = Path(spec.pop("path"))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        spec["table"] = load_table(path)
    return WarpingProfile(kind, r0, r_bar, n, source=text.strip(), **spec)
