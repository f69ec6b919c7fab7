"""Discretised base manifolds: the axisymmetric unit sphere and the flat torus.

Both grids expose the same small calculus: covariant components of
gradients and Hessians (as tuples of node arrays), the metric inverse,
a Laplacian, a generalised divergence ``div_tensor_grad`` used by the
induced-metric operators, and quadrature.

Vectors and symmetric 2-tensors are stored componentwise,
``(v_1, v_2)`` and ``(T_11, T_12, T_22)``, with index 1 = theta or x and
index 2 = the azimuth or y.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFinite, Unsupported


class BaseGrid:
    """Common interface; see :class:`SphereGrid` and :class:`TorusGrid`."""

    kind: str
    n: int = 2
    k_base: float
    resolution: int
    h: float
    shape: tuple
    weights: np.ndarray
    weights_hi: np.ndarray
    ginv: tuple

    @property
    def h_eff(self) -> float:
        """Smallest metric grid spacing (enters the parabolic time step)."""
        return self.h

    @property
    def area(self) -> float:
        raise NotImplementedError

    def field(self, values) -> np.ndarray:
        """Validate node values (shape and finiteness) and return a float array."""
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.shape:
            try:
                arr = np.broadcast_to(arr, self.shape).copy()
            except ValueError:
                raise ValueError(f"field shape {arr.shape} does not match grid {self.shape}") from None
        if not np.all(np.isfinite(arr)):
            raise NonFinite("field contains NaN or Inf")
        return arr

    def integrate(self, f, accurate: bool = False) -> float:
        """Quadrature sum of f against the base measure.

        ``accurate=True`` switches to the higher-order weights used by the
        area and volume functionals.
        """
        w = self.weights_hi if accurate else self.weights
        return float(np.sum(w * f))

    def raise_index(self, v):
        g11, g12, g22 = self.ginv
        return (g11 * v[0] + g12 * v[1], g12 * v[0] + g22 * v[1])

    def inner(self, a, b):
        """g~^{ij} a_i b_j for covectors a, b."""
        g11, g12, g22 = self.ginv
        return g11 * a[0] * b[0] + g12 * (a[0] * b[1] + a[1] * b[0]) + g22 * a[1] * b[1]

    def gradient_sq(self, f, order: int = 2):
        g = self.gradient(f, order=order)
        return self.inner(g, g)

    def lambda1(self) -> float:
        raise Unsupported(f"no lambda1 for {self.kind}")


class SphereGrid(BaseGrid):
    """Unit 2-sphere restricted to functions of the polar angle.

    Nodes sit at cell centres theta_i = (i + 1/2) pi / N so no node falls on
    a pole; one-sided stencils are avoided with even reflection across
    theta = 0 and theta = pi.
    """

    kind = "axisym_sphere"
    k_base = 1.0

    def __init__(self, resolution: int):
        N = int(resolution)
        if N < 4:
            raise ValueError("sphere grid needs at least 4 cells")
        self.resolution = N
        self.shape = (N,)
        self.h = h = math.pi / N
        self.theta = (np.arange(N) + 0.5) * h
        self.sin = np.sin(self.theta)
        self.cos = np.cos(self.theta)
        self.cot = self.cos / self.sin
        self.face_sin = np.sin(np.arange(N + 1) * h)
        self.face_sin[0] = 0.0
        self.face_sin[-1] = 0.0
        # exact cell areas 2 pi (cos theta_{i-1/2} - cos theta_{i+1/2})
        self.weights = 4.0 * math.pi * self.sin * math.sin(0.5 * h)
        self.weights_hi = _sphere_weights_hi(N)
        self.ginv = (np.ones(N), np.zeros(N), 1.0 / self.sin ** 2)
        self.coordinates = {"theta": self.theta}

    @property
    def area(self) -> float:
        return 4.0 * math.pi

    def lambda1(self) -> float:
        return 2.0

    def variables(self) -> dict:
        return {"theta": self.theta, "θ": self.theta}

    @staticmethod
    def _pad(f, width=1):
        f = np.asarray(f, dtype=float)
        return np.concatenate((f[width - 1::-1], f, f[:-width - 1:-1]))

    def gradient(self, f, order: int = 2):
        h = self.h
        if order == 2:
            p = self._pad(f)
            d = (p[2:] - p[:-2]) / (2 * h)
        elif order == 4:
            p = self._pad(f, 2)
            d = (-p[4:] + 8 * p[3:-1] - 8 * p[1:-3] + p[:-4]) / (12 * h)
        else:
            raise ValueError("order must be 2 or 4")
        return d, np.zeros_like(d)

    def second_theta(self, f):
        p = self._pad(f)
        return (p[2:] - 2 * p[1:-1] + p[:-2]) / self.h ** 2

    def covariant_hessian(self, f):
        """(f_tt, 0, sin cos f_t): Christoffel Gamma^theta_{phi phi} = -sin cos."""
        ft = self.gradient(f)[0]
        return self.second_theta(f), np.zeros_like(ft), self.sin * self.cos * ft

    def div_tensor_grad(self, M, f):
        """(1/sin) d_theta(sin M^{tt} d_theta f) as a finite-volume divergence.

        Face coefficients are arithmetic means of the nodal M^{tt}; the
        face fluxes vanish at the poles, so the cell-area weighted sum of
        the result telescopes to zero.
        """
        m = self._pad(M[0] if isinstance(M, tuple) else M)
        p = self._pad(f)
        face_m = 0.5 * (m[1:] + m[:-1])
        flux = 2.0 * math.pi * self.face_sin * face_m * (p[1:] - p[:-1]) / self.h
        return (flux[1:] - flux[:-1]) / self.weights

    def laplace(self, f):
        return self.div_tensor_grad(np.ones(self.resolution), f)

    def __repr__(self):
        return f"SphereGrid({self.resolution})"


def _sphere_weights_hi(N: int) -> np.ndarray:
    """Fourth-order cell weights on the theta grid.

    Inside each cell f is replaced by the quadratic through its node and the
    two neighbours (ghosts folded back by even reflection); the weight of a
    node collects the exact integrals of its Lagrange factor against the
    area density 2 pi sin(theta).  Partition of unity makes the weights sum
    to 4 pi exactly (up to rounding).
    """
    h = math.pi / N
    x, gw = np.polynomial.legendre.leggauss(12)
    centres = (np.arange(N) + 0.5) * h
    s = centres[:, None] + 0.5 * h * x          # (N, 12) quadrature points
    dens = 0.5 * h * gw * 2.0 * math.pi * np.sin(s)
    z = x * 0.5                                  # (s - centre) / h
    lag = {-1: 0.5 * z * (z - 1.0), 0: 1.0 - z * z, 1: 0.5 * z * (z + 1.0)}
    W = np.zeros(N)
    idx = np.arange(N)
    for k, L in lag.items():
        j = idx + k
        j = np.where(j < 0, -j - 1, j)
        j = np.where(j >= N, 2 * N - 1 - j, j)
        np.add.at(W, j, dens @ L)
    return W


class TorusGrid(BaseGrid):
    """Flat torus [0, L)^2 with periodic centred differences."""

    kind = "torus2"
    k_base = 0.0

    def __init__(self, resolution: int, length: float = 2.0 * math.pi):
        N = int(resolution)
        if N < 4:
            raise ValueError("torus grid needs at least 4 points per side")
        if not length > 0:
            raise ValueError("torus side must be positive")
        self.resolution = N
        self.length = float(length)
        self.shape = (N, N)
        self.h = h = self.length / N
        x = np.arange(N) * h
        self.x, self.y = np.meshgrid(x, x, indexing="ij")
        self.weights = np.full(self.shape, h * h)
        self.weights_hi = self.weights
        one = np.ones(self.shape)
        self.ginv = (one, np.zeros(self.shape), one)
        self.coordinates = {"x": self.x, "y": self.y}

    @property
    def area(self) -> float:
        return self.length ** 2

    def lambda1(self) -> float:
        return (2.0 * math.pi / self.length) ** 2

    def variables(self) -> dict:
        return {"x": self.x, "y": self.y}

    def _d(self, f, axis, order=2):
        h = self.h
        if order == 2:
            return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
        if order == 4:
            return (-np.roll(f, -2, axis) + 8 * np.roll(f, -1, axis)
                    - 8 * np.roll(f, 1, axis) + np.roll(f, 2, axis)) / (12 * h)
        raise ValueError("order must be 2 or 4")

    def gradient(self, f, order: int = 2):
        f = np.asarray(f, dtype=float)
        return self._d(f, 0, order), self._d(f, 1, order)

    def covariant_hessian(self, f):
        f = np.asarray(f, dtype=float)
        h2 = self.h ** 2
        fxx = (np.roll(f, -1, 0) - 2 * f + np.roll(f, 1, 0)) / h2
        fyy = (np.roll(f, -1, 1) - 2 * f + np.roll(f, 1, 1)) / h2
        fxy = self._d(self._d(f, 0), 1)
        return fxx, fxy, fyy

    def laplace(self, f):
        fxx, _, fyy = self.covariant_hessian(f)
        return fxx + fyy

    def div_tensor_grad(self, M, f):
        """d_i(M^{ij} d_j f): compact fluxes on the diagonal, centred products off it."""
        m11, m12, m22 = M
        f = np.asarray(f, dtype=float)
        h = self.h
        out = np.zeros(self.shape)
        for axis, m in ((0, m11), (1, m22)):
            face = 0.5 * (m + np.roll(m, -1, axis)) * (np.roll(f, -1, axis) - f) / h
            out += (face - np.roll(face, 1, axis)) / h
        if np.any(m12):
            out += self._d(m12 * self._d(f, 1), 0) + self._d(m12 * self._d(f, 0), 1)
        return out

    def __repr__(self):
        return f"TorusGrid({self.resolution}, L={self.length!r})"


def gradient_sq(grid: BaseGrid, f):
    return grid.gradient_sq(f)


def covariant_hessian(grid: BaseGrid, f):
    return grid.covariant_hessian(f)


def laplace(grid: BaseGrid, f):
    return grid.laplace(f)


def integrate(grid: BaseGrid, f) -> float:
    return grid.integrate(f)


def lambda1(grid: BaseGrid) -> float:
    return grid.lambda1()


def parse_base(text: str, resolution: int) -> BaseGrid:
    """Build a grid from the config grammar ``sphere`` or ``torus(L)``.

    ``L`` may be any constant expression accepted by :mod:`warpflow.expr`
    (so ``torus(2*pi)`` works).
    """
    from .expr import evaluate_constant

    text = text.strip()
    if text == "sphere":
        return SphereGrid(resolution)
    if text.startswith("torus(") and text.endswith(")"):
        length = evaluate_constant(text[len("torus("):-1])
        return TorusGrid(resolution, length)
    raise ValueError(f"unrecognised base {text!r}")
