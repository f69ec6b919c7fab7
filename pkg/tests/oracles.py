"""Reference values computed independently of the package's discretisation.

* mean curvature of a graph from the first variation of the area
  functional  L(rho, grad rho) = phi^{n-1}(rho) sqrt(phi^2 + |grad rho|^2),
  which gives

      H phi^n = (n-1) phi^{n-2} phi' omega + phi^n phi' / omega
                - div( phi^{n-1} grad rho / omega ),

  evaluated with exact derivatives of analytic test functions;
* Euclidean surface-of-revolution curvatures (phi = r over the sphere);
* area and enclosed volume by adaptive quadrature;
* closed-form isoperimetric profiles.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def variational_H(phi, dphi, n, gsq, lap, hess_gg):
    """Mean curvature from the Euler-Lagrange expression of the area.

    ``gsq`` = |grad rho|^2, ``lap`` = Laplacian of rho and
    ``hess_gg`` = Hess rho (grad rho, grad rho), all exact.
    """
    w2 = phi * phi + gsq
    w = np.sqrt(w2)
    # div(f grad rho) = <grad f, grad rho> + f lap, f = phi^{n-1} / omega
    f = phi ** (n - 1) / w
    grad_f_dot = ((n - 1) * phi ** (n - 2) * dphi * gsq / w
                  - phi ** (n - 1) * (phi * dphi * gsq + hess_gg) / (w2 * w))
    div = grad_f_dot + f * lap
    return ((n - 1) * phi ** (n - 2) * dphi * w + phi ** n * dphi / w - div) / phi ** n


class AxisymmetricField:
    """rho(theta) = c + a cos(theta) + b cos(2 theta) with exact derivatives."""

    def __init__(self, c=0.8, a=0.2, b=0.0):
        self.c, self.a, self.b = c, a, b

    def __call__(self, t):
        return self.c + self.a * np.cos(t) + self.b * np.cos(2 * t)

    def d1(self, t):
        return -self.a * np.sin(t) - 2 * self.b * np.sin(2 * t)

    def d2(self, t):
        return -self.a * np.cos(t) - 4 * self.b * np.cos(2 * t)

    def invariants(self, t):
        """(|grad rho|^2, Laplacian, Hess(grad, grad)) on the unit sphere."""
        r1, r2 = self.d1(t), self.d2(t)
        return r1 * r1, r2 + np.cos(t) / np.sin(t) * r1, r2 * r1 * r1


class TorusField:
    """rho(x, y) = c + a cos(x) + b sin(y) + e cos(x + 2y) with exact derivatives."""

    def __init__(self, c=0.0, a=0.3, b=0.2, e=0.0):
        self.c, self.a, self.b, self.e = c, a, b, e

    def __call__(self, x, y):
        return self.c + self.a * np.cos(x) + self.b * np.sin(y) + self.e * np.cos(x + 2 * y)

    def invariants(self, x, y):
        a, b, e = self.a, self.b, self.e
        s = np.sin(x + 2 * y)
        c = np.cos(x + 2 * y)
        rx = -a * np.sin(x) - e * s
        ry = b * np.cos(y) - 2 * e * s
        rxx = -a * np.cos(x) - e * c
        ryy = -b * np.sin(y) - 4 * e * c
        rxy = -2 * e * c
        gsq = rx * rx + ry * ry
        hess_gg = rxx * rx * rx + 2 * rxy * rx * ry + ryy * ry * ry
        return gsq, rxx + ryy, hess_gg


def euclidean_revolution_H(field: AxisymmetricField, t):
    """Principal curvature sum of r = rho(theta) in R^3 (outward normal)."""
    r, r1, r2 = field(t), field.d1(t), field.d2(t)
    z1 = r1 * np.cos(t) - r * np.sin(t)
    speed = np.sqrt(r * r + r1 * r1)
    k_meridian = (r * r + 2 * r1 * r1 - r * r2) / speed ** 3
    k_parallel = -z1 / (speed * r * np.sin(t))
    return k_meridian + k_parallel


def sphere_area(profile, field: AxisymmetricField):
    """A = 2 pi int phi(rho) sqrt(phi^2 + rho'^2) sin(theta) d theta (n = 2)."""
    def f(t):
        p = float(profile.phi(field(t)))
        return p * math.sqrt(p * p + field.d1(t) ** 2) * math.sin(t)
    return 2 * math.pi * quad(f, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def sphere_volume(profile, field: AxisymmetricField):
    """V = 2 pi int Phi_hat(rho) sin(theta) d theta."""
    def f(t):
        return float(profile.shell_primitive(field(t))) * math.sin(t)
    return 2 * math.pi * quad(f, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def xi_sin_n1(x):
    return np.sqrt(x * (4 * math.pi - x))


def xi_sinh_n1(x):
    return np.sqrt(x * (4 * math.pi + x))


def xi_euclidean_n2(x):
    return (36 * math.pi) ** (1.0 / 3.0) * np.asarray(x) ** (2.0 / 3.0)


def slice_speed_rate_sphere(phi_c):
    """Decay rate of the l = 1 modes about the slice r = c on the unit sphere."""
    return 2.0 / phi_c
