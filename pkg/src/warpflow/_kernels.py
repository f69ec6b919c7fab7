"""Compiled per-node kernels for the time stepper.

The speed kernels repeat, node by node, the b_ij route of
:func:`hypersurface.extrinsic` (same stencils, same contraction for the
gradient of |grad rho|^2 / 2) and return (n phi' - H u) omega / phi.

For the closed-form warping kinds the whole RK4 step (phi evaluation,
band and finiteness checks, the four stages) runs in one compiled call,
and :func:`advance` runs many such steps between two records;
other kinds go through :func:`hypersurface.fast_speed` stage by stage.
The test suite checks both paths against the numpy implementation.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# warping kinds with a compiled phi
KIND_CODES = {"sin": 0, "sinh": 1, "linear": 2, "exp": 3, "const": 4}

OK, NON_FINITE, OUT_OF_BAND = 0, 1, 2


@njit(cache=True)
def _phi_pair(kind, a, b, r):
    if kind == 0:
        return math.sin(r), math.cos(r)
    if kind == 1:
        return math.sinh(r), math.cosh(r)
    if kind == 2:
        return r, 1.0
    if kind == 3:
        e = a * math.exp(b * r)
        return e, b * e
    return a, 0.0


@njit(cache=True)
def _fill_phi(rho, kind, a, b, r0, rbar, phi, dphi):
    flat = rho.ravel()
    fp = phi.ravel()
    fd = dphi.ravel()
    for i in range(flat.shape[0]):
        r = flat[i]
        if not math.isfinite(r):
            return NON_FINITE
        if r < r0 or r > rbar:
            return OUT_OF_BAND
        p, dp = _phi_pair(kind, a, b, r)
        fp[i] = p
        fd[i] = dp
    return OK


@njit(cache=True)
def _sphere_node(rm, r, rp, p, dp, cot, inv2h, invh2, n):
    d1 = (rp - rm) * inv2h
    d2 = (rp - 2.0 * r + rm) * invh2
    gsq = d1 * d1
    w2 = p * p + gsq
    w = math.sqrt(w2)
    c = dp * p * p
    b11 = -p * w2 * d2 + p * d1 * (d1 * d2) + c * gsq + c * w2
    b22 = -p * w2 * (cot * d1) + c * w2
    H = (b11 + b22) / (p * p * w2 * w)
    u = p * p / w
    return (n * dp - H * u) * w / p


@njit(cache=True)
def sphere_speed(rho, phi, dphi, cot, h, n, out):
    N = rho.shape[0]
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    for i in range(N):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < N - 1 else N - 1
        out[i] = _sphere_node(rho[im], rho[i], rho[ip], phi[i], dphi[i], cot[i], inv2h, invh2, n)


@njit(cache=True)
def _torus_node(rho, i, j, N, M, p, dp, inv2h, invh2, n):
    im = i - 1 if i > 0 else N - 1
    ip = i + 1 if i < N - 1 else 0
    jm = j - 1 if j > 0 else M - 1
    jp = j + 1 if j < M - 1 else 0
    rx = (rho[ip, j] - rho[im, j]) * inv2h
    ry = (rho[i, jp] - rho[i, jm]) * inv2h
    rxx = (rho[ip, j] - 2.0 * rho[i, j] + rho[im, j]) * invh2
    ryy = (rho[i, jp] - 2.0 * rho[i, j] + rho[i, jm]) * invh2
    # centred difference of centred differences, as in TorusGrid
    dyp = (rho[ip, jp] - rho[ip, jm]) * inv2h
    dym = (rho[im, jp] - rho[im, jm]) * inv2h
    rxy = (dyp - dym) * inv2h
    gsq = rx * rx + ry * ry
    w2 = p * p + gsq
    w = math.sqrt(w2)
    c = dp * p * p
    qx = rx * rxx + ry * rxy
    qy = rx * rxy + ry * ryy
    b11 = -p * w2 * rxx + p * rx * qx + c * rx * rx + c * w2
    b22 = -p * w2 * ryy + p * ry * qy + c * ry * ry + c * w2
    H = (b11 + b22) / (p * p * w2 * w)
    u = p * p / w
    return (n * dp - H * u) * w / p


@njit(cache=True)
def torus_speed(rho, phi, dphi, h, n, out):
    N, M = rho.shape
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    for i in range(N):
        for j in range(M):
            out[i, j] = _torus_node(rho, i, j, N, M, phi[i, j], dphi[i, j], inv2h, invh2, n)


@njit(cache=True)
def _speed(rho, phi, dphi, cot, h, n, out, sphere):
    """Speed on 2-D views; the sphere is passed with shape (N, 1)."""
    if sphere:
        N = rho.shape[0]
        inv2h = 0.5 / h
        invh2 = 1.0 / (h * h)
        for i in range(N):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < N - 1 else N - 1
            out[i, 0] = _sphere_node(rho[im, 0], rho[i, 0], rho[ip, 0], phi[i, 0], dphi[i, 0],
                                     cot[i], inv2h, invh2, n)
    else:
        torus_speed(rho, phi, dphi, h, n, out)


# Stage inputs differ from rho by a small increment d, so phi(rho + d) is
# obtained from phi(rho), phi'(rho) by the addition theorems with short
# Taylor series for the functions of d (truncation < 1e-21 for |d| < 1e-3),
# replacing four transcendental calls per node and stage by a few products.
SHIFT_MAX = 1e-3


@njit(cache=True)
def _shift_pair(kind, a, b, r, d, p0, dp0):
    if kind == 2:
        return r, 1.0
    if kind == 4:
        return a, 0.0
    if abs(d) >= SHIFT_MAX:
        return _phi_pair(kind, a, b, r)
    d2 = d * d
    if kind == 0:
        s = d * (1.0 - d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0)))
        cm1 = -0.5 * d2 * (1.0 - d2 / 12.0 * (1.0 - d2 / 30.0))
        return p0 + (p0 * cm1 + dp0 * s), dp0 + (dp0 * cm1 - p0 * s)
    if kind == 1:
        s = d * (1.0 + d2 / 6.0 * (1.0 + d2 / 20.0 * (1.0 + d2 / 42.0)))
        cm1 = 0.5 * d2 * (1.0 + d2 / 12.0 * (1.0 + d2 / 30.0))
        return p0 + (p0 * cm1 + dp0 * s), dp0 + (dp0 * cm1 + p0 * s)
    x = b * d
    if abs(x) >= SHIFT_MAX:
        return _phi_pair(kind, a, b, r)
    em1 = x * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0 * (1.0 + x / 6.0)))))
    e = p0 + p0 * em1
    return e, b * e


@njit(cache=True)
def _fill_phi_shift(tmp, rho, p0, dp0, kind, a, b, r0, rbar, phi, dphi):
    ft, fr = tmp.ravel(), rho.ravel()
    f0, fd0 = p0.ravel(), dp0.ravel()
    fp, fd = phi.ravel(), dphi.ravel()
    for i in range(ft.shape[0]):
        r = ft[i]
        if not math.isfinite(r):
            return NON_FINITE
        if r < r0 or r > rbar:
            return OUT_OF_BAND
        p, dp = _shift_pair(kind, a, b, r, r - fr[i], f0[i], fd0[i])
        fp[i] = p
        fd[i] = dp
    return OK


@njit(cache=True)
def rk4_step(rho, dt, kind, a, b, r0, rbar, cot, h, n, sphere, work, out, have_phi=False):
    """Fused RK4 step on 2-D views; returns OK, NON_FINITE or OUT_OF_BAND.

    ``work`` has shape (9,) + rho.shape: k1..k4, stage input, phi(rho),
    phi'(rho), stage phi, stage phi'. With ``have_phi`` the caller
    guarantees work[5], work[6] already hold phi(rho), phi'(rho).
    """
    k1, k2, k3, k4, tmp = work[0], work[1], work[2], work[3], work[4]
    p0, dp0, phi, dphi = work[5], work[6], work[7], work[8]
    if not have_phi:
        st = _fill_phi(rho, kind, a, b, r0, rbar, p0, dp0)
        if st != OK:
            return st
    _speed(rho, p0, dp0, cot, h, n, k1, sphere)
    fr, ft = rho.ravel(), tmp.ravel()
    f1, f2, f3, f4 = k1.ravel(), k2.ravel(), k3.ravel(), k4.ravel()
    half = 0.5 * dt
    for i in range(fr.shape[0]):
        ft[i] = fr[i] + half * f1[i]
    st = _fill_phi_shift(tmp, rho, p0, dp0, kind, a, b, r0, rbar, phi, dphi)
    if st != OK:
        return st
    _speed(tmp, phi, dphi, cot, h, n, k2, sphere)
    for i in range(fr.shape[0]):
        ft[i] = fr[i] + half * f2[i]
    st = _fill_phi_shift(tmp, rho, p0, dp0, kind, a, b, r0, rbar, phi, dphi)
    if st != OK:
        return st
    _speed(tmp, phi, dphi, cot, h, n, k3, sphere)
    for i in range(fr.shape[0]):
        ft[i] = fr[i] + dt * f3[i]
    st = _fill_phi_shift(tmp, rho, p0, dp0, kind, a, b, r0, rbar, phi, dphi)
    if st != OK:
        return st
    _speed(tmp, phi, dphi, cot, h, n, k4, sphere)
    fo = out.ravel()
    sixth = dt / 6.0
    for i in range(fr.shape[0]):
        v = fr[i] + sixth * (f1[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i])
        if not math.isfinite(v):
            return NON_FINITE
        if v < r0 or v > rbar:
            return OUT_OF_BAND
        fo[i] = v
    return OK


@njit(cache=True)
def sphere_min_omega(rho, phi, h):
    """min sqrt(phi^2 + rho_theta^2) with the even-reflection stencil."""
    N = rho.shape[0]
    best = np.inf
    inv2h = 0.5 / h
    for i in range(N):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < N - 1 else N - 1
        d = (rho[ip] - rho[im]) * inv2h
        v = phi[i] * phi[i] + d * d
        if v < best:
            best = v
    return math.sqrt(best)


@njit(cache=True)
def torus_min_omega(rho, phi, h):
    N, M = rho.shape
    best = np.inf
    inv2h = 0.5 / h
    for i in range(N):
        im = i - 1 if i > 0 else N - 1
        ip = i + 1 if i < N - 1 else 0
        for j in range(M):
            jm = j - 1 if j > 0 else M - 1
            jp = j + 1 if j < M - 1 else 0
            rx = (rho[ip, j] - rho[im, j]) * inv2h
            ry = (rho[i, jp] - rho[i, jm]) * inv2h
            v = phi[i, j] * phi[i, j] + rx * rx + ry * ry
            if v < best:
                best = v
    return math.sqrt(best)


@njit(cache=True)
def fill_phi_only(rho, kind, a, b, phi):
    flat = rho.ravel()
    fp = phi.ravel()
    for i in range(flat.shape[0]):
        fp[i] = _phi_pair(kind, a, b, flat[i])[0]


# status codes of advance(); failures reuse NON_FINITE / OUT_OF_BAND
BUDGET, CONVERGED, TMAX = 10, 11, 12


@njit(cache=True)
def _min_omega2(rho, phi, h, sphere):
    if sphere:
        return sphere_min_omega(rho[:, 0], phi[:, 0], h)
    return torus_min_omega(rho, phi, h)


@njit(cache=True)
def advance(rho, t, t_end, cfl, h_eff, max_steps, tol_osc, kind, a, b, r0, rbar,
            cot, h, n, sphere, work, out, stats):
    """Run up to ``max_steps`` RK4 steps in place on ``rho`` (2-D view).

    Mirrors the Python loop of :func:`flow.run`: convergence and the time
    limit are tested before each step, dt = cfl h_eff^2 min(omega) capped
    by the remaining time, one retry at dt/2 on a non-finite stage.
    ``stats`` receives [t, last dt, min rho seen, max rho seen, steps].
    Returns BUDGET, CONVERGED, TMAX, NON_FINITE or OUT_OF_BAND.
    """
    flat = rho.ravel()
    fo = out.ravel()
    size = flat.shape[0]
    phi, dphi = work[5], work[6]
    steps = 0
    status = BUDGET
    while steps < max_steps:
        lo = flat[0]
        hi = flat[0]
        for i in range(size):
            v = flat[i]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        if hi - lo < tol_osc:
            status = CONVERGED
            break
        remaining = t_end - t
        if remaining <= 1e-14 * max(1.0, t_end):
            status = TMAX
            break
        st = _fill_phi(rho, kind, a, b, r0, rbar, phi, dphi)
        if st != OK:
            status = st
            break
        dt = cfl * h_eff * h_eff * _min_omega2(rho, phi, h, sphere)
        last = False
        if dt >= remaining:
            dt = remaining
            last = True
        st = rk4_step(rho, dt, kind, a, b, r0, rbar, cot, h, n, sphere, work, out, True)
        if st == NON_FINITE:
            dt = 0.5 * dt
            last = False
            st = rk4_step(rho, dt, kind, a, b, r0, rbar, cot, h, n, sphere, work, out, False)
        if st != OK:
            status = st
            break
        for i in range(size):
            v = fo[i]
            flat[i] = v
            if v < stats[2]:
                stats[2] = v
            if v > stats[3]:
                stats[3] = v
        t = t_end if last else t + dt
        stats[1] = dt
        steps += 1
    stats[0] = t
    stats[4] = steps
    return status
