import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (AxisymmetricField, TorusField, euclidean_revolution_H, sphere_area,
                     sphere_volume, variational_H)
from warpflow.base import SphereGrid, TorusGrid
from warpflow.errors import NonFinite, OutOfBand
from warpflow.hypersurface import (GraphState, area, enclosed_volume, extrinsic, fast_speed,
                                   shape_from_h, speed)
from warpflow.warping import WarpingProfile

SIN = WarpingProfile("sin", 0.1, 1.5)
EXP = WarpingProfile("exp", -1.0, 1.0, a=1.0, b=0.5)


def _sphere_H_error(N, profile, field):
    g = SphereGrid(N)
    t = g.theta
    H = extrinsic(g, profile, field(t)).H
    phi, dphi = profile.phi_dphi(field(t))
    gsq, lap, hgg = field.invariants(t)
    return float(np.max(np.abs(H - variational_H(phi, dphi, 2, gsq, lap, hgg))))


def test_graph_state_is_frozen_and_finite():
    s = GraphState(np.array([0.5, 0.6]), 1)
    assert s.t == 1.0 and s.osc == pytest.approx(0.1)
    with pytest.raises(ValueError):
        s.rho[0] = 1.0
    with pytest.raises(NonFinite):
        GraphState(np.array([0.5, np.inf]))


def test_slice_curvatures():
    g = SphereGrid(64)
    for c in (0.3, 0.8, 1.4):
        ext = extrinsic(g, SIN, np.full(64, c))
        expected = math.cos(c) / math.sin(c)
        assert np.allclose(ext.H, 2 * expected, rtol=1e-14)
        assert np.allclose(ext.sigma2, expected ** 2, rtol=1e-14)
        assert np.allclose(ext.u, math.sin(c))
        assert np.max(np.abs(speed(g, SIN, np.full(64, c)))) <= 1e-14


def test_mean_curvature_against_variational_oracle_sphere():
    field = AxisymmetricField(0.8, 0.2, 0.05)
    errs = [_sphere_H_error(N, SIN, field) for N in (64, 128, 256)]
    assert errs[-1] < 1e-4
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.9


def test_mean_curvature_against_variational_oracle_torus():
    field = TorusField(0.1, 0.3, 0.2, 0.05)
    errs = []
    for N in (32, 64, 128):
        g = TorusGrid(N)
        rho = field(g.x, g.y)
        phi, dphi = EXP.phi_dphi(rho)
        ref = variational_H(phi, dphi, 2, *field.invariants(g.x, g.y))
        errs.append(float(np.max(np.abs(extrinsic(g, EXP, rho).H - ref))))
    assert min(np.log2(np.array(errs[:-1]) / errs[1:])) >= 1.9


def test_euclidean_surface_of_revolution():
    lin = WarpingProfile("linear", 0.1, 3.0)
    field = AxisymmetricField(1.0, 0.3, 0.1)
    g = SphereGrid(256)
    H = extrinsic(g, lin, field(g.theta)).H
    assert np.max(np.abs(H - euclidean_revolution_H(field, g.theta))) < 1e-3


@pytest.mark.parametrize("profile", [SIN, WarpingProfile("sinh", 0.1, 2.0),
                                     WarpingProfile("linear", 0.1, 2.0)], ids=["sin", "sinh", "lin"])
def test_area_and_volume_against_quadrature(profile):
    field = AxisymmetricField(0.8, 0.2, 0.05)
    g = SphereGrid(256)
    rho = field(g.theta)
    assert area(g, profile, rho) == pytest.approx(sphere_area(profile, field), rel=1e-8)
    assert enclosed_volume(g, profile, rho) == pytest.approx(sphere_volume(profile, field), rel=1e-8)


def test_torus_area_of_slice():
    g = TorusGrid(32, 3.0)
    c = 0.4
    phi = math.exp(0.5 * c)
    assert area(g, EXP, np.full(g.shape, c)) == pytest.approx(9.0 * phi ** 2, rel=1e-14)


@given(st.floats(0.5, 1.1), st.floats(-0.3, 0.3), st.floats(-0.1, 0.1))
def test_shape_routes_agree_sphere(c, a, b):
    g = SphereGrid(48)
    ext = extrinsic(g, SIN, AxisymmetricField(c, a, b)(g.theta))
    other = shape_from_h(g, ext)
    scale = max(float(np.max(np.abs(ext.H))), float(np.max(1 / ext.phi)))
    assert np.max(np.abs(ext.shape - other)) <= 1e-10 * scale
    # trace and determinant invariants of the mixed tensor
    assert np.allclose(ext.norm_A_sq, ext.H ** 2 - 2 * ext.sigma2, atol=1e-10 * scale ** 2)


@given(st.floats(-0.2, 0.2), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(-0.1, 0.1))
def test_shape_routes_agree_torus(c, a, b, e):
    g = TorusGrid(24)
    ext = extrinsic(g, EXP, TorusField(c, a, b, e)(g.x, g.y))
    other = shape_from_h(g, ext)
    scale = max(float(np.max(np.abs(ext.H))), float(np.max(1 / ext.phi)))
    assert np.max(np.abs(ext.shape - other)) <= 1e-10 * scale
    assert np.all(ext.omega >= ext.phi) and np.all(ext.u <= ext.phi + 1e-15)


def test_fast_speed_matches_reference():
    g = SphereGrid(128)
    rho = AxisymmetricField(0.8, 0.2, 0.05)(g.theta)
    ref = speed(g, SIN, rho)
    assert np.max(np.abs(fast_speed(g, SIN, rho) - ref)) <= 1e-11 * np.max(np.abs(ref))
    t = TorusGrid(48)
    rho = TorusField(0.0, 0.3, 0.2, 0.1)(t.x, t.y)
    ref = speed(t, EXP, rho)
    assert np.max(np.abs(fast_speed(t, EXP, rho) - ref)) <= 1e-11 * np.max(np.abs(ref))


def test_band_is_enforced():
    g = SphereGrid(16)
    with pytest.raises(OutOfBand):
        extrinsic(g, SIN, np.full(16, 2.0))
    with pytest.raises(OutOfBand):
        fast_speed(g, SIN, np.full(16, 0.05))
