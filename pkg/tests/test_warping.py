import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from warpflow.errors import OutOfBand
from warpflow.warping import (WarpingProfile, big_phi, check_conditions, evaluate, load_table,
                              make_profile, parse_phi, photon_sphere_roots, shell_primitive,
                              stability_check)


def test_evaluate_closed_forms():
    assert np.allclose(evaluate(WarpingProfile("sin", 0.1, 3.0), math.pi / 2), (1, 0, -1, 0), atol=1e-15)
    assert np.allclose(evaluate(WarpingProfile("linear", 0.1, 3.0), 2.0), (2, 1, 0, 0))
    assert np.allclose(evaluate(WarpingProfile("exp", -1, 1, a=1, b=0.5), 0.0), (1, 0.5, 0.25, 0.125))


def test_evaluate_out_of_band():
    p = WarpingProfile("sin", 0.1, 1.5)
    with pytest.raises(OutOfBand):
        evaluate(p, 1.6)
    with pytest.raises(OutOfBand):
        p.phi(np.array([0.5, 0.05]))


@pytest.mark.parametrize("kind,K,q", [("sin", 1, 1.0), ("sinh", 1, 1.0), ("linear", 1, 1.0),
                                      ("exp", 0, 0.0), ("const", 0, 0.0)])
def test_conditions_constant_Q(kind, K, q):
    rep = check_conditions(WarpingProfile(kind), K)
    assert rep.min_Q == rep.max_Q == q
    assert rep.satisfied


@pytest.mark.parametrize("kind,a,b", [("sin", 1, 0), ("sinh", 1, 0), ("linear", 1, 0),
                                      ("exp", 1.3, 0.7), ("exp", 2.0, -0.4)])
def test_Q_from_derivatives_matches_symbolic(kind, a, b):
    p = WarpingProfile(kind, a=a, b=b)
    r = np.linspace(p.r0, p.r_bar, 257)
    f, df, ddf, _ = p.derivatives(r)
    q = df * df - f * ddf
    assert np.max(np.abs(q - p.Q(r))) <= 1e-13 * max(1.0, float(np.max(f * f)))


def test_conditions_violated_for_small_K():
    rep = check_conditions(WarpingProfile("sin"), 0.5)
    assert rep.satisfied_lower and not rep.satisfied_upper and not rep.satisfied


def test_schwarzschild_conditions_and_sign():
    p = WarpingProfile("schwarzschild", m=1.0)
    rep = check_conditions(p, 1.0)
    assert rep.min_Q < 0 < rep.max_Q < 1
    assert not rep.satisfied_lower and rep.satisfied_upper


def test_schwarzschild_satisfies_ode():
    m = 2.0
    p = WarpingProfile("schwarzschild", 0.5, 6.0, m=m)
    r = np.linspace(0.5, 6.0, 101)
    f, df, ddf, dddf = p.derivatives(r)
    assert np.all(f > m)
    assert np.allclose(df, np.sqrt(1 - m / f), atol=1e-12)
    assert np.allclose(ddf, m / (2 * f * f))
    # phi itself agrees with the closed-form arclength relation
    from warpflow.warping import schwarzschild_arclength
    assert np.allclose(schwarzschild_arclength(f, m), r, atol=1e-10)


def test_photon_sphere():
    ps = photon_sphere_roots(WarpingProfile("schwarzschild", m=1.0))
    assert len(ps.roots) == 1
    p = WarpingProfile("schwarzschild", m=1.0)
    r = ps.roots[0]
    assert abs(float(p.phi(r)) - 1.5) <= 1e-9
    assert abs(float(p.Q(r))) <= 1e-10
    assert float(p.Q(r - 1e-3)) < 0 < float(p.Q(r + 1e-3))
    assert photon_sphere_roots(WarpingProfile("sin")).roots == ()
    assert photon_sphere_roots(WarpingProfile("exp", a=1, b=0.5)).identically_zero
    assert photon_sphere_roots(WarpingProfile("const", a=2)).identically_zero


def test_stability_margins():
    sat, margin = stability_check(WarpingProfile("sin"), 2.0, 1.0)
    assert sat and margin == 0.0
    L = 3.0
    lam = (2 * math.pi / L) ** 2
    sat, margin = stability_check(WarpingProfile("exp", a=1, b=0.5), lam, 0.0)
    assert sat and margin == lam
    with pytest.raises(OutOfBand):
        stability_check(WarpingProfile("sin", 0.1, 1.0), 2.0, 2.0)


def test_stability_fails_for_large_Q_table():
    # phi = 2 sinh(r) has Q = 4 > lambda1 / n = 1 on the unit sphere
    r = np.linspace(0.2, 2.0, 400)
    p = WarpingProfile("table", table=(r, 2 * np.sinh(r)))
    sat, margin = stability_check(p, 2.0, 1.0)
    assert not sat and margin == pytest.approx(2.0 - 2 * 4.0, abs=1e-4)


def test_primitives_closed_forms():
    lin = WarpingProfile("linear", 0.0, 2.0, n=2)
    r = np.linspace(0, 2, 9)
    assert np.allclose(big_phi(lin, r), r ** 2 / 2)
    assert np.allclose(shell_primitive(lin, r), r ** 3 / 3)
    s1 = WarpingProfile("sin", 0.0, math.pi, n=1)
    assert np.allclose(shell_primitive(s1, r[r <= math.pi]), 1 - np.cos(r[r <= math.pi]))
    c = WarpingProfile("const", 0.5, 2.0, a=1.7)
    assert np.allclose(shell_primitive(c, 1.5), 1.7 ** 2 * 1.0)
    for prof in (lin, s1, c):
        assert big_phi(prof, prof.r0) == 0.0 and shell_primitive(prof, prof.r0) == 0.0


@pytest.mark.parametrize("profile", [
    WarpingProfile("sin", 0.1, 3.0, n=3),
    WarpingProfile("sinh", 0.1, 2.0, n=4),
    WarpingProfile("exp", -1, 1, n=2, a=0.7, b=-0.8),
    WarpingProfile("schwarzschild", 0.2, 3.0, n=2, m=1.0),
    WarpingProfile("table", n=2, table=(np.linspace(0, 2, 50), 1 + np.linspace(0, 2, 50) ** 2)),
], ids=["sin3", "sinh4", "exp", "schwarzschild", "table"])
def test_primitives_against_quadrature(profile):
    for r in np.linspace(profile.r0, profile.r_bar, 7)[1:]:
        ref_n = quad(lambda s: float(profile.phi(s)) ** profile.n, profile.r0, r, epsabs=1e-14,
                     epsrel=1e-13, limit=400)[0]
        ref_1 = quad(lambda s: float(profile.phi(s)), profile.r0, r, epsabs=1e-14,
                     epsrel=1e-13, limit=400)[0]
        assert float(profile.shell_primitive(r)) == pytest.approx(ref_n, rel=1e-11, abs=1e-13)
        assert float(profile.big_phi(r)) == pytest.approx(ref_1, rel=1e-11, abs=1e-13)


@given(st.floats(0.2, 2.8))
def test_primitive_derivative_is_phi_n(r):
    p = WarpingProfile("sin", 0.1, 3.0, n=2)
    h = 1e-5
    fd = (float(p.shell_primitive(r + h)) - float(p.shell_primitive(r - h))) / (2 * h)
    assert fd == pytest.approx(float(p.phi(r)) ** 2, abs=1e-8)


def test_table_spline_derivatives(tmp_path):
    r = np.linspace(0.0, 3.0, 301)
    path = tmp_path / "phi.txt"
    np.savetxt(path, np.column_stack([r, np.sin(r) + 1.0]))
    p = make_profile(f"table:{path.name}", 0.2, 2.8, base_dir=tmp_path)
    x = np.linspace(0.3, 2.7, 50)
    f, df, ddf, _ = p.derivatives(x)
    assert np.allclose(f, np.sin(x) + 1, atol=1e-8)
    assert np.allclose(df, np.cos(x), atol=1e-6)
    assert np.allclose(ddf, -np.sin(x), atol=1e-3)
    assert load_table(path)[0].shape == (301,)


def test_parse_phi_grammar():
    assert parse_phi("sin") == {"kind": "sin"}
    assert parse_phi(" exp( 1 , 0.5 ) ") == {"kind": "exp", "a": 1.0, "b": 0.5}
    assert parse_phi("const(2)") == {"kind": "const", "a": 2.0}
    assert parse_phi("schwarzschild(1.5)") == {"kind": "schwarzschild", "m": 1.5}
    assert parse_phi("table:data/phi.txt") == {"kind": "table", "path": "data/phi.txt"}
    for bad in ("cos", "exp(1)", "const()", "table:", "sin(2)"):
        with pytest.raises(ValueError):
            parse_phi(bad)


@pytest.mark.parametrize("kwargs", [
    dict(kind="sin", r0=1.0, r_bar=0.5),
    dict(kind="sin", r0=0.1, r_bar=3.5),        # phi < 0 beyond pi
    dict(kind="const", a=-1.0),
    dict(kind="exp", a=0.0, b=1.0),
    dict(kind="schwarzschild", m=-1.0),
    dict(kind="banana"),
])
def test_invalid_profiles(kwargs):
    kind = kwargs.pop("kind")
    with pytest.raises(ValueError):
        WarpingProfile(kind, **kwargs)


def test_phi_may_vanish_at_endpoint_for_profiles():
    p = WarpingProfile("sin", 0.0, math.pi, n=1)
    assert float(p.phi(0.0)) == 0.0
