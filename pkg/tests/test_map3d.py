import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ailimit.errors import NotPeriodic, ZeroDelta
from ailimit.map3d import (MapParams, State3, inverse_step, iterate, jacobian_at,
                           linearised_orbit_solve, monodromy_spectrum, orbit_residual, step)

coef = st.floats(-2, 2)
coord = st.floats(-5, 5)
states = st.tuples(coord, coord, coord)


@st.composite
def map_params(draw, nonzero_delta=True):
    a, c = draw(coef), draw(coef)
    d = draw(st.floats(0.05, 2) | st.floats(-2, -0.05)) if nonzero_delta else draw(coef)
    return MapParams.from_ac(draw(st.floats(-3, 3)), draw(coef), d, a, c)


def test_params_normalisation():
    with pytest.raises(ValueError):
        MapParams(0, 0, 0.3, 1.0, 0.5, 0.0)
    p = MapParams.from_ac(0, 0, 0.3, 0.2, 0.3)
    assert p.b == pytest.approx(0.5)


def test_step_examples():
    p = MapParams(0.0, 0.0, 0.3, 1.0, 0.0, 0.0)
    assert step(p, (0, 0, 0)) == (0.0, 0.0, 0.0)
    # x = alpha + x^2 with alpha = -1/eps^2 at eps = 0.1 (sigma = delta = 0)
    x = (1 + math.sqrt(1 + 400)) / 2
    q = MapParams(-100.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    assert x == pytest.approx(10.512492, abs=1e-6)
    assert step(q, (x, x, x)) == pytest.approx((x, x, x), abs=1e-6)


@given(map_params(nonzero_delta=False), states)
def test_step_shifts_coordinates(p, s):
    out = step(p, s)
    assert (out.y, out.z) == (s[0], s[1])


@given(map_params(), states)
def test_inverse_round_trip(p, s):
    back = inverse_step(p, step(p, s))
    scale = 1 + max(abs(v) for v in s) ** 2 / abs(p.delta)
    assert np.allclose(back, s, rtol=0, atol=1e-12 * scale)
    fwd = step(p, inverse_step(p, s))
    assert np.allclose(fwd, s, rtol=0, atol=1e-12 * (1 + max(abs(v) for v in s) ** 2) * (1 + 1 / abs(p.delta)))


def test_inverse_needs_delta():
    with pytest.raises(ZeroDelta):
        inverse_step(MapParams(0, 0, 0, 1, 0, 0), (1, 2, 3))


def test_fixed_point_fixed_by_inverse():
    p = MapParams(-100.0, 0.0, 0.3, 1.0, 0.0, 0.0)
    # x = alpha + delta x + x^2
    x = ((1 - 0.3) + math.sqrt((1 - 0.3) ** 2 + 400)) / 2
    assert step(p, (x, x, x)) == pytest.approx((x, x, x), rel=1e-14)
    assert inverse_step(p, (x, x, x)) == pytest.approx((x, x, x), rel=1e-12)


@given(map_params(nonzero_delta=False), states)
def test_jacobian_determinant(p, s):
    assert np.linalg.det(jacobian_at(p, s)) == pytest.approx(p.delta, abs=1e-12 * (1 + max(map(abs, s))) ** 2)


@given(map_params(nonzero_delta=False), states, st.integers(0, 2 ** 31 - 1))
def test_jacobian_finite_difference(p, s, seed):
    v = np.random.default_rng(seed).normal(size=3)
    J = jacobian_at(p, s)
    s = np.array(s)
    for h in (1e-4, 1e-5, 1e-6):
        fd = (np.array(step(p, s + h * v)) - np.array(step(p, s - h * v))) / (2 * h)
        scale = 1 + np.max(np.abs(s)) + np.max(np.abs(v))
        assert np.max(np.abs(fd - J @ v)) <= 10 * h * h * scale ** 2 + 1e-13 * scale ** 2 / h


def test_iterate_and_orbit_residual():
    p = MapParams(0.5, 0.1, 0.3, 0.4, 0.3, 0.3)
    pts = iterate(p, (0.1, 0.2, 0.3), 5)
    assert len(pts) == 6
    assert orbit_residual(p, pts, cyclic=False) == 0.0
    assert orbit_residual(p, pts, cyclic=True) > 0.0
    with pytest.raises(ValueError):
        orbit_residual(p, [])


# --- monodromy -------------------------------------------------------------------

def _fixed_point(p):
    # period-1 points solve x = alpha + (delta - sigma) x + x^2 when a + b + c = 1
    q1 = p.delta - p.sigma - 1.0
    disc = q1 * q1 - 4 * p.alpha
    x = (-q1 + math.sqrt(disc)) / 2
    return State3(x, x, x)


def test_monodromy_fixed_point_matches_eig():
    p = MapParams(-3.0, 0.5, 0.3, 0.7, 0.2, 0.1)
    fp = _fixed_point(p)
    assert orbit_residual(p, [fp]) < 1e-12
    sp = monodromy_spectrum(p, [fp])
    ref = np.linalg.eigvals(jacobian_at(p, fp))
    assert np.allclose(np.sort_complex(sp.eigenvalues), np.sort_complex(ref), atol=1e-10)
    assert math.exp(sp.log_det) == pytest.approx(0.3, rel=1e-12)


def test_monodromy_complex_pair():
    # a fixed point whose Jacobian has a complex pair
    p = MapParams(-0.2, 0.0, 0.9, 1.0, 0.0, 0.0)
    fp = _fixed_point(p)
    J = jacobian_at(p, fp)
    ref = np.linalg.eigvals(J)
    assert np.any(np.abs(ref.imag) > 1e-3)
    for n in (1, 2, 5, 30):
        sp = monodromy_spectrum(p, [fp] * n)
        assert np.allclose(np.sort(sp.per_step_abs), np.sort(np.abs(ref)), rtol=1e-8)
        assert math.exp(sp.log_det / n) == pytest.approx(0.9, rel=1e-10)


def _random_cycle(rng, N, d):
    """Random 3x3 companion factors; the spectrum test does not need a real orbit."""
    return [np.array([[rng.normal(), rng.normal(), d], [1.0, 0, 0], [0, 1.0, 0]]) for _ in range(N)]


@pytest.mark.parametrize("N", [1, 2, 3, 7, 25])
def test_periodic_qr_against_eig(N):
    from ailimit.map3d import _periodic_qr
    rng = np.random.default_rng(N)
    for _ in range(10):
        mats = _random_cycle(rng, N, 0.6)
        M = np.eye(3)
        for J in mats:
            M = J @ M
        ref = np.linalg.eigvals(M)
        sp = _periodic_qr(mats)
        got = sp.eigenvalues
        # compare as multisets: match each reference eigenvalue to the nearest one
        for z in ref:
            assert np.min(np.abs(got - z)) <= 1e-7 * max(1.0, abs(z)) + 1e-9 * np.max(np.abs(ref))
        assert sp.log_det == pytest.approx(N * math.log(0.6), rel=1e-9)


def test_monodromy_long_product_does_not_overflow():
    from ailimit.map3d import _periodic_qr
    rng = np.random.default_rng(0)
    mats = [np.array([[5 + rng.random(), 0.3, 0.3], [1.0, 0, 0], [0, 1.0, 0]]) for _ in range(2000)]
    sp = _periodic_qr(mats)
    assert np.all(np.isfinite(sp.log_abs))
    assert sp.log_det == pytest.approx(2000 * math.log(0.3), rel=1e-9)
    assert sp.per_step_abs[0] > 5


def test_monodromy_requires_periodic_orbit():
    p = MapParams(0.5, 0.1, 0.3, 0.4, 0.3, 0.3)
    with pytest.raises(NotPeriodic):
        monodromy_spectrum(p, iterate(p, (0.1, 0.2, 0.3), 3))


def test_band_distance():
    p = MapParams(-3.0, 0.5, 0.3, 0.7, 0.2, 0.1)
    sp = monodromy_spectrum(p, [_fixed_point(p)])
    r = sp.per_step_abs
    assert sp.band_distance() == pytest.approx(np.min(np.maximum(0.95 - r, r - 1.05)))
    assert sp.outside_band() == (sp.band_distance() > 0)
    assert len(sp.to_json()) == 3


def test_linearised_orbit_solve():
    p = MapParams(-3.0, 0.5, 0.3, 0.7, 0.2, 0.1)
    fp = _fixed_point(p)
    orbit = [fp] * 3
    rng = np.random.default_rng(3)
    rhs = rng.normal(size=(3, 3))
    z = linearised_orbit_solve(p, orbit, rhs)
    J = jacobian_at(p, fp)
    for t in range(3):
        assert np.allclose(z[(t + 1) % 3] - J @ z[t], rhs[t], atol=1e-10)
