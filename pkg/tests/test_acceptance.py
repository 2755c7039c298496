"""Acceptance criteria 1-6, each printing a single PASS/FAIL line."""

import contextlib
import math
import time

import numpy as np
import pytest

from ailimit.continuation import (FullParams, Scheme, continue_in_epsilon, count_small_period,
                                  jacobian, min_pairwise_sup, residual, small_period_solutions,
                                  verify_conjugacy)
from ailimit.errors import SingularMatrix
from ailimit.hyperbolicity import (CONTRACTING, EXPANDING, CertificateKind,
                                   HyperbolicityCertificate, certify, check_window_bounds,
                                   chi_to_C_lambda, dense_limit_solve, inverse_norm_bound_check,
                                   k1_chi_certificate, solve_limit_linear)
from ailimit.map3d import MapParams, inverse_step, jacobian_at, monodromy_spectrum, step
from ailimit.relation import (Branch, RelationCoeffs, branch_radicand, eval_relation,
                              forward_branch, rescale_canonical, slope)
from ailimit.symbolic import (AIState, ClosedFormCase, SymbolWord, TrappingSet, ai_fixed_point,
                              closed_form_states, unimodal_coeffs, unimodal_itinerary_orbit,
                              unimodal_periodic_orbit)

HM = RelationCoeffs(-1.0, 0.0, 0.9, 0.1)
HM_B = TrappingSet.interval(-1.3, 1.3)
BAND = (0.95, 1.05)


@contextlib.contextmanager
def criterion(capsys, n, title):
    info = {}
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        dt = time.perf_counter() - t0
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title} ({dt:.2f} s; {detail})")


def _word(rng, n):
    return SymbolWord(tuple(Branch.PLUS if b else Branch.MINUS for b in rng.integers(0, 2, n)))


def test_criterion_1_full_shift(capsys):
    with criterion(capsys, 1, "full-shift period-4 reproduction") as info:
        t0 = time.perf_counter()
        eps = 0.05
        e = FullParams(eps, -1.0, 0.0, 0.0, 1.0, 0.0, Scheme(delta=0.3))
        states = closed_form_states(ClosedFormCase.SQUARE_ONE, 4)
        sols = [continue_in_epsilon(s, e) for s in states]
        runtime = time.perf_counter() - t0
        worst_res = max(s.residual for s in sols)
        worst_orbit = max(s.orbit_residual for s in sols)
        dist = min_pairwise_sup([s.projected for s in sols])
        band = min(s.spectrum.band_distance(BAND) for s in sols)
        info.update(n=len(sols), residual=f"{worst_res:.2e}", orbit_residual=f"{worst_orbit:.2e}",
                    min_distance=f"{dist:.3g}", band_distance=f"{band:.3g}", runtime=f"{runtime:.2f}")
        assert len(sols) == 16
        assert worst_res < 1e-10
        assert worst_orbit < 1e-8
        assert dist > 0.5 / eps * 0.1
        assert band > 0.0
        assert runtime < 5.0


def test_criterion_2_period_250(capsys):
    with criterion(capsys, 2, "period-250 word of E(-1,0,0.9,0.1)") as info:
        t0 = time.perf_counter()
        word = _word(np.random.default_rng(250), 250)
        state = ai_fixed_point(HM, word, HM_B)
        e = FullParams(0.010, -1.0, 0.0, 0.0, 0.9, 0.1, Scheme(delta=0.3))
        sol = continue_in_epsilon(state, e)
        dev = verify_conjugacy(state, e)
        runtime = time.perf_counter() - t0
        info.update(contraction=f"{state.contraction_factor:.3g}", residual=f"{sol.residual:.2e}",
                    conjugacy=f"{dev:.2e}", runtime=f"{runtime:.2f}")
        assert state.contraction_factor < 1.0
        assert sol.residual < 1e-9
        assert dev < 1e-7
        assert runtime < 60.0


def test_criterion_3_unimodal(capsys):
    with criterion(capsys, 3, "unimodal branch, cbar = 0.9") as info:
        cbar = 0.9
        k = unimodal_coeffs(cbar)
        fp = unimodal_periodic_orbit(cbar, 1, 0.9)
        d = abs(slope(k, fp.values[0], fp.values[0]).value)
        crit_value = forward_branch(k, Branch.PLUS, 0.5 / cbar)
        info.update(fixed_point=f"{fp.values[0]:.15g}", derivative=f"{d:.12g}",
                    critical_value=f"{crit_value:.6g}")
        assert fp.values[0] == pytest.approx(1.0, abs=1e-12)
        assert abs(d - 4.0) <= 1e-9
        assert crit_value == pytest.approx(1 / (2 * math.sqrt(cbar * (1 - cbar))), rel=1e-14)
        assert crit_value > 1 / cbar
        e = FullParams(0.02, k.alpha1, k.sigma1, 0.0, k.a, k.c, Scheme(delta=0.3))
        worst = 0.0
        for it in ("LR", "LRR", "LLR"):
            s = unimodal_itinerary_orbit(cbar, it)
            assert np.min(np.abs(s.values - 0.5 / cbar)) > 1e-3 / cbar
            assert certify(s).kind is CertificateKind.EXPANDING
            sol = continue_in_epsilon(s, e)
            worst = max(worst, sol.residual)
        info.update(orbits="LR,LRR,LLR", residual=f"{worst:.2e}")
        assert worst < 1e-9


def test_criterion_4_degenerate(capsys):
    with criterion(capsys, 4, "degenerate period-2 limit") as info:
        t0 = time.perf_counter()
        k = RelationCoeffs(-1.0, 0.0, 0.0, 0.0)
        for s in (0.5, 2.0, 3.0):
            st = AIState.from_values(k, [s, 1.0 / s])
            c = certify(st)
            assert c.kind is CertificateKind.DEGENERATE
            assert abs(math.exp(c.log_product) - 1.0) <= 1e-12
            with pytest.raises(SingularMatrix):
                inverse_norm_bound_check(st)
        rows = []
        for eps in np.round(np.arange(1, 10) * 0.1, 12):
            e = FullParams(float(eps), -1.0, 0.0, 0.0, 0.0, 0.0, Scheme(delta=1.0))
            sols = small_period_solutions(e, 2)
            rows.append(count_small_period(e))
            assert sorted(float(x[0]) for x in sols if x[0] == x[1]) == pytest.approx([-1.0, 1.0])
        runtime = time.perf_counter() - t0
        info.update(rows=len(rows), counts=sorted(set(rows)), runtime=f"{runtime:.2f}")
        assert all(r == (2, 0) for r in rows)
        assert runtime < 2.0


def _bound_states():
    rng = np.random.default_rng(5)
    out = [ai_fixed_point(HM, _word(rng, int(n)), HM_B) for n in rng.integers(2, 40, 8)]
    out += closed_form_states(ClosedFormCase.SQUARE_ONE, 3)[:6]
    out += [unimodal_itinerary_orbit(0.9, it) for it in ("R", "LR", "LRR", "LLR", "LRRR", "LLRR")]
    return out


def test_criterion_5_inverse_bound(capsys):
    with criterion(capsys, 5, "inverse-norm bound and series solve") as info:
        states = _bound_states()
        rng = np.random.default_rng(6)
        worst_ratio = 0.0
        worst_raw = 0.0
        worst_series = 0.0
        for s in states:
            c = certify(s)
            assert c.hyperbolic
            r = inverse_norm_bound_check(s, c)
            assert r.computed_norm <= (1 + 1 / (c.C * (c.lam - 1))) * (1 + 1e-9)
            worst_ratio = max(worst_ratio, r.computed_norm / r.bound)
            worst_raw = max(worst_raw, r.raw_norm / r.bound)
            eta = rng.normal(size=s.period)
            sol = solve_limit_linear(s, eta, cert=c)
            z = dense_limit_solve(s, eta, EXPANDING if c.kind.expanding else CONTRACTING)
            err = float(np.max(np.abs(sol.zeta - z)))
            # round-off of the dense solve is the floor when the series is exact to machine precision
            allowed = 10 * sol.truncation_error_bound + 1e-13 * (1 + float(np.max(np.abs(z))))
            worst_series = max(worst_series, err / allowed)
            assert err <= allowed
        info.update(states=len(states), norm_over_bound=f"{worst_ratio:.3f}",
                    raw_norm_over_bound=f"{worst_raw:.3f}", series_err_over_allowed=f"{worst_series:.2e}")
        assert len(states) == 20


def test_criterion_6_properties(capsys):
    with criterion(capsys, 6, "property suites") as info:
        rng = np.random.default_rng(6)
        checks = 0

        # branch/relation residual consistency and slope against finite differences
        for _ in range(300):
            k = RelationCoeffs(*rng.uniform(-2, 2, 2), rng.uniform(0.2, 2), rng.uniform(-2, 2))
            u = rng.uniform(-3, 3)
            h = 1e-5
            if min(branch_radicand(k, x) for x in (u - h, u, u + h)) <= 0.05 * k.scale ** 2:
                continue
            for s in (Branch.PLUS, Branch.MINUS):
                v = forward_branch(k, s, u)
                assert abs(eval_relation(k, u, v)) <= 1e-12 * (1 + u * u) * k.scale ** 2
                m = slope(k, u, v)
                if m.is_finite and abs(m.value) > 1e-2:
                    fd = (forward_branch(k, s, u + h) - forward_branch(k, s, u - h)) / (2 * h)
                    assert abs(fd - m.value) <= 1e-6 * abs(m.value)
                checks += 1

        # Jacobian of the residual against central differences at three step sizes
        for _ in range(50):
            n = int(rng.integers(1, 12))
            e = FullParams(rng.uniform(0, 0.5), *rng.uniform(-1.5, 1.5, 5), Scheme(*rng.uniform(-1.5, 1.5, 3)))
            xi, zeta = rng.uniform(-2, 2, n), rng.normal(size=n)
            jv = jacobian(xi, e).matvec(zeta)
            scale = 1.0 + np.max(np.abs(xi)) ** 2 + np.max(np.abs(e.products()))
            for h in (1e-4, 1e-5, 1e-6):
                fd = (residual(xi + h * zeta, e) - residual(xi - h * zeta, e)) / (2 * h)
                assert np.max(np.abs(fd - jv)) <= h * h * scale + 1e-14 * scale * np.max(np.abs(zeta)) / h
            # shift equivariance of the residual
            assert np.allclose(residual(np.roll(xi, -1), e), np.roll(residual(xi, e), -1), atol=1e-13)
            checks += 2

        # shift equivariance of phi
        for _ in range(30):
            w = _word(rng, int(rng.integers(1, 12)))
            a = ai_fixed_point(HM, w, HM_B)
            b = ai_fixed_point(HM, w.rotate(1), HM_B)
            assert np.max(np.abs(b.values - np.roll(a.values, -1))) <= 1e-12
            checks += 1

        # rescaling conjugacy of canonical forms
        for _ in range(200):
            k = RelationCoeffs(*rng.uniform(-4, 4, 2), rng.uniform(0.1, 2), rng.uniform(-2, 2))
            cf = rescale_canonical(k)
            u = rng.uniform(-6, 6)
            if branch_radicand(k, u) < 0:
                continue
            v = forward_branch(k, Branch.PLUS, u)
            tol = 1e-11 * (1 + u * u + v * v) * k.scale ** 2 / cf.scale ** 2
            assert abs(eval_relation(cf.rescaled, u / cf.scale, v / cf.scale)) <= tol
            checks += 1

        # 3D map: determinant, inverse round trip
        for _ in range(200):
            p = MapParams.from_ac(rng.uniform(-3, 3), rng.uniform(-2, 2), rng.choice([-1, 1]) * rng.uniform(0.05, 2),
                                  rng.uniform(-2, 2), rng.uniform(-2, 2))
            s = rng.uniform(-5, 5, 3)
            assert np.linalg.det(jacobian_at(p, s)) == pytest.approx(p.delta, abs=1e-12 * (1 + np.max(np.abs(s))) ** 2)
            back = inverse_step(p, step(p, s))
            assert np.max(np.abs(np.array(back) - s)) <= 1e-12 * (1 + np.max(np.abs(s)) ** 2 / abs(p.delta))
            checks += 2

        # monodromy determinant on continued orbits
        for _ in range(10):
            w = _word(rng, int(rng.integers(1, 30)))
            e = FullParams(0.01, -1.0, 0.0, 0.0, 0.9, 0.1, Scheme(delta=0.3))
            sol = continue_in_epsilon(ai_fixed_point(HM, w, HM_B), e)
            assert math.exp(sol.spectrum.log_det / sol.period) == pytest.approx(0.3, rel=1e-6 / sol.period)
            assert math.exp(sol.spectrum.log_det) == pytest.approx(0.3 ** sol.period, rel=1e-6)
            checks += 1

        # k1-chi and (C, lam) certificates agree on every certified test state
        for s in _bound_states():
            c = certify(s)
            if c.kind not in (CertificateKind.EXPANDING, CertificateKind.CONTRACTING):
                continue
            chi, ok, d = k1_chi_certificate(s, c.k1)
            assert ok and (d == EXPANDING) == c.kind.expanding
            C2, lam2 = chi_to_C_lambda(c.k1, chi, c.m_min if d == EXPANDING else c.m_max, d)
            assert check_window_bounds(s, HyperbolicityCertificate(c.kind, C2, lam2))
            assert check_window_bounds(s, c)
            checks += 1
        info.update(checks=checks)
        assert checks > 500
