"""Continuation of AI states into periodic orbits of the 3D map.

With x_t = xi_t / eps an orbit of L satisfies the scaled recurrence

    L(xi; e)_t = A - eps xi_{t+1} - S xi_{t-1} + D xi_{t-2}
                 + a xi_t^2 + b xi_t xi_{t-1} + c xi_{t-1}^2 = 0,

where (A, S, D) = (eps^2 alpha, eps sigma, eps delta) stay finite as eps -> 0.
At eps = 0 it reduces to the limit relation, and nondegenerate AI states
are followed to eps > 0 by Newton's method.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.linalg import splu

from .errors import (
    DegenerateElimination,
    NoConvergence,
    SingularJacobian,
    StepTooLarge,
    StepUnderflow,
    ZeroEpsilon,
)
from .map3d import (MapParams, MonodromySpectrum, linearised_orbit_solve, monodromy_spectrum,
                    orbit_residual, step)
from .relation import RelationCoeffs
from .symbolic import AIState

DENSE_LIMIT = 512
PIVOT_RATIO = 1e-13


@dataclass(frozen=True)
class Scheme:
    """How (eps^2 alpha, eps sigma, eps delta) depend on eps.

    eps^2 alpha = alpha1 + alpha_slope eps, eps sigma = sigma1 + sigma_slope eps,
    eps delta = delta1 + delta eps.  The defaults give alpha = alpha1/eps^2,
    sigma = sigma1/eps and a constant Jacobian determinant ``delta``.
    """

    delta: float = 0.0
    sigma_slope: float = 0.0
    alpha_slope: float = 0.0

    def to_json(self) -> dict:
        return {"delta": self.delta, "sigma_slope": self.sigma_slope, "alpha_slope": self.alpha_slope}


@dataclass(frozen=True)
class FullParams:
    epsilon: float
    alpha1: float
    sigma1: float
    delta1: float = 0.0
    a: float = 1.0
    c: float = 0.0
    scheme: Scheme = field(default_factory=Scheme)

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be >= 0")

    @property
    def b(self) -> float:
        return 1.0 - self.a - self.c

    def products(self, eps: float | None = None) -> tuple[float, float, float]:
        """(eps^2 alpha, eps sigma, eps delta) at ``eps`` (default: own epsilon)."""
        e = self.epsilon if eps is None else eps
        s = self.scheme
        return (self.alpha1 + s.alpha_slope * e, self.sigma1 + s.sigma_slope * e,
                self.delta1 + s.delta * e)

    def product_derivatives(self) -> tuple[float, float, float]:
        s = self.scheme
        return s.alpha_slope, s.sigma_slope, s.delta

    def with_epsilon(self, eps: float) -> "FullParams":
        return replace(self, epsilon=float(eps))

    def limit_coeffs(self) -> RelationCoeffs:
        return RelationCoeffs(self.alpha1, self.sigma1, self.a, self.c)

    def map_params(self) -> MapParams:
        if self.epsilon == 0.0:
            raise ZeroEpsilon("the 3D map is undefined at eps = 0")
        A, S, D = self.products()
        e = self.epsilon
        return MapParams(A / e ** 2, S / e, D / e, self.a, self.b, self.c)

    def to_json(self) -> dict:
        out = {"epsilon": self.epsilon, "alpha1": self.alpha1, "sigma1": self.sigma1,
               "delta1": self.delta1, "a": self.a, "b": self.b, "c": self.c,
               "scheme": self.scheme.to_json()}
        if self.epsilon > 0.0:
            m = self.map_params()
            out.update(alpha=m.alpha, sigma=m.sigma, delta=m.delta)
        return out


def residual(xi, e: FullParams) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    A, S, D = e.products()
    nxt, prev, prev2 = np.roll(xi, -1), np.roll(xi, 1), np.roll(xi, 2)
    return (A - e.epsilon * nxt - S * prev + D * prev2
            + e.a * xi * xi + e.b * xi * prev + e.c * prev * prev)


def residual_eps_derivative(xi, e: FullParams) -> np.ndarray:
    """Partial derivative of the residual in eps along the scheme."""
    xi = np.asarray(xi, dtype=float)
    dA, dS, dD = e.product_derivatives()
    return dA - np.roll(xi, -1) - dS * np.roll(xi, 1) + dD * np.roll(xi, 2)


class CyclicBanded:
    """Cyclic matrix stored by diagonals: (M z)_t = sum_o band[o][t] z_{t+o}."""

    def __init__(self, bands: dict[int, np.ndarray]):
        self.bands = {o: np.asarray(v, dtype=float) for o, v in bands.items()}
        self.n = len(next(iter(self.bands.values())))

    def matvec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros(self.n)
        for o, v in self.bands.items():
            out += v * np.roll(z, -o)
        return out

    def todense(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        t = np.arange(self.n)
        for o, v in self.bands.items():
            np.add.at(M, (t, (t + o) % self.n), v)
        return M

    def tosparse(self):
        t = np.arange(self.n)
        rows = np.concatenate([t for _ in self.bands])
        cols = np.concatenate([(t + o) % self.n for o in self.bands])
        vals = np.concatenate(list(self.bands.values()))
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def factor(self):
        return _Factor(self)

    def solve(self, rhs) -> np.ndarray:
        return self.factor().solve(rhs)


class _Factor:
    def __init__(self, M: CyclicBanded):
        self.M = M
        # singularity is reported through the pivot test below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            if M.n <= DENSE_LIMIT:
                self.lu = lu_factor(M.todense(), check_finite=True)
                piv = np.abs(np.diag(self.lu[0]))
            else:
                try:
                    self.lu = splu(M.tosparse())
                except RuntimeError as exc:
                    raise SingularJacobian(str(exc)) from None
                piv = np.abs(self.lu.U.diagonal())
        top = float(piv.max()) if piv.size else 0.0
        if top == 0.0 or float(piv.min()) < PIVOT_RATIO * top:
            raise SingularJacobian(f"pivot ratio {float(piv.min()) / max(top, 1e-300):.3g}")

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.M.n <= DENSE_LIMIT:
            return lu_solve(self.lu, rhs)
        x = self.lu.solve(rhs)
        # one step of iterative refinement
        return x + self.lu.solve(rhs - self.M.matvec(x))


def jacobian(xi, e: FullParams) -> CyclicBanded:
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    A, S, D = e.products()
    prev = np.roll(xi, 1)
    return CyclicBanded({
        1: np.full(n, -e.epsilon),
        0: 2.0 * e.a * xi + e.b * prev,
        -1: -S + e.b * xi + 2.0 * e.c * prev,
        -2: np.full(n, D),
    })


@dataclass
class OrbitSolution:
    params: FullParams
    xi: np.ndarray
    residual: float
    newton_iters: int
    projected: np.ndarray | None = None
    spectrum: MonodromySpectrum | None = None
    certificate: dict | None = None
    eps_steps: int = 0

    @property
    def period(self) -> int:
        return int(self.xi.size)

    @property
    def orbit_residual(self) -> float:
        if self.projected is None:
            raise ZeroEpsilon("no projected orbit at eps = 0")
        return orbit_residual(self.params.map_params(), self.projected, cyclic=True)

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "period": self.period,
            "xi": [float(v) for v in self.xi],
            "residual": self.residual,
            "newton_iters": self.newton_iters,
            "orbit": None if self.projected is None else [[float(v) for v in row] for row in self.projected],
            "monodromy": None if self.spectrum is None else self.spectrum.to_json(),
            "monodromy_log_abs": None if self.spectrum is None else [float(v) for v in self.spectrum.log_abs],
            "certificate": self.certificate,
        }


def newton_correct(xi0, e: FullParams, tol: float = 1e-12, max_iter: int = 50,
                   max_step: float = 1.0, finalize: bool = True) -> OrbitSolution:
    """Damped Newton on the cyclic system L(xi; e) = 0.

    Each update is halved until the residual norm decreases; an undamped
    update larger than ``max_step`` in sup-norm aborts with StepTooLarge, which
    keeps the iteration on the solution sheet it started from.  After
    reaching ``tol`` one extra step polishes the root to round-off.
    """
    xi = np.array(xi0, dtype=float)
    r = residual(xi, e)
    rn = float(np.max(np.abs(r)))
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise NoConvergence(f"residual {rn:.3g} after {max_iter} Newton steps")
        dx = jacobian(xi, e).solve(-r)
        size = float(np.max(np.abs(dx)))
        if size > max_step:
            raise StepTooLarge(f"Newton update {size:.3g} exceeds cap {max_step:g}")
        lam = 1.0
        while True:
            trial = xi + lam * dx
            rt = residual(trial, e)
            rtn = float(np.max(np.abs(rt)))
            if rtn < rn or lam < 1.0 / 1024:
                break
            lam *= 0.5
        if not rtn < rn:
            raise NoConvergence(f"damping failed to reduce residual {rn:.3g}")
        xi, r, rn = trial, rt, rtn
        it += 1
    if it > 0:
        try:
            polished = xi + jacobian(xi, e).solve(-r)
            pr = residual(polished, e)
            if float(np.max(np.abs(pr))) <= rn:
                xi, r, rn = polished, pr, float(np.max(np.abs(pr)))
        except SingularJacobian:
            pass
    sol = OrbitSolution(e, xi, rn, it)
    if finalize and e.epsilon > 0.0:
        finalize_solution(sol)
    return sol


def finalize_solution(sol: OrbitSolution, spectrum: bool = True) -> OrbitSolution:
    sol.projected = project_to_orbit(sol)
    if spectrum:
        mp = sol.params.map_params()
        sol.spectrum = monodromy_spectrum(mp, sol.projected, tol=1e-6)
    return sol


def project_to_orbit(sol: OrbitSolution) -> np.ndarray:
    """Rows (xi_t, xi_{t-1}, xi_{t-2}) / eps."""
    eps = sol.params.epsilon
    if eps == 0.0:
        raise ZeroEpsilon("projection needs eps > 0")
    xi = np.asarray(sol.xi, dtype=float)
    return np.column_stack([xi, np.roll(xi, 1), np.roll(xi, 2)]) / eps


def _tangent(xi, e: FullParams) -> np.ndarray:
    return jacobian(xi, e).solve(-residual_eps_derivative(xi, e))


def continue_in_epsilon(state: AIState, target: FullParams, steps: int = 8,
                        tol: float = 1e-12, max_iter: int = 30, max_step: float = 1.0,
                        min_step_ratio: float = 1e-12) -> OrbitSolution:
    """Follow ``state`` from eps = 0 to ``target.epsilon`` along the scheme.

    Tangent predictor plus Newton corrector.  A failed correction halves the
    eps step, two successes in a row double it again (never beyond the
    initial ``target.epsilon / steps``).  The tangent at eps = 0 needs the
    limit Jacobian to be invertible, so degenerate AI states stop there with
    SingularJacobian.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    e0 = target.with_epsilon(0.0)
    lim = np.max(np.abs(residual(state.values, e0)))
    if lim > 1e-8 * (1.0 + float(np.max(np.abs(state.values))) ** 2):
        raise NoConvergence(f"state is not a root of the limit system (residual {lim:.3g})")
    xi = np.array(state.values, dtype=float)
    if target.epsilon == 0.0:
        return OrbitSolution(e0, xi, float(lim), 0)

    h_max = target.epsilon / steps
    h = h_max
    eps = 0.0
    total_iters = 0
    accepted = 0
    streak = 0
    floor = min_step_ratio * target.epsilon
    tangent = _tangent(xi, e0)
    while eps < target.epsilon:
        new_eps = min(eps + h, target.epsilon)
        e = target.with_epsilon(new_eps)
        guess = xi + (new_eps - eps) * tangent
        try:
            sol = newton_correct(guess, e, tol=tol, max_iter=max_iter, max_step=max_step,
                                 finalize=False)
            tangent_new = _tangent(sol.xi, e)
        except (NoConvergence, SingularJacobian) as exc:
            h *= 0.5
            streak = 0
            if h < floor:
                raise StepUnderflow(f"eps step fell below {floor:.3g} at eps = {eps:.6g} ({exc.name})") from exc
            continue
        xi, eps, tangent = sol.xi, new_eps, tangent_new
        total_iters += sol.newton_iters
        accepted += 1
        streak += 1
        if streak >= 2 and h < h_max:
            h = min(2.0 * h, h_max)
            streak = 0
    sol.newton_iters = total_iters
    sol.eps_steps = accepted
    sol.params = target
    return finalize_solution(sol)


def verify_conjugacy(state: AIState, target: FullParams, **kw) -> float:
    """max_t |L(Psi(xi))_t - Psi(S xi)_t| for the continued state and its shift."""
    sol = continue_in_epsilon(state, target, **kw)
    sol_s = continue_in_epsilon(state.shift(1), target, **kw)
    mp = target.map_params()
    img = np.array([step(mp, q) for q in sol.projected])
    return float(np.max(np.abs(img - sol_s.projected)))


def map_defect(sol: OrbitSolution) -> float:
    """Sup-norm defect of the projected orbit under the 3D map (equals residual / eps^2)."""
    return sol.orbit_residual


def scalar_reduction_solve(sol: OrbitSolution, eta3) -> tuple[np.ndarray, np.ndarray]:
    """Solve the 3N linearised orbit equation two ways.

    Returns (zeta1 from the 3N solve, -eps * zeta from the scalar solve of
    D L(xi; e) zeta = eta_hat with the aggregated right-hand side).
    """
    e = sol.params
    eps = e.epsilon
    if eps == 0.0:
        raise ZeroEpsilon("reduction needs eps > 0")
    eta3 = np.asarray(eta3, dtype=float)
    mp = e.map_params()
    full = linearised_orbit_solve(mp, sol.projected, eta3)
    xi = sol.xi
    e1, e2, e3 = eta3[:, 0], eta3[:, 1], eta3[:, 2]
    _, S, D = e.products()
    coef = -S + e.b * xi + 2.0 * e.c * np.roll(xi, 1)
    eta_hat = (eps * e1 + coef * np.roll(e2, 1) + D * (np.roll(e2, 2) + np.roll(e3, 1))) / eps
    zeta = jacobian(xi, e).solve(eta_hat)
    return full[:, 0], -eps * zeta


def small_period_solutions(e: FullParams, period: int, tol: float = 1e-12) -> list[np.ndarray]:
    """All real period-1 (and, for period 2, genuine period-2) solutions.

    Period 1 is the quadratic xi^2 + (D - S - eps) xi + A = 0 (a+b+c = 1).
    For period 2 with values (x, y), subtracting the two equations gives
    (x - y)(eps + S + D + (a - c)(x + y)) = 0, so a genuine orbit needs
    x + y = -(eps + S + D)/(a - c) and then solves one quadratic.  Each
    genuine orbit is returned once, as (x, y) with x > y, after the
    constant solutions.
    """
    if period not in (1, 2):
        raise ValueError("period must be 1 or 2")
    A, S, D = e.products()
    eps = e.epsilon
    consts = _real_quadratic_roots(1.0, D - S - eps, A, tol)
    if period == 1:
        return [np.array([r]) for r in consts]
    out = [np.array([r, r]) for r in consts]
    a, b, c = e.a, e.b, e.c
    k = eps + S + D
    if abs(a - c) <= tol:
        if abs(k) <= tol:
            raise DegenerateElimination(
                "a = c and eps + eps*sigma + eps*delta = 0: period-2 pairs form a continuum")
        return out
    s = -k / (a - c)
    # A - (eps+S) y + D x + a x^2 + b x y + c y^2 with y = s - x
    q2 = a - b + c
    q1 = eps + S + D + b * s - 2.0 * c * s
    q0 = A - (eps + S) * s + c * s * s
    if abs(q2) <= tol and abs(q1) <= tol:
        if abs(q0) <= tol:
            raise DegenerateElimination("eliminated period-2 equation vanishes identically")
        return out
    xs = _real_quadratic_roots(q2, q1, q0, tol) if abs(q2) > tol else [-q0 / q1]
    for x in sorted(xs, reverse=True):
        y = s - x
        if x - y > tol * (1.0 + abs(x) + abs(y)):
            out.append(np.array([x, y]))
    return out


def _real_quadratic_roots(q2, q1, q0, tol=1e-12) -> list[float]:
    disc = q1 * q1 - 4.0 * q2 * q0
    if disc < -tol * (q1 * q1 + abs(4.0 * q2 * q0)):
        return []
    disc = max(disc, 0.0)
    sq = math.sqrt(disc)
    # stable form avoids cancellation
    qq = -0.5 * (q1 + math.copysign(sq, q1))
    roots = {qq / q2, q0 / qq} if qq != 0.0 else {0.0}
    if disc == 0.0:
        roots = {-q1 / (2.0 * q2)}
    return sorted(roots)


def count_small_period(e: FullParams, tol: float = 1e-12) -> tuple[int, int]:
    """(number of period-1 solutions, number of genuine period-2 orbits)."""
    sols = small_period_solutions(e, 2, tol)
    n1 = sum(1 for s in sols if s[0] == s[1])
    return n1, len(sols) - n1


def continue_many(states, target: FullParams, workers: int | None = None, **kw) -> list[OrbitSolution]:
    """Continue several states; results keep the input order."""
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda s: continue_in_epsilon(s, target, **kw), states))
    return [continue_in_epsilon(s, target, **kw) for s in states]


def min_pairwise_sup(arrays) -> float:
    arrs = [np.asarray(a, dtype=float) for a in arrays]
    best = math.inf
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            best = min(best, float(np.max(np.abs(arrs[i] - arrs[j]))))
    return best
