"""Construction of anti-integrable (AI) states.

An AI state is a bi-infinite orbit of the limit relation; here it is always
periodic and one period is stored.  States come from three sources:

* closed forms for the two degenerate-conic full shifts,
* the unique fixed point of the branch-selection operator
  ``F_t(xi; s) = f_{s_t}(xi_{t-1})`` on a trapping set,
* periodic orbits of the unimodal branch ``f+`` of ``E(0, 1, 1-c, c)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AILimitError,
    CriticalPointProximity,
    EscapedDomain,
    EscapedTrappingSet,
    NoConvergence,
)
from .relation import (
    BACKWARD,
    FORWARD,
    Branch,
    RelationCoeffs,
    backward_branch,
    branch_critical_points,
    branch_derivative,
    branches,
    forward_branch,
    radicand_min,
)
from .errors import NegativeRadicand

# positive-entropy threshold of the unimodal branch; documented constant only
UNIMODAL_ENTROPY_THRESHOLD = 0.791
# escaping interval exists for cbar in (4/5, 1)
UNIMODAL_ESCAPE_THRESHOLD = 0.8

MAX_ENUMERATION_PERIOD = 16
DEFAULT_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SymbolWord:
    """A finite word over {+, -}; the symbol sequence is its periodic extension."""

    letters: tuple[Branch, ...]

    def __post_init__(self):
        if not self.letters:
            raise ValueError("symbol word must be non-empty")
        if any(s not in (Branch.PLUS, Branch.MINUS) for s in self.letters):
            raise ValueError("symbol word letters must be + or -")

    @classmethod
    def parse(cls, text: str) -> "SymbolWord":
        return cls(tuple(Branch.parse(ch) for ch in text))

    @property
    def period(self) -> int:
        return len(self.letters)

    @property
    def signs(self) -> np.ndarray:
        return np.array([s.sign for s in self.letters], dtype=float)

    def rotate(self, k: int = 1) -> "SymbolWord":
        """Shift: the rotated word reads s'_t = s_{t+k}."""
        k %= self.period
        return SymbolWord(self.letters[k:] + self.letters[:k])

    def flipped(self) -> "SymbolWord":
        return SymbolWord(tuple(s.flipped() for s in self.letters))

    def __str__(self) -> str:
        return "".join(s.value for s in self.letters)


def all_words(period: int) -> list[SymbolWord]:
    return [SymbolWord(w) for w in itertools.product((Branch.PLUS, Branch.MINUS), repeat=period)]


@dataclass(frozen=True)
class TrappingSet:
    """A finite union of disjoint closed intervals."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple(sorted((float(lo), float(hi)) for lo, hi in self.intervals))
        if not ivs:
            raise ValueError("trapping set needs at least one interval")
        for lo, hi in ivs:
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ValueError(f"bad interval [{lo}, {hi}]")
        for (_, h0), (l1, _) in zip(ivs, ivs[1:]):
            if l1 <= h0:
                raise ValueError("trapping-set intervals must be disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "TrappingSet":
        return cls(((lo, hi),))

    @classmethod
    def parse(cls, text: str) -> "TrappingSet":
        """Parse ``lo:hi[,lo:hi...]``."""
        out = []
        for part in text.split(","):
            lo, hi = part.split(":")
            out.append((float(lo), float(hi)))
        return cls(tuple(out))

    @property
    def hull(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]

    @property
    def midpoint(self) -> float:
        lo, hi = self.hull
        return 0.5 * (lo + hi)

    @property
    def diameter(self) -> float:
        lo, hi = self.hull
        return hi - lo

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            inside |= (x >= lo - tol) & (x <= hi + tol)
        return bool(inside.all())

    def grid(self, points: int) -> np.ndarray:
        return np.concatenate([np.linspace(lo, hi, points) for lo, hi in self.intervals])

    def __str__(self) -> str:
        return ",".join(f"{lo:g}:{hi:g}" for lo, hi in self.intervals)


class Construction(enum.Enum):
    CLOSED_FORM = "closed_form"
    CONTRACTION_FIXED_POINT = "contraction_fixed_point"
    UNIMODAL_NEWTON = "unimodal_newton"
    GIVEN = "given"


def limit_residual(coeffs: RelationCoeffs, values) -> np.ndarray:
    """Limit operator on a periodic sequence:
    ``alpha1 - sigma1 xi_{t-1} + a xi_t^2 + b xi_t xi_{t-1} + c xi_{t-1}^2``."""
    xi = np.asarray(values, dtype=float)
    prev = np.roll(xi, 1)
    return (coeffs.alpha1 - coeffs.sigma1 * prev + coeffs.a * xi * xi
            + coeffs.b * xi * prev + coeffs.c * prev * prev)


@dataclass(frozen=True)
class AIState:
    coeffs: RelationCoeffs
    values: np.ndarray
    word: SymbolWord | None = None
    residual: float = 0.0
    construction: Construction = Construction.GIVEN
    contraction_factor: float | None = None
    iterations: int = 0

    @classmethod
    def from_values(cls, coeffs: RelationCoeffs, values, word: SymbolWord | None = None,
                    construction: Construction = Construction.GIVEN,
                    tol: float = DEFAULT_RESIDUAL_TOL, **meta) -> "AIState":
        """Wrap a candidate orbit, checking the limit equation to ``tol``."""
        xi = np.array(values, dtype=float).ravel()
        if xi.size == 0:
            raise ValueError("AI state needs at least one value")
        res = float(np.max(np.abs(limit_residual(coeffs, xi))))
        if res > tol:
            raise NoConvergence(f"limit residual {res:.3g} exceeds {tol:.3g}")
        xi.setflags(write=False)
        return cls(coeffs, xi, word, res, construction, **meta)

    @property
    def period(self) -> int:
        return int(self.values.size)

    def shift(self, k: int = 1) -> "AIState":
        """S^k: the state read from index k on."""
        word = self.word.rotate(k) if self.word is not None else None
        vals = np.roll(self.values, -k)
        vals.setflags(write=False)
        return AIState(self.coeffs, vals, word, self.residual, self.construction,
                       self.contraction_factor, self.iterations)

    def to_dict(self) -> dict:
        return {
            "coeffs": self.coeffs.to_dict(),
            "period": self.period,
            "values": [float(x) for x in self.values],
            "word": str(self.word) if self.word is not None else None,
            "residual": self.residual,
            "construction": self.construction.value,
            "contraction_factor": self.contraction_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AIState":
        c = d["coeffs"]
        coeffs = RelationCoeffs(c["alpha1"], c["sigma1"], c["a"], c["c"])
        word = SymbolWord.parse(d["word"]) if d.get("word") else None
        return cls.from_values(coeffs, d["values"], word,
                               Construction(d.get("construction", "given")))


class ClosedFormCase(enum.Enum):
    SQUARE_ONE = "square-one"
    ZERO_MINUS_ONE = "zero-minus-one"


def closed_form_states(case: ClosedFormCase, period: int) -> list[AIState]:
    """All 2**period states of the two full-shift relations.

    ``SQUARE_ONE`` is E(-1, 0, 1, 0) with xi_t = +/-1 (word attached, '+' is
    +1); ``ZERO_MINUS_ONE`` is E(0, -1, 0, 1) with xi_t in {0, -1}, which has
    no forward branches, so no word is attached.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    case = ClosedFormCase(case)
    if case is ClosedFormCase.SQUARE_ONE:
        coeffs = RelationCoeffs(-1.0, 0.0, 1.0, 0.0)
        return [AIState.from_values(coeffs, w.signs, w, Construction.CLOSED_FORM, tol=0.0)
                for w in all_words(period)]
    coeffs = RelationCoeffs(0.0, -1.0, 0.0, 1.0)
    return [AIState.from_values(coeffs, [0.0 if s is Branch.PLUS else -1.0 for s in w.letters],
                                None, Construction.CLOSED_FORM, tol=0.0)
            for w in all_words(period)]


def ai_fixed_point(coeffs: RelationCoeffs, word: SymbolWord, B: TrappingSet,
                   max_iter: int = 10_000, tol: float = 1e-14,
                   residual_tol: float = DEFAULT_RESIDUAL_TOL) -> AIState:
    """Fixed point phi(s) of ``xi -> F(xi; s)`` on the periodic lattice.

    Starts from the constant profile at the midpoint of ``B`` and sweeps until
    the sup-norm change drops below ``tol``.  The recorded
    ``contraction_factor`` is the largest ratio of successive changes over the
    last few sweeps.
    """
    signs = word.signs
    xi = np.full(word.period, B.midpoint)
    box_tol = 1e-12 * (1.0 + B.diameter)
    ratios: list[float] = []
    prev_change = None
    for it in range(1, max_iter + 1):
        new = _apply_branches(coeffs, signs, np.roll(xi, 1))
        if not B.contains(new, box_tol):
            bad = new[~np.array([B.contains(x, box_tol) for x in new])]
            raise EscapedTrappingSet(f"iterate {bad[0]:.6g} left B = {B} (word {word})")
        change = float(np.max(np.abs(new - xi)))
        xi = new
        # ratios near round-off are noise, not contraction
        if prev_change is not None and prev_change > 1e-10 * (1.0 + float(np.max(np.abs(xi)))):
            ratios.append(change / prev_change)
        prev_change = change
        if change < tol:
            break
    else:
        factor = max(ratios[-5:]) if ratios else math.inf
        if factor >= 1.0:
            raise NoConvergence(f"word {word}: contraction factor {factor:.3g} >= 1")
        raise NoConvergence(f"word {word}: change {change:.3g} after {max_iter} sweeps")
    factor = max(ratios[-5:]) if ratios else 0.0
    return AIState.from_values(coeffs, xi, word, Construction.CONTRACTION_FIXED_POINT,
                               tol=residual_tol, contraction_factor=factor, iterations=it)


def _apply_branches(coeffs: RelationCoeffs, signs: np.ndarray, prev: np.ndarray) -> np.ndarray:
    plus = forward_branch(coeffs, Branch.PLUS, prev)
    minus = forward_branch(coeffs, Branch.MINUS, prev)
    return np.where(signs > 0, plus, minus)


@dataclass(frozen=True)
class RegionQuery:
    n: int
    lam: float
    direction: str = FORWARD
    grid_points: int = 201

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.lam > 1.0:
            raise ValueError("lambda must be > 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class RegionResult:
    """Outcome of a grid-based (non-rigorous) region membership test."""

    member: bool
    margin: float
    invariant: bool
    max_derivative: float
    images: dict = field(default_factory=dict)
    rigorous: bool = False


def _branch_eval(coeffs, s, w, direction):
    if direction == FORWARD:
        return forward_branch(coeffs, s, w)
    return backward_branch(coeffs, s, w)


def branch_image(coeffs: RelationCoeffs, s: Branch, lo: float, hi: float,
                 direction: str = FORWARD) -> tuple[float, float]:
    """Exact image interval of ``[lo, hi]`` under one branch.

    The branch is continuous wherever its radicand is nonnegative, so the
    extremes sit at the endpoints or at interior critical points.
    """
    if s is not Branch.PRINCIPAL and radicand_min(coeffs, lo, hi, direction) < -1e-12 * (1 + max(lo * lo, hi * hi)):
        raise NegativeRadicand(f"radicand negative on [{lo:g}, {hi:g}]")
    pts = [lo, hi] + branch_critical_points(coeffs, lo, hi, direction)
    vals = np.asarray(_branch_eval(coeffs, s, np.array(pts), direction))
    return float(vals.min()), float(vals.max())


def region_membership(coeffs: RelationCoeffs, B: TrappingSet, q: RegionQuery) -> RegionResult:
    """Check invariance of ``B`` under both branches and the n-fold derivative bound.

    Membership means f+/-(B) is inside B and every n-fold composition has
    ``|D f_s^n| <= 1/lambda`` at the grid points of ``B``.  The derivative bound
    is a grid check, not a proof.
    """
    labels = branches(coeffs, q.direction)
    invariant = True
    images = {}
    for s in labels:
        for lo, hi in B.intervals:
            img = branch_image(coeffs, s, lo, hi, q.direction)
            images.setdefault(s.value, []).append(img)
            if not any(l0 - 1e-12 <= img[0] and img[1] <= h0 + 1e-12 for l0, h0 in B.intervals):
                invariant = False

    x = B.grid(q.grid_points)
    # track every composition path: points and accumulated |derivative|
    pts = x[None, :]
    dprod = np.ones_like(pts)
    for _ in range(q.n):
        new_pts, new_d = [], []
        for s in labels:
            d = np.abs(branch_derivative(coeffs, s, pts, q.direction))
            new_pts.append(_branch_eval(coeffs, s, pts, q.direction))
            new_d.append(dprod * d)
        pts = np.concatenate(new_pts, axis=0)
        dprod = np.concatenate(new_d, axis=0)
        if not invariant:
            # images may leave B; keep them but avoid evaluating outside the domain
            pts = np.clip(pts, *B.hull)
    max_d = float(np.max(dprod))
    margin = 1.0 / q.lam - max_d
    return RegionResult(invariant and margin >= 0.0, margin, invariant, max_d, images)


def unimodal_coeffs(cbar: float) -> RelationCoeffs:
    return RelationCoeffs(0.0, 1.0, 1.0 - cbar, cbar)


def unimodal_periodic_orbit(cbar: float, period: int, seed: float,
                            max_iter: int = 200, tol: float = 1e-14,
                            critical_radius: float | None = None) -> AIState:
    """Periodic orbit of the unimodal branch f+(u) = sqrt(u(1 - cbar u)/(1 - cbar)).

    Solves ``f+^period(u) = u`` by damped Newton from ``seed``, clipping to the
    domain [0, 1/cbar].  Orbits passing within ``critical_radius`` (default
    1e-3/cbar) of the critical point 1/(2 cbar) are rejected.
    """
    if not 0.0 < cbar < 1.0:
        raise ValueError("cbar must lie in (0, 1)")
    if period < 1:
        raise ValueError("period must be >= 1")
    hi = 1.0 / cbar
    if not 0.0 <= seed <= hi:
        raise EscapedDomain(f"seed {seed} outside [0, {hi:.6g}]")
    coeffs = unimodal_coeffs(cbar)
    radius = 1e-3 / cbar if critical_radius is None else critical_radius

    def orbit_and_derivative(u):
        pts = [u]
        d = 1.0
        for _ in range(period):
            x = pts[-1]
            if not -1e-12 * hi <= x <= hi * (1.0 + 1e-12):
                raise EscapedDomain(f"iterate {x:.6g} left [0, {hi:.6g}]")
            x = min(max(x, 0.0), hi)
            d *= branch_derivative(coeffs, Branch.PLUS, x) if x > 0.0 else math.inf
            try:
                pts.append(forward_branch(coeffs, Branch.PLUS, x))
            except NegativeRadicand:
                raise EscapedDomain(f"iterate {x:.6g} has no image") from None
        return pts, d

    u = float(seed)
    for _ in range(max_iter):
        pts, d = orbit_and_derivative(u)
        g = pts[-1] - u
        if abs(g) <= tol * (1.0 + abs(u)):
            break
        if not math.isfinite(d) or d == 1.0:
            raise NoConvergence(f"Newton derivative degenerate at u = {u:.6g}")
        step = -g / (d - 1.0)
        if abs(step) <= tol * (1.0 + abs(u)):
            break
        lam = 1.0
        while True:
            trial = min(max(u + lam * step, 0.0), hi)
            try:
                tp, _ = orbit_and_derivative(trial)
                if abs(tp[-1] - trial) < abs(g) or lam < 1e-6:
                    break
            except EscapedDomain:
                if lam < 1e-6:
                    raise
            lam *= 0.5
        u = trial
    else:
        raise NoConvergence(f"unimodal Newton did not converge from seed {seed}")
    # stored so that xi_t = f+(xi_{t-1}) with cyclic indexing
    return _unimodal_state(cbar, np.array(pts[:-1]), radius)


def _unimodal_state(cbar, orbit, radius):
    crit = 0.5 / cbar
    near = np.abs(orbit - crit)
    if np.any(near < radius):
        raise CriticalPointProximity(
            f"orbit point {orbit[np.argmin(near)]:.6g} within {radius:.3g} of critical point {crit:.6g}")
    word = SymbolWord((Branch.PLUS,) * orbit.size)
    return AIState.from_values(unimodal_coeffs(cbar), orbit, word, Construction.UNIMODAL_NEWTON)


def unimodal_itinerary_orbit(cbar: float, itinerary: str, max_iter: int = 10_000,
                             tol: float = 1e-15) -> AIState:
    """Periodic orbit of f+ with a prescribed left/right itinerary.

    ``itinerary[t]`` is 'L' or 'R' according to the side of the critical point
    1/(2 cbar) on which xi_t lies.  The two inverse branches of f+ are the
    backward branches of the relation and contract on the invariant Cantor
    set, so iterating them converges from any starting profile; the result
    is checked against the critical-point exclusion radius 1e-3/cbar.
    """
    if not itinerary or set(itinerary) - {"L", "R"}:
        raise ValueError("itinerary must be a non-empty string over 'L', 'R'")
    coeffs = unimodal_coeffs(cbar)
    signs = [Branch.PLUS if ch == "R" else Branch.MINUS for ch in itinerary]
    xi = np.full(len(itinerary), 0.5 / cbar)
    for _ in range(max_iter):
        nxt = np.roll(xi, -1)
        try:
            new = np.array([backward_branch(coeffs, sg, v) for sg, v in zip(signs, nxt)])
        except NegativeRadicand:
            raise EscapedDomain(f"itinerary {itinerary}: iterate above the critical value") from None
        change = float(np.max(np.abs(new - xi)))
        xi = new
        if change < tol:
            break
    else:
        raise NoConvergence(f"inverse-branch iteration for {itinerary} did not settle")
    return _unimodal_state(cbar, xi, 1e-3 / cbar)


def minimal_period(values: Sequence[float], tol: float = 1e-9) -> int:
    xi = np.asarray(values)
    for p in range(1, xi.size + 1):
        if xi.size % p == 0 and np.all(np.abs(xi - np.roll(xi, -p)) <= tol):
            return p
    return xi.size


def enumerate_periodic_states(coeffs: RelationCoeffs, period: int, B: TrappingSet,
                              tol: float = 1e-14, max_period: int = MAX_ENUMERATION_PERIOD,
                              workers: int | None = None) -> list[AIState]:
    """phi(s) for every word of the given period, in lexicographic word order."""
    if not 1 <= period <= max_period:
        raise ValueError(f"period must be in [1, {max_period}]")

    def solve(word):
        try:
            return ai_fixed_point(coeffs, word, B, tol=tol)
        except AILimitError as exc:
            raise type(exc)(f"word {word}: {exc}") from exc

    words = all_words(period)
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(solve, words))
    return [solve(w) for w in words]


def min_pairwise_distance(states: Iterable[AIState]) -> float:
    """Smallest sup-norm distance between distinct states (inf for < 2 states)."""
    vals = [s.values for s in states]
    best = math.inf
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            best = min(best, float(np.max(np.abs(vals[i] - vals[j]))))
    return best


def branch_separation(coeffs: RelationCoeffs, B: TrappingSet, points: int = 401) -> float:
    """min over the grid of B of |f+(u) - f-(u)|, the expansivity witness scale."""
    x = B.grid(points)
    return float(np.min(np.abs(forward_branch(coeffs, Branch.PLUS, x)
                               - forward_branch(coeffs, Branch.MINUS, x))))
