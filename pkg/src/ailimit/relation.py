"""The limit quadratic relation and its single-valued branches.

At the anti-integrable limit the third-order recurrence collapses to the conic

    alpha1 - sigma1*u + a*v**2 + b*v*u + c*u**2 = 0,      b = 1 - a - c,

read as a multivalued map u -> v.  Solving the quadratic in ``v`` gives the
forward branches f+, f- (or f0 when a = 0); solving it in ``u`` gives the
backward branches g+, g- (or g0 when c = 0).

Both directions share one parameterisation: the unknown ``x`` solves

    p*x**2 + (q1*w + q0)*x + (r2*w**2 + r1*w + r0) = 0

in terms of the known coordinate ``w``.  Everything below (roots, radicands,
critical points of the branches) is written once against that form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateBranch,
    DivisionByZero,
    InvalidBranch,
    NegativeRadicand,
    NoPreimage,
    NotOnRelation,
)

FORWARD = "forward"
BACKWARD = "backward"


class Branch(enum.Enum):
    PLUS = "+"
    MINUS = "-"
    PRINCIPAL = "0"

    @property
    def sign(self) -> int:
        return {Branch.PLUS: 1, Branch.MINUS: -1, Branch.PRINCIPAL: 0}[self]

    def flipped(self) -> "Branch":
        if self is Branch.PRINCIPAL:
            return self
        return Branch.MINUS if self is Branch.PLUS else Branch.PLUS

    @classmethod
    def parse(cls, ch: str) -> "Branch":
        try:
            return cls(ch)
        except ValueError:
            raise InvalidBranch(f"unknown branch symbol {ch!r}") from None


@dataclass(frozen=True)
class RelationCoeffs:
    """Coefficients of the limit relation; ``b`` is always derived."""

    alpha1: float
    sigma1: float
    a: float
    c: float

    @property
    def b(self) -> float:
        return 1.0 - self.a - self.c

    @property
    def discriminant(self) -> float:
        return self.b * self.b - 4.0 * self.a * self.c

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.alpha1), abs(self.sigma1), abs(self.a),
                   abs(self.b), abs(self.c))

    def to_dict(self) -> dict:
        return {"alpha1": self.alpha1, "sigma1": self.sigma1, "a": self.a,
                "b": self.b, "c": self.c, "discriminant": self.discriminant}


@dataclass(frozen=True)
class _Poly:
    p: float
    q1: float
    q0: float
    r2: float
    r1: float
    r0: float

    def radicand(self, w):
        lin = self.q1 * w + self.q0
        return lin * lin - 4.0 * self.p * (self.r2 * w * w + self.r1 * w + self.r0)

    def radicand_coeffs(self) -> tuple[float, float, float]:
        """(A, B, C) with radicand(w) = A w^2 + B w + C."""
        A = self.q1 ** 2 - 4.0 * self.p * self.r2
        B = 2.0 * self.q1 * self.q0 - 4.0 * self.p * self.r1
        C = self.q0 ** 2 - 4.0 * self.p * self.r0
        return A, B, C

    @property
    def degenerate(self) -> bool:
        return self.p == 0.0 and self.q1 == 0.0 and self.q0 == 0.0


def _poly(coeffs: RelationCoeffs, direction: str) -> _Poly:
    if direction == FORWARD:
        return _Poly(coeffs.a, coeffs.b, 0.0, coeffs.c, -coeffs.sigma1, coeffs.alpha1)
    if direction == BACKWARD:
        return _Poly(coeffs.c, coeffs.b, -coeffs.sigma1, coeffs.a, 0.0, coeffs.alpha1)
    raise ValueError(f"unknown direction {direction!r}")


def _grazing_tol(coeffs: RelationCoeffs, w) -> np.ndarray:
    return 1e-12 * (1.0 + np.asarray(w, dtype=float) ** 2) * coeffs.scale ** 2


def branches(coeffs: RelationCoeffs, direction: str = FORWARD) -> tuple[Branch, ...]:
    """The branch labels available in ``direction`` for these coefficients."""
    poly = _poly(coeffs, direction)
    if poly.degenerate:
        raise DegenerateBranch(_degenerate_message(direction))
    if poly.p == 0.0:
        return (Branch.PRINCIPAL,)
    return (Branch.PLUS, Branch.MINUS)


def _degenerate_message(direction: str) -> str:
    if direction == FORWARD:
        return "a = b = 0: the relation is a union of vertical lines"
    return "c = b = sigma1 = 0: the relation is a union of horizontal lines"


def _check_branch(poly: _Poly, s: Branch, direction: str) -> None:
    if poly.degenerate:
        raise DegenerateBranch(_degenerate_message(direction))
    lead = "a" if direction == FORWARD else "c"
    if s is Branch.PRINCIPAL and poly.p != 0.0:
        raise InvalidBranch(f"principal branch requires {lead} = 0")
    if s is not Branch.PRINCIPAL and poly.p == 0.0:
        raise InvalidBranch(f"{lead} = 0: only the principal branch exists")


def _branch_value(coeffs: RelationCoeffs, s: Branch, w, direction: str):
    poly = _poly(coeffs, direction)
    _check_branch(poly, s, direction)
    w_arr = np.asarray(w, dtype=float)
    lin = poly.q1 * w_arr + poly.q0
    if s is Branch.PRINCIPAL:
        num = poly.r2 * w_arr * w_arr + poly.r1 * w_arr + poly.r0
        bad = lin == 0.0
        if np.any(bad):
            if direction == FORWARD:
                raise DivisionByZero("principal forward branch undefined at u = 0")
            # exceptional case: the numerator vanishes at the same v
            if np.any(np.abs(num[bad]) > 1e-14 * coeffs.scale):
                raise NoPreimage("c = 0 and v = sigma1/b: no u on the relation")
            w_star = -poly.q0 / poly.q1
            limit = -(2.0 * poly.r2 * w_star + poly.r1) / poly.q1
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(bad, limit, -num / np.where(bad, 1.0, lin))
        else:
            out = -num / lin
    else:
        rad = poly.radicand(w_arr)
        tol = _grazing_tol(coeffs, w_arr)
        if np.any(rad < -tol):
            worst = float(np.min(rad))
            raise NegativeRadicand(f"{direction} radicand {worst:.6g} < 0")
        root = np.sqrt(np.maximum(rad, 0.0))
        out = (-lin + s.sign * root) / (2.0 * poly.p)
    return float(out) if out.ndim == 0 else out


def forward_branch(coeffs: RelationCoeffs, s: Branch, u):
    """Image ``v`` of ``u`` on branch ``s``; accepts scalars or arrays.

    ``Branch.PLUS`` is the root carrying the ``+`` sign of the quadratic
    formula; it is the larger root only when ``a > 0``.  Radicands in
    ``[-tol, 0)`` are clamped to zero (double root); see ``is_marginal``.
    """
    return _branch_value(coeffs, s, u, FORWARD)


def backward_branch(coeffs: RelationCoeffs, s: Branch, v):
    """Preimage ``u`` of ``v`` on branch ``s``; accepts scalars or arrays."""
    return _branch_value(coeffs, s, v, BACKWARD)


def branch_radicand(coeffs: RelationCoeffs, w, direction: str = FORWARD):
    return _poly(coeffs, direction).radicand(np.asarray(w, dtype=float))


def is_marginal(coeffs: RelationCoeffs, w, direction: str = FORWARD) -> bool:
    """True when the radicand at ``w`` was clamped from a tiny negative value."""
    rad = branch_radicand(coeffs, w, direction)
    return bool(np.any((rad < 0.0) & (rad >= -_grazing_tol(coeffs, w))))


def eval_relation(coeffs: RelationCoeffs, u, v):
    """Left-hand side of the relation at ``(u, v)``."""
    return (coeffs.alpha1 - coeffs.sigma1 * u + coeffs.a * v * v
            + coeffs.b * v * u + coeffs.c * u * u)


def slope_parts(coeffs: RelationCoeffs, u, v):
    """Numerator and denominator of the tangent slope m(u, v)."""
    num = coeffs.sigma1 - coeffs.b * v - 2.0 * coeffs.c * u
    den = 2.0 * coeffs.a * v + coeffs.b * u
    return num, den


class SlopeKind(enum.Enum):
    FINITE = "finite"
    PLUS_INFINITY = "+inf"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class SlopeValue:
    kind: SlopeKind
    value: float = math.nan

    @property
    def is_finite(self) -> bool:
        return self.kind is SlopeKind.FINITE

    @property
    def magnitude(self) -> float:
        if self.kind is SlopeKind.FINITE:
            return abs(self.value)
        return math.inf if self.kind is SlopeKind.PLUS_INFINITY else math.nan

    def to_json(self):
        return self.value if self.is_finite else self.kind.value


def on_relation_tol(u, v) -> float:
    return 1e-9 * (1.0 + u * u + v * v)


def slope(coeffs: RelationCoeffs, u: float, v: float, tol: float | None = None) -> SlopeValue:
    """Slope of the tangent line to the relation at an on-relation point."""
    res = eval_relation(coeffs, u, v)
    tol = on_relation_tol(u, v) if tol is None else tol
    if abs(res) > tol:
        raise NotOnRelation(f"|Q({u:.6g}, {v:.6g})| = {abs(res):.3g} > {tol:.3g}")
    num, den = slope_parts(coeffs, u, v)
    zero = 1e-12 * coeffs.scale * (1.0 + abs(u) + abs(v))
    if abs(den) < zero:
        if abs(num) < zero:
            return SlopeValue(SlopeKind.UNDEFINED)
        return SlopeValue(SlopeKind.PLUS_INFINITY, math.inf)
    return SlopeValue(SlopeKind.FINITE, num / den)


def branch_derivative(coeffs: RelationCoeffs, s: Branch, w, direction: str = FORWARD):
    """Derivative of branch ``s`` at ``w`` by implicit differentiation.

    Forward: dv/du = m(u, v).  Backward: du/dv = 1/m(u, v).  Returns ``inf``
    where the branch has a vertical tangent.
    """
    x = _branch_value(coeffs, s, w, direction)
    if direction == FORWARD:
        num, den = slope_parts(coeffs, np.asarray(w, dtype=float), x)
    else:
        den, num = slope_parts(coeffs, x, np.asarray(w, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(den == 0.0, np.inf, num / np.where(den == 0.0, 1.0, den))
    return float(d) if np.ndim(d) == 0 else d


def branch_critical_points(coeffs: RelationCoeffs, lo: float, hi: float,
                           direction: str = FORWARD) -> list[float]:
    """Candidate interior extrema of the branches on ``[lo, hi]``.

    For the +/- branches x' = 0 forces R'(w)^2 = 4 q1^2 R(w), a quadratic in
    ``w``; roots of either sign choice are returned (a superset is harmless
    since every candidate lies in the interval).  The principal branch is a
    rational function with numerator derivative handled the same way.
    """
    poly = _poly(coeffs, direction)
    if poly.degenerate:
        raise DegenerateBranch(_degenerate_message(direction))
    if poly.p != 0.0:
        A, B, C = poly.radicand_coeffs()
        q2 = 4.0 * A * A - 4.0 * poly.q1 ** 2 * A
        q1_ = 4.0 * A * B - 4.0 * poly.q1 ** 2 * B
        q0_ = B * B - 4.0 * poly.q1 ** 2 * C
        cands = _real_roots(q2, q1_, q0_)
    else:
        # x = -(r2 w^2 + r1 w + r0)/(q1 w + q0); x' = 0 is a quadratic in w
        r2, r1, r0, q1, q0 = poly.r2, poly.r1, poly.r0, poly.q1, poly.q0
        cands = _real_roots(r2 * q1, 2.0 * r2 * q0, r1 * q0 - r0 * q1)
    return sorted(w for w in cands if lo < w < hi)


def _real_roots(c2: float, c1: float, c0: float) -> list[float]:
    scale = max(abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return []
    c2, c1, c0 = c2 / scale, c1 / scale, c0 / scale
    if abs(c2) < 1e-14:
        return [] if abs(c1) < 1e-14 else [-c0 / c1]
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    return [(-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)]


def radicand_min(coeffs: RelationCoeffs, lo: float, hi: float,
                 direction: str = FORWARD) -> float:
    """Minimum of the branch radicand over ``[lo, hi]``."""
    poly = _poly(coeffs, direction)
    A, B, _ = poly.radicand_coeffs()
    pts = [lo, hi]
    if A > 0.0:
        vertex = -B / (2.0 * A)
        if lo < vertex < hi:
            pts.append(vertex)
    return float(min(poly.radicand(w) for w in pts))


def fixed_points(coeffs: RelationCoeffs) -> list[float]:
    """Points with (u, u) on the relation: roots of u^2 - sigma1 u + alpha1."""
    return sorted(_real_roots(1.0, -coeffs.sigma1, coeffs.alpha1))


class CanonicalCase(enum.Enum):
    CASE0 = "0"
    CASE3_PLUS = "3+"
    CASE3_MINUS = "3-"
    CASE2_PLUS = "2+"
    CASE2_MINUS = "2-"


@dataclass(frozen=True)
class CanonicalForm:
    """A relation rescaled to unit |alpha1| (or unit |sigma1|).

    ``(u, v)`` lies on the original relation iff ``(u/scale, v/scale)`` lies
    on ``rescaled``.
    """

    case: CanonicalCase
    r: float
    scale: float
    rescaled: RelationCoeffs

    def to_dict(self) -> dict:
        return {"case": self.case.value, "r": self.r, "scale": self.scale,
                "rescaled": self.rescaled.to_dict()}


def rescale_canonical(coeffs: RelationCoeffs) -> CanonicalForm:
    al, sg = coeffs.alpha1, coeffs.sigma1
    if al != 0.0:
        scale = math.sqrt(abs(al))
        r = sg / scale
        case = CanonicalCase.CASE3_PLUS if al > 0 else CanonicalCase.CASE3_MINUS
        return CanonicalForm(case, r, scale,
                             RelationCoeffs(math.copysign(1.0, al), r, coeffs.a, coeffs.c))
    if sg != 0.0:
        scale = abs(sg)
        r = math.copysign(1.0, sg)
        # "2+" is sigma1 > 0, where the rescaled equation reads -u + ...
        case = CanonicalCase.CASE2_PLUS if sg > 0 else CanonicalCase.CASE2_MINUS
        return CanonicalForm(case, r, scale, RelationCoeffs(0.0, r, coeffs.a, coeffs.c))
    return CanonicalForm(CanonicalCase.CASE0, 0.0, 1.0, coeffs)


def endomorphism_step(coeffs: RelationCoeffs, delta1: float, u, v):
    """One iterate of the planar endomorphism (u, v) -> (-Q(u, v)/delta1, u)."""
    if delta1 == 0.0:
        raise DivisionByZero("delta1 = 0")
    return -eval_relation(coeffs, u, v) / delta1, u
