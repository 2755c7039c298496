"""Hyperbolicity certificates for periodic AI states.

Along an AI orbit the linearised limit equation reads

    diag_t zeta_t - off_t zeta_{t-1} = eta_t,
    diag_t = 2a xi_t + b xi_{t-1},   off_t = sigma1 - b xi_t - 2c xi_{t-1},

and ``m_{t-1} = off_t / diag_t`` is the slope of the relation at
``(xi_{t-1}, xi_t)``.  An orbit is expanding when slope products grow like
``C lam^k`` and contracting when they decay like ``C^-1 lam^-k``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteOrZeroSlope, NotHyperbolic, SingularMatrix
from .relation import SlopeKind, SlopeValue, slope
from .symbolic import AIState

DEGENERACY_BAND = 1e-8
DIRECT_LAMBDA = 2.0
SINGULAR_RCOND = 1e-12


class CertificateKind(enum.Enum):
    EXPANDING = "expanding"
    CONTRACTING = "contracting"
    DIRECT_EXPANDING = "direct_expanding"
    DIRECT_CONTRACTING = "direct_contracting"
    DEGENERATE = "degenerate"
    INCONCLUSIVE = "inconclusive"

    @property
    def expanding(self) -> bool:
        return self in (CertificateKind.EXPANDING, CertificateKind.DIRECT_EXPANDING)

    @property
    def contracting(self) -> bool:
        return self in (CertificateKind.CONTRACTING, CertificateKind.DIRECT_CONTRACTING)

    @property
    def hyperbolic(self) -> bool:
        return self.expanding or self.contracting


EXPANDING = "expanding"
CONTRACTING = "contracting"


@dataclass(frozen=True)
class HyperbolicityCertificate:
    kind: CertificateKind
    C: float | None = None
    lam: float | None = None
    k1: int | None = None
    chi: float | None = None
    m_min: float | None = None
    m_max: float | None = None
    margin: float | None = None
    log_product: float | None = None

    @property
    def hyperbolic(self) -> bool:
        return self.kind.hyperbolic

    @property
    def inverse_bound(self) -> float:
        """1 + C^-1 (lam - 1)^-1."""
        if not self.hyperbolic:
            raise NotHyperbolic(f"certificate is {self.kind.value}")
        return 1.0 + 1.0 / (self.C * (self.lam - 1.0))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "C": self.C, "lambda": self.lam, "k1": self.k1,
                "chi": self.chi, "m_min": self.m_min, "m_max": self.m_max,
                "margin": self.margin}


def linear_coefficients(state: AIState) -> tuple[np.ndarray, np.ndarray]:
    """(diag_t, off_t) of the linearised limit equation, cyclic in t."""
    k = state.coeffs
    xi = state.values
    prev = np.roll(xi, 1)
    diag = 2.0 * k.a * xi + k.b * prev
    off = k.sigma1 - k.b * xi - 2.0 * k.c * prev
    return diag, off


def slope_sequence(state: AIState, tol: float | None = None) -> list[SlopeValue]:
    """m_t = m(xi_t, xi_{t+1}) over one period."""
    xi = state.values
    nxt = np.roll(xi, -1)
    return [slope(state.coeffs, float(u), float(v), tol) for u, v in zip(xi, nxt)]


def _abs_slopes(slopes: list[SlopeValue]) -> np.ndarray:
    if any(not s.is_finite for s in slopes):
        raise InfiniteOrZeroSlope("slope sequence contains an infinite or undefined slope")
    m = np.array([abs(s.value) for s in slopes])
    if np.any(m == 0.0):
        raise InfiniteOrZeroSlope("slope sequence contains a zero slope")
    return m


def window_log_products(log_m: np.ndarray, k: int) -> np.ndarray:
    """sum_{n<k} log|m_{t+n}| for every t (cyclic)."""
    out = np.zeros_like(log_m)
    for n in range(k):
        out += np.roll(log_m, -n)
    return out


def _partial_log_products(log_m: np.ndarray, kmax: int) -> np.ndarray:
    """Rows k = 1..kmax of window log products."""
    N = log_m.size
    rows = np.empty((kmax, N))
    acc = np.zeros(N)
    for k in range(kmax):
        acc = acc + np.roll(log_m, -k)
        rows[k] = acc
    return rows


def k1_chi_certificate(state: AIState, k1: int) -> tuple[float, bool, str | None]:
    """Finite-window form: every k1-window product >= 1+chi (or <= 1-chi).

    Returns ``(chi, ok, direction)``; when neither form holds ``ok`` is False,
    ``direction`` is None and ``chi`` is the (nonpositive) best slack.
    """
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    m = _abs_slopes(slope_sequence(state))
    w = np.exp(window_log_products(np.log(m), k1))
    lo, hi = float(w.min()), float(w.max())
    if lo > 1.0:
        return lo - 1.0, True, EXPANDING
    if hi < 1.0:
        return 1.0 - hi, True, CONTRACTING
    return max(lo - 1.0, 1.0 - hi), False, None


def chi_to_C_lambda(k1: int, chi: float, m_extreme: float, direction: str) -> tuple[float, float]:
    """Convert a k1-chi certificate into the (C, lam) form.

    Writing k = q k1 + r, the window products are bounded by
    ``(1 +/- chi)^q m_extreme^r``; the constant is the worst case over
    r = 0..k1-1, which is r = k1-1 unless m_extreme lies beyond the mean
    rate, in which case it is r = 0 (C = 1).
    """
    if not chi > 0.0 or not m_extreme > 0.0:
        raise ValueError("chi and m_extreme must be positive")
    if direction == EXPANDING:
        lam = (1.0 + chi) ** (1.0 / k1)
        C = min(1.0, m_extreme ** (k1 - 1) / (1.0 + chi) ** ((k1 - 1) / k1))
        return C, lam
    if direction == CONTRACTING:
        if chi >= 1.0:
            raise ValueError("contracting chi must be < 1")
        lam = (1.0 - chi) ** (-1.0 / k1)
        Cinv = max(1.0, m_extreme ** (k1 - 1) / (1.0 - chi) ** ((k1 - 1) / k1))
        return 1.0 / Cinv, lam
    raise ValueError(f"unknown direction {direction!r}")


def _smallest_k1(rows: np.ndarray):
    """First window length whose products all exceed (or all stay below) one."""
    for k in range(rows.shape[0]):
        lo, hi = float(np.exp(rows[k].min())), float(np.exp(rows[k].max()))
        if lo > 1.0:
            return k + 1, lo - 1.0
        if hi < 1.0:
            return k + 1, 1.0 - hi
    return None, None


def certify(state: AIState, band: float = DEGENERACY_BAND) -> HyperbolicityCertificate:
    """Classify a periodic AI state.

    With all slopes finite and nonzero the per-period product P decides:
    expanding (lam = P^(1/N)), contracting (lam = P^(-1/N)) or degenerate
    when |P - 1| <= band.  Zero (infinite) slopes fall back to requiring the
    diagonal (off-diagonal) coefficients to stay away from zero.
    """
    slopes = slope_sequence(state)
    N = state.period
    kinds = {s.kind for s in slopes}
    if SlopeKind.UNDEFINED in kinds:
        return HyperbolicityCertificate(CertificateKind.INCONCLUSIVE)
    has_inf = SlopeKind.PLUS_INFINITY in kinds
    has_zero = any(s.is_finite and s.value == 0.0 for s in slopes)
    if has_inf or has_zero:
        return _direct_certificate(state, slopes, has_zero, has_inf)

    m = np.array([abs(s.value) for s in slopes])
    log_m = np.log(m)
    logP = float(log_m.sum())
    P = math.exp(logP)
    common = dict(m_min=float(m.min()), m_max=float(m.max()), log_product=logP)
    if abs(P - 1.0) <= band:
        return HyperbolicityCertificate(CertificateKind.DEGENERATE, margin=abs(P - 1.0), **common)
    rows = _partial_log_products(log_m, N)
    ks = np.arange(1, N + 1)[:, None]
    k1, chi = _smallest_k1(rows)
    if P > 1.0:
        log_lam = logP / N
        C = math.exp(float(np.min(rows - ks * log_lam)))
        lam = math.exp(log_lam)
        return HyperbolicityCertificate(CertificateKind.EXPANDING, C, lam, k1, chi,
                                        margin=lam - 1.0, **common)
    log_lam = -logP / N
    Cinv = math.exp(float(np.max(rows + ks * log_lam)))
    lam = math.exp(log_lam)
    return HyperbolicityCertificate(CertificateKind.CONTRACTING, 1.0 / Cinv, lam, k1, chi,
                                    margin=lam - 1.0, **common)


def _direct_certificate(state, slopes, has_zero, has_inf) -> HyperbolicityCertificate:
    diag, off = linear_coefficients(state)
    floor = 1e-6 * (1.0 + float(np.max(np.abs(state.values))))
    finite = [abs(s.value) for s in slopes if s.is_finite]
    common = dict(m_min=min(finite) if finite else math.inf,
                  m_max=math.inf if has_inf else max(finite))
    if has_zero and not has_inf:
        margin = float(np.min(np.abs(diag)))
        if margin < floor:
            return HyperbolicityCertificate(CertificateKind.INCONCLUSIVE, margin=margin, **common)
        m = np.array([abs(s.value) for s in slopes])
        # windows containing a zero slope vanish, so k <= N covers every length
        with np.errstate(divide="ignore"):
            rows = _partial_log_products(np.log(m), m.size)
        ks = np.arange(1, m.size + 1)[:, None]
        worst = float(np.max(rows + ks * math.log(DIRECT_LAMBDA)))
        Cinv = max(1.0, math.exp(worst)) if math.isfinite(worst) else 1.0
        return HyperbolicityCertificate(CertificateKind.DIRECT_CONTRACTING, 1.0 / Cinv,
                                        DIRECT_LAMBDA, margin=margin, **common)
    if has_inf and not has_zero:
        margin = float(np.min(np.abs(off)))
        if margin < floor:
            return HyperbolicityCertificate(CertificateKind.INCONCLUSIVE, margin=margin, **common)
        inv = np.array([0.0 if not s.is_finite else 1.0 / abs(s.value) for s in slopes])
        with np.errstate(divide="ignore"):
            rows = _partial_log_products(np.log(inv), inv.size)
        ks = np.arange(1, inv.size + 1)[:, None]
        # expanding: prod |m| >= C lam^k  <=>  prod |1/m| <= C^-1 lam^-k
        worst = float(np.max(rows + ks * math.log(DIRECT_LAMBDA)))
        Cinv = max(1.0, math.exp(worst)) if math.isfinite(worst) else 1.0
        return HyperbolicityCertificate(CertificateKind.DIRECT_EXPANDING, 1.0 / Cinv,
                                        DIRECT_LAMBDA, margin=margin, **common)
    return HyperbolicityCertificate(CertificateKind.INCONCLUSIVE, **common)


def check_window_bounds(state: AIState, cert: HyperbolicityCertificate,
                        max_len: int | None = None, rtol: float = 1e-12) -> bool:
    """Exhaustively test the (C, lam) inequalities for windows of length 1..max_len.

    Default length is twice the period.  ``rtol`` absorbs round-off in the
    product of many factors.
    """
    if not cert.hyperbolic:
        return False
    slopes = slope_sequence(state)
    N = state.period
    kmax = 2 * N if max_len is None else max_len
    ks = np.arange(1, kmax + 1)[:, None]
    log_m = np.array([math.inf if not s.is_finite else (math.log(abs(s.value)) if s.value else -math.inf)
                      for s in slopes])
    rows = _partial_log_products(log_m, kmax)
    slack = rtol * ks
    if cert.kind.expanding:
        return bool(np.all(rows >= math.log(cert.C) + ks * math.log(cert.lam) - slack))
    return bool(np.all(rows <= -math.log(cert.C) - ks * math.log(cert.lam) + slack))


@dataclass(frozen=True)
class LimitLinearSolve:
    zeta: np.ndarray
    eta: np.ndarray
    series_terms: int
    truncation_error_bound: float
    residual: float
    raw: bool = False


def _inverse_slopes(slopes):
    return np.array([0.0 if not s.is_finite else (math.inf if s.value == 0.0 else 1.0 / s.value)
                     for s in slopes])


def _finite_slopes(slopes):
    return np.array([math.inf if not s.is_finite else s.value for s in slopes])


def solve_limit_linear(state: AIState, eta, terms: int = 200, raw: bool = False,
                       cert: HyperbolicityCertificate | None = None) -> LimitLinearSolve:
    """Bounded solution of the linearised limit equation by its geometric series.

    The equation is taken in normalised form: ``m_{t-1}^-1 zeta_t - zeta_{t-1}
    = eta_t`` for expanding states and ``zeta_t - m_{t-1} zeta_{t-1} = eta_t``
    for contracting ones.  With ``raw=True`` ``eta`` is the right-hand side of
    ``diag_t zeta_t - off_t zeta_{t-1} = eta_t`` and is rescaled first.
    The truncated series misses exactly one term of the tail, so its residual
    is below ``|eta| C^-1 lam^-terms / (lam - 1)``.
    """
    cert = certify(state) if cert is None else cert
    if not cert.hyperbolic:
        raise NotHyperbolic(f"state is {cert.kind.value}")
    if terms < 0:
        raise ValueError("terms must be >= 0")
    eta_in = np.asarray(eta, dtype=float)
    if eta_in.shape != state.values.shape:
        raise ValueError("eta must have one entry per lattice site")
    slopes = slope_sequence(state)
    diag, off = linear_coefficients(state)
    expanding = cert.kind.expanding
    e = eta_in / (off if expanding else diag) if raw else eta_in
    # g[t] is the factor linking zeta_t to zeta_{t-1}: m_{t-1}
    if expanding:
        # zeta_{t-1} = -eta_t - sum_k prod_{n<=k} m_{t-1+n}^-1 eta_{t+1+k}
        minv = _inverse_slopes(slopes)          # minv[j] = 1/m_j
        acc = -e.copy()                          # indexed by t (gives zeta_{t-1})
        prod = np.ones_like(e)
        for k in range(terms):
            prod = prod * np.roll(minv, -(k - 1))  # multiplies m_{t-1+k}^-1
            acc -= prod * np.roll(e, -(1 + k))
        zeta = np.roll(acc, -1)
    else:
        m = _finite_slopes(slopes)
        acc = e.copy()
        prod = np.ones_like(e)
        for k in range(terms):
            prod = prod * np.roll(m, 1 + k)        # multiplies m_{t-1-k}
            acc += prod * np.roll(e, 1 + k)
        zeta = acc
    res = _normalised_residual(slopes, zeta, e, expanding)
    bound = float(np.max(np.abs(e))) / cert.C * cert.lam ** (-terms) / (cert.lam - 1.0)
    return LimitLinearSolve(zeta, eta_in, terms, bound, res, raw)


def _normalised_residual(slopes, zeta, e, expanding) -> float:
    prev = np.roll(zeta, 1)
    if expanding:
        # m_{t-1}^-1 zeta_t - zeta_{t-1} - eta_t
        minv_prev = np.roll(_inverse_slopes(slopes), 1)
        r = minv_prev * zeta - prev - e
    else:
        m_prev = np.roll(_finite_slopes(slopes), 1)
        r = zeta - m_prev * prev - e
    return float(np.max(np.abs(r)))


def limit_matrix(state: AIState, normalised: str | None = None) -> np.ndarray:
    """Dense cyclic matrix of ``diag_t zeta_t - off_t zeta_{t-1}``.

    ``normalised`` = "expanding" / "contracting" divides row t by off_t /
    diag_t, giving the operator the series solution inverts.
    """
    diag, off = linear_coefficients(state)
    N = diag.size
    A = np.zeros((N, N))
    idx = np.arange(N)
    A[idx, idx] += diag
    A[idx, (idx - 1) % N] -= off
    if normalised == EXPANDING:
        A /= off[:, None]
    elif normalised == CONTRACTING:
        A /= diag[:, None]
    elif normalised is not None:
        raise ValueError(f"unknown normalisation {normalised!r}")
    return A


def dense_limit_solve(state: AIState, eta, normalised: str | None = None) -> np.ndarray:
    return np.linalg.solve(limit_matrix(state, normalised), np.asarray(eta, dtype=float))


@dataclass(frozen=True)
class InverseNormCheck:
    computed_norm: float
    bound: float
    ok: bool
    raw_norm: float
    normalised_norm: float


def inverse_norm_bound_check(state: AIState, cert: HyperbolicityCertificate | None = None,
                             rtol: float = 1e-9) -> InverseNormCheck:
    """Compare the exact inverse infinity-norm with 1 + C^-1 (lam - 1)^-1.

    ``computed_norm`` is the norm of the inverse of the row-normalised operator
    (the one the bound is stated for); the raw operator norm is reported too.
    A numerically singular matrix raises SingularMatrix before any
    certificate is consulted.
    """
    A = limit_matrix(state)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= SINGULAR_RCOND * max(sv[0], 1e-300):
        raise SingularMatrix(f"limit Jacobian singular (sigma_min/sigma_max = {sv[-1] / sv[0]:.3g})")
    cert = certify(state) if cert is None else cert
    if not cert.hyperbolic:
        raise NotHyperbolic(f"state is {cert.kind.value}")
    raw = float(np.max(np.abs(np.linalg.inv(A)).sum(axis=1)))
    An = limit_matrix(state, EXPANDING if cert.kind.expanding else CONTRACTING)
    norm = float(np.max(np.abs(np.linalg.inv(An)).sum(axis=1)))
    bound = cert.inverse_bound
    return InverseNormCheck(norm, bound, norm <= bound * (1.0 + rtol), raw, norm)
