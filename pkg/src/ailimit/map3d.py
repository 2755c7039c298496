"""The 3D quadratic map L(x, y, z) = (alpha - sigma y + delta z + a x^2 + b x y + c y^2, x, y)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NotPeriodic, ZeroDelta

UNIT_BAND = (0.95, 1.05)


@dataclass(frozen=True)
class MapParams:
    alpha: float
    sigma: float
    delta: float
    a: float
    b: float
    c: float

    def __post_init__(self):
        if abs(self.a + self.b + self.c - 1.0) > 1e-12:
            raise ValueError(f"a + b + c must equal 1 (got {self.a + self.b + self.c!r})")

    @classmethod
    def from_ac(cls, alpha, sigma, delta, a, c) -> "MapParams":
        return cls(alpha, sigma, delta, a, 1.0 - a - c, c)


class State3(NamedTuple):
    x: float
    y: float
    z: float


def step(p: MapParams, s) -> State3:
    x, y, z = s
    return State3(p.alpha - p.sigma * y + p.delta * z + p.a * x * x + p.b * x * y + p.c * y * y, x, y)


def inverse_step(p: MapParams, s) -> State3:
    if p.delta == 0.0:
        raise ZeroDelta("map is not invertible with delta = 0")
    x1, y1, z1 = s
    # the preimage is (y1, z1, z) with x1 = alpha - sigma z1 + delta z + a y1^2 + b y1 z1 + c z1^2
    z = (x1 - p.alpha + p.sigma * z1 - p.a * y1 * y1 - p.b * y1 * z1 - p.c * z1 * z1) / p.delta
    return State3(y1, z1, z)


def jacobian_at(p: MapParams, s) -> np.ndarray:
    x, y, _ = s
    return np.array([
        [2.0 * p.a * x + p.b * y, -p.sigma + p.b * x + 2.0 * p.c * y, p.delta],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ])


def iterate(p: MapParams, s, n: int) -> list[State3]:
    out = [State3(*s)]
    for _ in range(n):
        out.append(step(p, out[-1]))
    return out


def orbit_residual(p: MapParams, orbit: Sequence, cyclic: bool = True) -> float:
    """max_t |L(P_t) - P_{t+1}|_inf, wrapping around when ``cyclic``."""
    if len(orbit) == 0:
        raise ValueError("orbit must be non-empty")
    pts = np.asarray(orbit, dtype=float)
    nxt = np.roll(pts, -1, axis=0) if cyclic else pts[1:]
    src = pts if cyclic else pts[:-1]
    if len(src) == 0:
        return 0.0
    img = np.array([step(p, q) for q in src])
    return float(np.max(np.abs(img - nxt)))


@dataclass(frozen=True)
class MonodromySpectrum:
    """Spectrum of the period-N Jacobian product stored in log form.

    ``log_abs[i]`` is log|mu_i| of the full monodromy eigenvalue and
    ``phase[i]`` its argument; ``per_step`` are the N-th roots
    |mu|^(1/N) e^(i phase/N), which stay finite for any period.
    """

    log_abs: np.ndarray
    phase: np.ndarray
    period: int

    @property
    def per_step_abs(self) -> np.ndarray:
        return np.exp(self.log_abs / self.period)

    @property
    def per_step(self) -> np.ndarray:
        return self.per_step_abs * np.exp(1j * self.phase / self.period)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Full eigenvalues; may overflow to inf for long, strongly expanding orbits."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_abs) * np.exp(1j * self.phase)

    @property
    def log_det(self) -> float:
        return float(np.sum(self.log_abs))

    def band_distance(self, band=UNIT_BAND) -> float:
        """Signed distance of the per-step magnitudes from the band (>0: outside)."""
        lo, hi = band
        r = self.per_step_abs
        return float(np.min(np.maximum(lo - r, r - hi)))

    def outside_band(self, band=UNIT_BAND) -> bool:
        return self.band_distance(band) > 0.0

    def to_json(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.per_step]


def monodromy_spectrum(p: MapParams, orbit: Sequence, tol: float = 1e-8) -> MonodromySpectrum:
    """Eigenvalues of J(P_{N-1}) ... J(P_0) for a periodic orbit.

    The product is accumulated with a periodic QR iteration so that its
    growth is carried in logarithms; a 1x1 or 2x2 block of the final
    quasi-triangular factor gives each (possibly complex) eigenvalue.
    Forming the product and calling eig loses the small eigenvalues of
    strongly hyperbolic orbits, even for short periods.
    """
    pts = [State3(*q) for q in orbit]
    if not pts:
        raise ValueError("orbit must be non-empty")
    res = orbit_residual(p, pts, cyclic=True)
    scale = 1.0 + max(abs(v) for q in pts for v in q)
    if res > tol * scale:
        raise NotPeriodic(f"orbit residual {res:.3g} exceeds {tol * scale:.3g}")
    mats = [jacobian_at(p, q) for q in pts]
    return _periodic_qr(mats)


def _sorted(log_abs, phase, N) -> MonodromySpectrum:
    order = np.argsort(-log_abs, kind="stable")
    return MonodromySpectrum(np.asarray(log_abs)[order], np.asarray(phase)[order], N)


def _periodic_qr(mats: list[np.ndarray], sweeps: int | None = None) -> MonodromySpectrum:
    """Periodic QR iteration ``J_k Q_k = Q_{k+1} R_k`` over repeated sweeps.

    At convergence Q_N = Q_0 T with T block diagonal, and the monodromy is
    similar to T R, R = R_{N-1} ... R_0.  Real eigenvalues come from
    sum_k log|R_k[i, i]|; a complex pair shows up as a 2x2 block of T and is
    resolved from the product of the matching 2x2 blocks of the R_k, which
    is accumulated with its own scale factor.
    """
    N = len(mats)
    if sweeps is None:
        # short orbits need more sweeps for the same number of factor steps
        sweeps = max(60, -(-3000 // N))
    Q = np.eye(3)
    logs = None
    pair_logs = None
    for _ in range(sweeps):
        Q0 = Q.copy()
        acc = np.zeros(3)
        blocks = {0: [np.eye(2), 0.0], 1: [np.eye(2), 0.0]}
        sign = np.ones(3)
        for J in mats:
            Q, R = np.linalg.qr(J @ Q)
            d = np.diag(R)
            sign *= np.sign(np.where(d == 0.0, 1.0, d))
            acc += np.log(np.where(d == 0.0, 1e-300, np.abs(d)))
            for k, blk in blocks.items():
                B = R[k:k + 2, k:k + 2] @ blk[0]
                nrm = np.max(np.abs(B))
                if nrm > 0.0:
                    B /= nrm
                    blk[1] += math.log(nrm)
                blk[0] = B
        T = Q0.T @ Q
        sub = np.abs(np.diag(T, -1))
        k = int(np.argmax(sub))
        rest = 2 if k == 0 else 0
        Bk, log_scale = blocks[k]
        ev2 = np.linalg.eigvals(T[k:k + 2, k:k + 2] @ Bk)
        with np.errstate(divide="ignore"):
            new_pair = np.sort(np.log(np.abs(ev2))) + log_scale
        tol = 1e-10 * (1.0 + np.max(np.abs(acc)))
        settled = diag_settled = False
        if logs is not None:
            # either every diagonal log has settled, or the 2x2 block has
            # decoupled (a complex pair keeps rotating inside it) and its
            # eigenvalues and the remaining log have settled
            coupling = max(np.max(np.abs(T[rest, [k, k + 1]])), np.max(np.abs(T[[k, k + 1], rest])))
            diag_settled = np.max(np.abs(acc - logs)) < tol
            settled = (diag_settled
                       or (coupling < 1e-12 and abs(acc[rest] - logs[rest]) < tol
                           and np.max(np.abs(new_pair - pair_logs)) < tol))
        logs, pair_logs = acc, new_pair
        if settled:
            break
    if np.all(sub < 1e-6) and (diag_settled or not settled):
        phase = np.where(np.sign(np.diag(T)) * sign < 0, np.pi, 0.0)
        return _sorted(logs, phase, N)
    with np.errstate(divide="ignore"):
        log_abs = np.concatenate([np.log(np.abs(ev2)) + log_scale, [logs[rest]]])
    phase = np.concatenate([np.angle(ev2), [0.0 if T[rest, rest] * sign[rest] > 0 else np.pi]])
    return _sorted(log_abs, phase, N)


def linearised_orbit_solve(p: MapParams, orbit: Sequence, rhs) -> np.ndarray:
    """Solve zeta_{t+1} - J(P_t) zeta_t = eta_t (cyclic) for the 3-vectors zeta_t.

    ``rhs`` has shape (N, 3).  This is the linearisation of the orbit
    equation P_{t+1} = L(P_t) in 3N unknowns.
    """
    pts = [State3(*q) for q in orbit]
    N = len(pts)
    A = np.zeros((3 * N, 3 * N))
    for t, q in enumerate(pts):
        r = 3 * t
        nxt = 3 * ((t + 1) % N)
        A[r:r + 3, nxt:nxt + 3] += np.eye(3)
        A[r:r + 3, r:r + 3] -= jacobian_at(p, q)
    return lu_solve(lu_factor(A), np.asarray(rhs, dtype=float).ravel()).reshape(N, 3)
