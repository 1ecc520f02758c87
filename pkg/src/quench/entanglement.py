"""Stationary entanglement of two coupled oscillators in identical Drude baths.

The pair H = sum_i (p_i^2 + omega0^2 q_i^2)/2 - c0 q1 q2 separates into normal
modes q_pm = (q1 +- q2)/sqrt(2) with omega_pm^2 = omega0^2 -+ c0.  Independent
identical baths on q1, q2 rotate into independent identical baths on q_pm, so
each normal mode is a single damped oscillator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .equilibrium import OscillatorParams, _sums
from .errors import BracketError, DomainError, InstabilityError
from .spectral import BathParams

# (q1, q2, p1, p2) ordering
SYMPLECTIC = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
PARTIAL_TRANSPOSE = np.diag([1.0, 1.0, 1.0, -1.0])
EN_FLOOR = 1e-12


@dataclass(frozen=True)
class TwoModeSystem:
    osc: OscillatorParams
    c0: float
    bath: BathParams

    def __post_init__(self):
        if not (math.isfinite(self.c0) and self.c0 >= 0):
            raise DomainError(f"c0 must be non-negative, got {self.c0}")
        if self.c0 >= self.osc.omega0**2:
            raise InstabilityError(f"c0 = {self.c0} >= omega0^2 makes omega_+ imaginary")

    @property
    def normal_frequencies(self) -> tuple[float, float]:
        w2 = self.osc.omega0**2
        return math.sqrt(w2 - self.c0), math.sqrt(w2 + self.c0)

    def at_temperature(self, t: float) -> "TwoModeSystem":
        return replace(self, bath=replace(self.bath, temperature=t))


@dataclass(frozen=True)
class TwoModeCovariance:
    sigma: np.ndarray
    symplectic_eigs: np.ndarray  # eigenvalues of -i Sigma sigma

    @classmethod
    def from_sigma(cls, sigma) -> "TwoModeCovariance":
        s = _check_sigma(sigma)
        return cls(s, np.linalg.eigvals(-1j * SYMPLECTIC @ s))


def _check_sigma(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=float)
    if s.shape != (4, 4):
        raise DomainError(f"covariance must be 4x4, got {s.shape}")
    if not np.allclose(s, s.T, rtol=0, atol=1e-12 * np.abs(s).max()):
        raise DomainError("covariance is not symmetric")
    if np.linalg.eigvalsh(s).min() <= 0:
        raise DomainError("covariance is not positive definite")
    return s


def equilibrium_covariance(sys: TwoModeSystem) -> TwoModeCovariance:
    w_plus, w_minus = sys.normal_frequencies
    a = _sums(OscillatorParams(w_plus), sys.bath)
    b = _sums(OscillatorParams(w_minus), sys.bath)
    qq, qc = 0.5 * (a.q2 + b.q2), 0.5 * (a.q2 - b.q2)
    pp, pc = 0.5 * (a.p2 + b.p2), 0.5 * (a.p2 - b.p2)
    sigma = np.array([
        [qq, qc, 0, 0],
        [qc, qq, 0, 0],
        [0, 0, pp, pc],
        [0, 0, pc, pp],
    ])
    return TwoModeCovariance.from_sigma(sigma)


def log_negativity(cov: TwoModeCovariance) -> float:
    """PPT logarithmic negativity -1/2 sum_i log2 min(1, 2|lambda_i|).

    lambda_i are eigenvalues of -i Sigma sigma~ with sigma~ the partial
    transpose (p2 -> -p2); each symplectic eigenvalue appears as a +- pair.
    """
    s = _check_sigma(cov.sigma)
    st = PARTIAL_TRANSPOSE @ s @ PARTIAL_TRANSPOSE
    lam = np.sort(np.abs(np.linalg.eigvals(-1j * SYMPLECTIC @ st)))[::-1]
    en = -0.5 * float(np.sum(np.log2(np.minimum(1.0, 2.0 * lam))))
    return 0.0 if en < EN_FLOOR else en


def separability(cov: TwoModeCovariance) -> bool:
    return log_negativity(cov) == 0.0


def physicality_residual(cov: TwoModeCovariance) -> float:
    """Smallest eigenvalue of sigma + (i/2) Sigma; must be >= 0 for a physical state."""
    return float(np.linalg.eigvalsh(cov.sigma + 0.5j * SYMPLECTIC).min())


def negativity_at(sys: TwoModeSystem, t: float | None = None) -> float:
    if t is not None:
        sys = sys.at_temperature(t)
    return log_negativity(equilibrium_covariance(sys))


def critical_temperature(sys: TwoModeSystem, t_lo: float, t_hi: float, tol: float = 1e-4,
                         n_check: int = 8) -> float:
    """Temperature where E_N first vanishes, by bisection on [t_lo, t_hi].

    The temperature carried by ``sys.bath`` is ignored.  E_N must decrease
    along the segment; this is checked on ``n_check`` interior points.
    """
    if not 0 < t_lo < t_hi:
        raise BracketError(f"need 0 < t_lo < t_hi, got {t_lo}, {t_hi}")
    e_lo, e_hi = negativity_at(sys, t_lo), negativity_at(sys, t_hi)
    if not (e_lo > 0 and e_hi == 0):
        raise BracketError(f"E_N({t_lo}) = {e_lo}, E_N({t_hi}) = {e_hi}; bracket does not straddle")
    grid = np.linspace(t_lo, t_hi, n_check + 2)
    vals = [e_lo] + [negativity_at(sys, t) for t in grid[1:-1]] + [e_hi]
    if np.any(np.diff(vals) > 1e-12):
        raise BracketError("E_N is not monotone decreasing on the bracket")
    # tighten to the last positive grid cell before bisecting
    k = max(i for i, v in enumerate(vals) if v > 0)
    lo, hi = grid[k], grid[k + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if negativity_at(sys, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
