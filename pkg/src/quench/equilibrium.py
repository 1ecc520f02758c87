"""Equilibrium observables of a harmonic oscillator in a Drude bath.

Variances come from Matsubara sums over nu_n = 2 pi n T; the partition-function
and entropy ratios compare the reduced state against the canonical (Gibbs)
state of the bare oscillator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .errors import ConvergenceError, DomainError, UncertaintyViolation, UnsupportedBathError
from .spectral import BathParams, Drude

MATSUBARA_RTOL = 1e-13
MATSUBARA_CAP = 10**8


@dataclass(frozen=True)
class OscillatorParams:
    omega0: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if self.mass != 1.0:
            raise DomainError("natural units fix the mass to 1")


@dataclass(frozen=True)
class EquilibriumReport:
    q2: float
    p2: float
    omega_eff: float
    z_ratio: float
    log_z_ratio: float
    s_ratio: float
    delta: float


def matsubara_sum(summand, step: float, scale: float, rtol: float = MATSUBARA_RTOL,
                  cap: int = MATSUBARA_CAP) -> np.ndarray:
    """Sum ``summand(n * step)`` over n >= 1 with an integral tail correction.

    ``summand`` maps an array of frequencies to an array of shape (k, len(nu)).
    The explicit partial sum runs to N; the remainder is replaced by the
    midpoint-rule integral over [N + 1/2, inf).  N doubles until the corrected
    total moves by less than ``rtol``.
    """
    n_stop = max(64, int(math.ceil(8.0 * scale / step)))
    partial = summand(step * np.arange(1, n_stop + 1, dtype=float)).sum(axis=-1)
    prev = None
    while True:
        def mapped(u, n_stop=n_stop):
            # x = (N + 1/2) / (1 - u) covers [N + 1/2, inf)
            x = (n_stop + 0.5) / (1.0 - u)
            return summand(np.array([step * x]))[..., 0] * (n_stop + 0.5) / (1.0 - u) ** 2

        tail, _ = integrate.quad_vec(mapped, 0.0, 1.0 - 1e-15, epsabs=0.0, epsrel=1e-12)
        total = partial + tail
        if prev is not None and np.all(np.abs(total - prev) <= rtol * np.abs(total)):
            return total
        if 2 * n_stop > cap:
            raise ConvergenceError(f"Matsubara sum did not converge within {cap} terms")
        prev = total
        extra = summand(step * np.arange(n_stop + 1, 2 * n_stop + 1, dtype=float))
        partial = partial + extra.sum(axis=-1)
        n_stop *= 2


def _drude(b: BathParams) -> Drude:
    if not isinstance(b.spectral, Drude):
        raise UnsupportedBathError("equilibrium sums are implemented for the Drude bath only")
    return b.spectral


@dataclass(frozen=True)
class _Sums:
    q2: float
    p2: float
    delta: float
    n: float  # occupation with 2 sqrt(q2 p2) = 2n + 1


def _sums(osc: OscillatorParams, b: BathParams) -> _Sums:
    """Variances as canonical closed form plus summed bath corrections.

    Summing only the O(gamma) deviations keeps q2 * p2 - 1/4 accurate at low T,
    where it is exponentially small and ill-conditioned in the raw sums.
    """
    s = _drude(b)
    w2 = osc.omega0**2
    g, wd = s.gamma, s.omega_d

    def summand(nu):
        gnu = g * wd * nu / (wd + nu)
        d0 = w2 + nu * nu
        den = d0 + gnu
        return np.stack([-gnu / (den * d0), gnu * nu * nu / (den * d0), gnu / den])

    scale = max(osc.omega0, wd, g, b.matsubara_step)
    sq, sp, sd = (float(v) for v in matsubara_sum(summand, b.matsubara_step, scale))
    t = b.temperature
    dq, dp = 2.0 * t * sq, 2.0 * t * sp
    x = b.beta * osc.omega0
    n_can = math.exp(-x) / -math.expm1(-x)
    q2c, p2c = (n_can + 0.5) / osc.omega0, (n_can + 0.5) * osc.omega0
    q2, p2 = q2c + dq, p2c + dp
    excess = n_can * (n_can + 1.0) + q2c * dp + p2c * dq + dq * dp
    if not excess > 0:
        raise UncertaintyViolation(f"q2 * p2 - 1/4 = {excess!r} is not positive")
    n = excess / (math.sqrt(q2 * p2) + 0.5)
    return _Sums(q2, p2, 2.0 * t * sd, n)


def variance_q(osc: OscillatorParams, b: BathParams) -> float:
    """Position variance (1/beta) sum_n 1/(omega0^2 + nu_n^2 + gamma~(nu_n) |nu_n|)."""
    return _sums(osc, b).q2


def variance_p(osc: OscillatorParams, b: BathParams) -> float:
    """Momentum variance (1/beta) sum_n (omega0^2 + gamma~ |nu_n|)/(omega0^2 + nu_n^2 + gamma~ |nu_n|)."""
    return _sums(osc, b).p2


def squeezing_delta(osc: OscillatorParams, b: BathParams) -> float:
    """Squeezing parameter Delta = <p^2> - omega0^2 <q^2>.

    Evaluated from the analytic gamma-derivative of ln Z', i.e.
    (2 gamma / beta) sum_n [wD nu_n / (wD + nu_n)] / (omega0^2 + nu_n^2 + gamma~ nu_n),
    not from the difference of the two variances.
    """
    return _sums(osc, b).delta


def effective_frequency(q2: float, p2: float, beta: float) -> float:
    """Frequency of the Gibbs state with the same purity as (q2, p2)."""
    prod = q2 * p2
    if not prod > 0.25:
        raise UncertaintyViolation(f"q2 * p2 = {prod!r} does not exceed 1/4")
    return math.log1p(1.0 / _occupation(q2, p2)) / beta


def _log_sinh(x: float) -> float:
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0)


def _occupation(q2: float, p2: float) -> float:
    """Thermal occupation n with symplectic eigenvalue 2 sqrt(q2 p2) = 2n + 1."""
    prod = q2 * p2
    if prod < 0.25:
        raise UncertaintyViolation(f"symplectic eigenvalue below 1 (q2 * p2 = {prod!r})")
    return (prod - 0.25) / (math.sqrt(prod) + 0.5)


def gaussian_entropy(n: float) -> float:
    """Von Neumann entropy of a single-mode Gaussian state with occupation n."""
    if n < 0:
        raise UncertaintyViolation(f"negative occupation {n}")
    if n == 0:
        return 0.0
    return math.log1p(n) + float(xlogy(n, 1.0 + 1.0 / n))


def _report_from(osc: OscillatorParams, b: BathParams, r: _Sums) -> EquilibriumReport:
    beta = b.beta
    w_eff = math.log1p(1.0 / r.n) / beta
    log_z = _log_sinh(0.5 * beta * osc.omega0) - _log_sinh(0.5 * beta * w_eff)
    s = gaussian_entropy(r.n)
    # canonical occupation straight from Bose-Einstein; avoids coth rounding to 1
    x = beta * osc.omega0
    s_can = gaussian_entropy(math.exp(-x) / -math.expm1(-x))
    s_ratio = s / s_can if s_can > 0 else math.inf
    return EquilibriumReport(q2=r.q2, p2=r.p2, omega_eff=w_eff, z_ratio=math.exp(log_z),
                             log_z_ratio=log_z, s_ratio=s_ratio, delta=r.delta)


def partition_ratio(osc: OscillatorParams, b: BathParams) -> float:
    """Z / Z_can = sinh(beta omega0 / 2) / sinh(beta omega_eff / 2)."""
    return equilibrium_report(osc, b).z_ratio


def entropy_ratio(osc: OscillatorParams, b: BathParams) -> float:
    """S / S_can, both entropies from the single-mode symplectic eigenvalue."""
    return equilibrium_report(osc, b).s_ratio


def equilibrium_report(osc: OscillatorParams, b: BathParams) -> EquilibriumReport:
    return _report_from(osc, b, _sums(osc, b))
