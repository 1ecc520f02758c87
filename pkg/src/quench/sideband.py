"""Steady-state sideband-cooling limits.

Two conventions coexist and are kept apart:

* rate-equation (golden-rule) formulas use the energy decay rate ``kappa``
  through S_NN(omega) = n_cav kappa / (kappa^2/4 + (Delta + omega)^2);
* Langevin formulas use the amplitude kernel kappa~(omega) from
  ``cav_kernel`` (defaults to a flat kernel equal to ``kappa``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import optimize

from .errors import DomainError, NoCoolingError
from .spectral import Drude, OhmicExp, OhmicFlat, SpectralDensity, kernel_fourier


@dataclass(frozen=True)
class CoolingParams:
    omega_m: float = 1.0
    detuning: float = 1.0
    kappa: float = 0.01
    g0: float = 0.0
    g: float = 0.0
    gamma_m: float = 0.0
    n_th: float = 0.0
    n_cav: float = 1.0
    mech_kernel: Optional[Drude] = None  # None: no intrinsic mechanical damping
    cav_kernel: Optional[SpectralDensity] = None  # None: flat kernel equal to kappa

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not self.omega_m > 0:
            raise DomainError(f"omega_m must be positive, got {self.omega_m}")
        for name in ("g0", "g", "gamma_m", "n_th", "n_cav"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be non-negative, got {v}")
        if self.mech_kernel is not None and not isinstance(self.mech_kernel, Drude):
            raise DomainError("mechanical kernel must be Drude")
        if self.cav_kernel is not None and not isinstance(self.cav_kernel, (OhmicExp, OhmicFlat, Drude)):
            raise DomainError(f"unknown cavity kernel {self.cav_kernel!r}")

    def kappa_tilde(self, omega: float) -> float:
        k = self.cav_kernel if self.cav_kernel is not None else OhmicFlat(self.kappa)
        return kernel_fourier(k, omega)

    def gamma_i(self, omega: float) -> float:
        if self.mech_kernel is None:
            return 0.0
        return kernel_fourier(self.mech_kernel, omega)


@dataclass(frozen=True)
class CoolingLimits:
    a_plus: float
    a_minus: float
    gamma_opt: float
    n_steady: float
    n_min: float
    delta_omega_m: float
    gamma_om: float


def snn(p: CoolingParams, omega: float) -> float:
    """Cavity photon-number noise spectrum seen by the mechanics."""
    return p.n_cav * p.kappa / (0.25 * p.kappa**2 + (p.detuning + omega) ** 2)


def golden_rule_rates(p: CoolingParams) -> tuple[float, float]:
    """(a_plus, a_minus): phonon emission and absorption rates."""
    g2 = p.g0**2
    return g2 * snn(p, p.omega_m), g2 * snn(p, -p.omega_m)


def gamma_opt(p: CoolingParams) -> float:
    a_plus, a_minus = golden_rule_rates(p)
    return a_minus - a_plus


def n_min_markovian(p: CoolingParams) -> float:
    """Rate-equation limit A+/(A- - A+), independent of g0 and n_cav."""
    # g0 and n_cav cancel; unit values keep the limit defined at g0 = 0
    q = CoolingParams(omega_m=p.omega_m, detuning=p.detuning, kappa=p.kappa)
    s_plus, s_minus = snn(q, q.omega_m), snn(q, -q.omega_m)
    if not s_minus > s_plus:
        raise NoCoolingError(f"no net optical damping at detuning {p.detuning}")
    return s_plus / (s_minus - s_plus)


def optimal_detuning(p: CoolingParams) -> float:
    """Detuning in (0, 2 omega_m] minimizing n_min_markovian."""

    def f(d):
        q = CoolingParams(omega_m=p.omega_m, detuning=d, kappa=p.kappa)
        return math.log(n_min_markovian(q))

    res = optimize.minimize_scalar(f, bounds=(1e-9 * p.omega_m, 2.0 * p.omega_m), method="bounded",
                                   options={"xatol": 1e-10 * p.omega_m})
    return float(res.x)


def n_steady(p: CoolingParams) -> float:
    """(A+ + n_th gamma_m) / (gamma_opt + gamma_m)."""
    a_plus, a_minus = golden_rule_rates(p)
    den = a_minus - a_plus + p.gamma_m
    if not den > 0:
        raise NoCoolingError(f"total damping {den} is not positive")
    return (a_plus + p.n_th * p.gamma_m) / den


def optomech_response(p: CoolingParams, omega: float) -> tuple[float, float]:
    """(delta_omega_m, gamma_om) of the Langevin treatment at frequency omega."""
    k = p.kappa_tilde(omega)
    bracket = 1.0 / complex(k, p.detuning - omega) - 1.0 / complex(k, -(p.detuning + omega))
    g2 = p.g**2
    return g2 * bracket.imag, 2.0 * g2 * bracket.real


def total_damping(p: CoolingParams, omega: float) -> float:
    """gamma~(omega) = gamma~_i(omega) + gamma_OM(|omega|)."""
    return p.gamma_i(omega) + optomech_response(p, abs(omega))[1]


def _nf_numerator(p: CoolingParams, omega: float) -> float:
    k = p.kappa_tilde(omega)
    return p.gamma_m * p.n_th + p.g**2 * k / (k * k + (p.detuning - omega) ** 2)


def nf(p: CoolingParams, omega: float) -> float:
    """Back-action modified phonon number n_f(omega)."""
    gt = total_damping(p, omega)
    if not gt > 0:
        raise NoCoolingError(f"total mechanical damping {gt} at omega={omega} is not positive")
    return _nf_numerator(p, omega) / gt


def sbb(p: CoolingParams, omega: float) -> float:
    """Mechanical noise spectrum gamma~ n_f / (gamma~^2 + (omega_m + omega)^2)."""
    gt = total_damping(p, omega)
    if not gt > 0:
        raise NoCoolingError(f"total mechanical damping {gt} at omega={omega} is not positive")
    return _nf_numerator(p, omega) / (gt * gt + (p.omega_m + omega) ** 2)


def n_min_nonmarkovian(kernel: SpectralDensity, omega_m: float) -> float:
    """kappa~(omega_m)^2 / (8 omega_m^2)."""
    if not omega_m > 0:
        raise DomainError(f"omega_m must be positive, got {omega_m}")
    return kernel_fourier(kernel, omega_m) ** 2 / (8.0 * omega_m**2)


def n_m_langevin(kappa: float, omega_m: float) -> float:
    """Markovian Langevin limit kappa^2 / (8 omega_m^2), amplitude-rate kappa."""
    return n_min_nonmarkovian(OhmicFlat(kappa), omega_m)


def cooling_limits(p: CoolingParams) -> CoolingLimits:
    a_plus, a_minus = golden_rule_rates(p)
    dw, gom = optomech_response(p, p.omega_m)
    return CoolingLimits(a_plus=a_plus, a_minus=a_minus, gamma_opt=a_minus - a_plus,
                         n_steady=n_steady(p), n_min=n_min_markovian(p),
                         delta_omega_m=dw, gamma_om=gom)
