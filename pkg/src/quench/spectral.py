"""Bath spectral densities and the kernels derived from them.

Natural units throughout: hbar = k_B = m0 = 1, frequencies in units of the
system frequency.  Three bath models are supported:

* :class:`Drude` -- J(w) = gamma w wD^2 / (w^2 + wD^2)
* :class:`OhmicExp` -- J(w) = kappa w exp(-w / wC)
* :class:`OhmicFlat` -- J(w) = gamma w (no cutoff; Markovian limit)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, UnsupportedBathError

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-9


def _check_rate(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Drude:
    """Ohmic density with a Lorentzian (Drude) high-frequency cutoff."""

    gamma: float
    omega_d: float

    def __post_init__(self):
        _check_rate("gamma", self.gamma)
        _check_rate("omega_d", self.omega_d)


@dataclass(frozen=True)
class OhmicExp:
    """Ohmic density with an exponential cutoff."""

    kappa: float
    omega_c: float

    def __post_init__(self):
        _check_rate("kappa", self.kappa)
        _check_rate("omega_c", self.omega_c)


@dataclass(frozen=True)
class OhmicFlat:
    """Bare Ohmic density; only meaningful where integrals stay finite."""

    gamma: float

    def __post_init__(self):
        _check_rate("gamma", self.gamma)


SpectralDensity = Union[Drude, OhmicExp, OhmicFlat]


@dataclass(frozen=True)
class BathParams:
    temperature: float
    spectral: SpectralDensity

    def __post_init__(self):
        _check_rate("temperature", self.temperature)

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def matsubara_step(self) -> float:
        """Spacing Omega = 2 pi T of the bosonic Matsubara frequencies."""
        return 2.0 * math.pi * self.temperature

    def matsubara(self, l: int) -> float:
        return l * self.matsubara_step


def _strength(s: SpectralDensity) -> float:
    # slope J'(0)
    if isinstance(s, (Drude, OhmicFlat)):
        return s.gamma
    return s.kappa


def _cutoff(s: SpectralDensity) -> float:
    if isinstance(s, Drude):
        return s.omega_d
    if isinstance(s, OhmicExp):
        return s.omega_c
    return math.inf


def j_of_omega(s: SpectralDensity, omega):
    """Spectral density J(omega) for omega >= 0 (scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("spectral density is defined for omega >= 0")
    if isinstance(s, Drude):
        out = s.gamma * w * s.omega_d**2 / (w**2 + s.omega_d**2)
    elif isinstance(s, OhmicExp):
        out = s.kappa * w * np.exp(-w / s.omega_c)
    elif isinstance(s, OhmicFlat):
        out = s.gamma * w
    else:
        raise UnsupportedBathError(f"unknown spectral density {s!r}")
    return out if out.ndim else float(out)


def power_spectrum(b: BathParams, omega):
    """Bath power spectrum I(omega, T) = J(omega) coth(beta omega / 2)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("power spectrum requires omega > 0")
    out = j_of_omega(b.spectral, w) / np.tanh(0.5 * b.beta * w)
    return out if np.ndim(out) else float(out)


def _semi_infinite(f: Callable[[float], float], scale: float) -> float:
    """Integrate f over [0, inf) through the map w = scale * u / (1 - u)."""

    def mapped(u):
        if u >= 1.0:
            return 0.0
        return f(scale * u / (1.0 - u)) * scale / (1.0 - u) ** 2

    val, _ = integrate.quad(mapped, 0.0, 1.0, epsabs=QUAD_EPSABS,
                            epsrel=QUAD_EPSREL, limit=500)
    return val


def noise_kernel(b: BathParams, sigma: float) -> float:
    """Imaginary-time bath correlation K(sigma), 0 <= sigma <= beta.

    K(sigma) = (1/pi) int_0^inf dw J(w) cosh(w(beta/2 - sigma)) / sinh(w beta/2)
    """
    s = b.spectral
    if isinstance(s, OhmicFlat):
        raise UnsupportedBathError("noise kernel diverges for a flat Ohmic bath")
    beta = b.beta
    if not 0.0 <= sigma <= beta:
        raise DomainError(f"sigma must lie in [0, beta={beta}], got {sigma}")
    half = 0.5 * beta
    a = abs(half - sigma)
    gap = half - a  # distance to nearest endpoint
    if gap == 0.0 and isinstance(s, Drude):
        # J coth ~ 1/w at large w
        raise DomainError("Drude noise kernel is singular at sigma = 0 and sigma = beta")
    slope = _strength(s)

    def integrand(w):
        if w == 0.0:
            return slope / half
        num = math.exp(-w * gap) + math.exp(-w * (half + a))
        den = -math.expm1(-2.0 * w * half)
        return j_of_omega(s, w) * num / den

    scale = _cutoff(s)
    if gap > 0:
        scale = min(scale, 1.0 / gap)
    return _semi_infinite(integrand, scale) / math.pi


def damping_laplace(s: SpectralDensity, z: float) -> float:
    """Laplace transform of the damping kernel, the effective coupling at rate z.

    gamma~(z) = int_0^inf (dw/pi) (J(w)/w) 2z / (w^2 + z^2)
    """
    if not z > 0:
        raise DomainError(f"Laplace variable must be positive, got {z}")
    if isinstance(s, Drude):
        return s.gamma * s.omega_d / (s.omega_d + z)
    if isinstance(s, OhmicFlat):
        return s.gamma
    if isinstance(s, OhmicExp):
        return _damping_laplace_numeric(s, z)
    raise UnsupportedBathError(f"unknown spectral density {s!r}")


def _damping_laplace_numeric(s: SpectralDensity, z: float) -> float:
    cutoff = _cutoff(s)
    if isinstance(s, Drude):
        ratio = lambda w: s.gamma * s.omega_d**2 / (w * w + s.omega_d**2)
    else:
        ratio = lambda w: s.kappa * math.exp(-w / s.omega_c)

    def integrand(w):
        return ratio(w) * 2.0 * z / (w * w + z * z)

    # split at z so the Lorentzian peak of width z is resolved on both sides
    head, _ = integrate.quad(integrand, 0.0, z, epsabs=QUAD_EPSABS,
                             epsrel=QUAD_EPSREL, limit=500)
    tail = _semi_infinite(lambda w: integrand(w + z), max(z, min(cutoff, 1e3 * z)))
    return (head + tail) / math.pi


def effective_coupling(b: BathParams, l: int) -> float:
    """Effective coupling gamma~(|nu_l|) at the l-th Matsubara frequency."""
    if l < 1:
        raise DomainError("Matsubara index must be >= 1")
    nu = b.matsubara(l)
    s = b.spectral
    if isinstance(s, Drude):
        return s.gamma / (1.0 + nu / s.omega_d)
    return damping_laplace(s, nu)


def kernel_fourier(s: SpectralDensity, omega):
    """Fourier transform of the dissipation kernel; even and positive in omega."""
    w = np.abs(np.asarray(omega, dtype=float))
    if isinstance(s, Drude):
        out = s.gamma * s.omega_d**2 / (w**2 + s.omega_d**2)
    elif isinstance(s, OhmicExp):
        out = s.kappa * np.exp(-w / s.omega_c)
    elif isinstance(s, OhmicFlat):
        out = np.full_like(w, s.gamma)
    else:
        raise UnsupportedBathError(f"unknown spectral density {s!r}")
    return out if out.ndim else float(out)
