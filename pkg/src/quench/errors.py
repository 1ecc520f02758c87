"""Exception types raised by the numerical modules."""


class QuenchError(Exception):
    """Base class for all library errors."""


class DomainError(QuenchError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedBathError(QuenchError, ValueError):
    """The spectral-density variant is not supported by this operation."""


class UncertaintyViolation(QuenchError, ValueError):
    """Variances violate the Heisenberg bound q2 * p2 >= 1/4."""


class InstabilityError(QuenchError, ValueError):
    """Coupled-oscillator parameters give an imaginary normal-mode frequency."""


class BracketError(QuenchError, ValueError):
    """A root-finding bracket does not straddle the target."""


class NoCoolingError(QuenchError, ValueError):
    """Net optical damping is not positive, so no finite cooling limit exists."""


class ConvergenceError(QuenchError, RuntimeError):
    """An adaptive series or quadrature failed to converge within its cap."""


class IntegrationQualityError(QuenchError, RuntimeError):
    """Invariant drift during time integration exceeded tolerance."""


class CorruptedStateError(QuenchError, RuntimeError):
    """A moment that must be real carries a significant imaginary part."""


class DivergenceError(QuenchError, RuntimeError):
    """The optimizer produced a non-finite objective."""


class ConfigError(QuenchError, ValueError):
    """A run configuration is malformed."""
