"""Second-moment dynamics of a mechanical mode a coupled to a cavity mode b.

The frame is H = omega_m (a^dag a + b^dag b) - c(t) q_m q_cav with
q = (x + x^dag)/sqrt(2); a relaxes at rate gamma towards n_t, b at rate kappa
towards n_cav.  The 16 second moments obey a homogeneous linear system; the
bath terms enter as -gamma (n + 1) <a^dag a> + gamma n <a a^dag>.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CorruptedStateError, DomainError, IntegrationQualityError

LABELS = ("aa", "aad", "ab", "abd", "ba", "bad", "bb", "bbd",
          "ada", "adad", "adb", "adbd", "bda", "bdad", "bdb", "bdbd")
IDX = {k: i for i, k in enumerate(LABELS)}
N_MOMENTS = 16
T_SWITCH = 1.1 * math.pi
MAINTAIN_RATE = 50.0
DRIFT_TOL = 1e-6
IMAG_TOL = 1e-9
EDGE_SNAP = 1e-12  # relative to the pulse duration

# (i, j): <x_i> must equal conj(<x_j>) ; self-pairs mean "real"
CONJUGATE_PAIRS = (
    ("adad", "aa"), ("bdbd", "bb"), ("bdad", "ab"), ("adbd", "ab"),
    ("adb", "abd"), ("bad", "abd"),
    ("ada", "ada"), ("aad", "aad"), ("bdb", "bdb"), ("bbd", "bbd"),
)
EQUAL_PAIRS = (("ba", "ab"), ("bda", "abd"))


@dataclass(frozen=True)
class DynParams:
    omega_m: float = 1.0
    gamma: float = 1e-5
    kappa: float = 1e-5
    n_t: float = 100.0
    n_cav: float = 0.0

    def __post_init__(self):
        for name in ("omega_m", "gamma", "kappa"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive, got {v}")
        for name in ("n_t", "n_cav"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be non-negative, got {v}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_m


@dataclass
class MomentState:
    moments: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.moments = np.asarray(self.moments, dtype=complex)
        if self.moments.shape != (N_MOMENTS,):
            raise DomainError(f"expected {N_MOMENTS} moments, got shape {self.moments.shape}")

    def __getitem__(self, label: str) -> complex:
        return self.moments[IDX[label]]


def thermal_initial(n_t: float, n_cav: float) -> MomentState:
    if n_t < 0 or n_cav < 0:
        raise DomainError("occupancies must be non-negative")
    x = np.zeros(N_MOMENTS, dtype=complex)
    x[IDX["ada"]], x[IDX["aad"]] = n_t, n_t + 1.0
    x[IDX["bdb"]], x[IDX["bbd"]] = n_cav, n_cav + 1.0
    return MomentState(x, 0.0)


def phonon_number(state: MomentState) -> float:
    v = state["ada"]
    if abs(v.imag) >= IMAG_TOL:
        raise CorruptedStateError(f"<a^dag a> has imaginary part {v.imag:.3e}")
    return float(v.real)


def commutator_residuals(x: np.ndarray) -> np.ndarray:
    """(<aa^dag> - <a^dag a> - 1, <bb^dag> - <b^dag b> - 1), vectorized over leading axes."""
    x = np.asarray(x)
    return np.stack([x[..., IDX["aad"]] - x[..., IDX["ada"]] - 1.0,
                     x[..., IDX["bbd"]] - x[..., IDX["bdb"]] - 1.0], axis=-1)


def hermiticity_residual(x: np.ndarray) -> np.ndarray:
    """Largest violation of the conjugate/equality pairing table per state."""
    x = np.asarray(x)
    res = [np.abs(x[..., IDX[i]] - np.conj(x[..., IDX[j]])) for i, j in CONJUGATE_PAIRS]
    res += [np.abs(x[..., IDX[i]] - x[..., IDX[j]]) for i, j in EQUAL_PAIRS]
    return np.max(np.stack(res, axis=-1), axis=-1)


def rhs(x: np.ndarray, p: DynParams, c: float) -> np.ndarray:
    """Time derivative of the 16 moments at coupling c."""
    (aa, aad, ab, abd, ba, bad, bb, bbd,
     ada, adad, adb, adbd, bda, bdad, bdb, bdbd) = x
    w, g, k = p.omega_m, p.gamma, p.kappa
    # relaxation towards the bath occupancies, homogeneous in the moments
    mech = -g * (p.n_t + 1.0) * ada + g * p.n_t * aad
    cav = -k * (p.n_cav + 1.0) * bdb + k * p.n_cav * bbd
    ic, hic = 1j * c, 0.5j * c
    out = np.empty(N_MOMENTS, dtype=complex)
    out[0] = -2j * w * aa + ic * (ab + abd) - g * aa
    out[1] = -hic * (bda - bdad + ba - bad) + mech
    out[2] = -2j * w * ab + hic * (bb + aa + bdb + aad) - 0.5 * g * ab - 0.5 * k * ba
    out[3] = hic * (bbd - aad + bdbd - aa) - 0.5 * g * abd - 0.5 * k * bda
    out[4] = -2j * w * ba + hic * (bb + aa + bdb + aad) - 0.5 * g * ab - 0.5 * k * ba
    out[5] = -hic * (bdb - ada + bb - adad) - 0.5 * g * bad - 0.5 * k * bad
    out[6] = -2j * w * bb + ic * (ba + bad) - k * bb
    out[7] = -hic * (bad - bdad + ba - bda) + cav
    out[8] = hic * (bad + bdad - ba - bda) + mech
    out[9] = 2j * w * adad - ic * (bdad + bad) - g * adad
    out[10] = -hic * (bdb - ada + bb - adad) - 0.5 * (g + k) * adb
    out[11] = 2j * w * adbd - hic * (adad + bdbd + bbd + ada) - 0.5 * g * adbd - 0.5 * k * bdad
    out[12] = hic * (bbd - aad + bdbd - aa) - 0.5 * g * bda - 0.5 * k * abd
    out[13] = 2j * w * bdad - hic * (adad + bdbd + bbd + ada) - 0.5 * g * bdad - 0.5 * k * adbd
    out[14] = hic * (bda + bdad - ba - bad) + cav
    out[15] = 2j * w * bdbd - ic * (bdad + bda) - k * bdbd
    return out


def generator_matrices(p: DynParams) -> tuple[np.ndarray, np.ndarray]:
    """(A0, A1) with rhs(x, p, c) = (A0 + c A1) x."""
    eye = np.eye(N_MOMENTS, dtype=complex)
    a0 = np.column_stack([rhs(e, p, 0.0) for e in eye])
    a1 = np.column_stack([rhs(e, p, 1.0) for e in eye]) - a0
    return a0, a1


# ---------------------------------------------------------------- pulses

@dataclass(frozen=True)
class PiecewiseConstant:
    durations: tuple
    values: tuple

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.shape != v.shape or d.ndim != 1 or d.size == 0:
            raise DomainError("durations and values must be equal-length 1-d sequences")
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise DomainError("segment durations must be positive")
        if not np.all(np.isfinite(v)):
            raise DomainError("pulse values must be finite")
        object.__setattr__(self, "durations", tuple(float(x) for x in d))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def uniform(cls, values: Sequence[float], t_f: float) -> "PiecewiseConstant":
        n = len(values)
        return cls(tuple([t_f / n] * n), tuple(values))

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def duration(self) -> float:
        return float(self.edges[-1])

    def segment_index(self, t) -> np.ndarray:
        edges = self.edges
        # times within rounding of an edge belong to the later segment
        snap = EDGE_SNAP * edges[-1]
        idx = np.searchsorted(edges, np.asarray(t) + snap, side="right") - 1
        return np.clip(idx, 0, len(self.values) - 1)

    def __call__(self, t):
        return np.asarray(self.values)[self.segment_index(t)]


@dataclass(frozen=True)
class Sampled:
    """Zero-order hold of ``values`` on a grid of spacing ``dt``."""

    dt: float
    values: tuple

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("sample spacing must be positive")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            raise DomainError("samples must be a finite 1-d sequence")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def duration(self) -> float:
        return self.dt * len(self.values)

    def __call__(self, t):
        idx = np.clip((np.asarray(t) / self.dt).astype(int), 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class Maintain:
    """g_m(t) = exp(-50 (t - t0)) + k, with t0 the start of the holding stage."""

    k: float
    t0: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.k):
            raise DomainError("plateau value must be finite")

    duration = math.inf

    def __call__(self, t):
        return np.exp(-MAINTAIN_RATE * (np.asarray(t, dtype=float) - self.t0)) + self.k


@dataclass(frozen=True)
class Combined:
    """Cooling pulse up to t_switch, then the holding pulse started at t_switch."""

    cool: object
    maintain_k: float
    t_switch: float = T_SWITCH

    @property
    def duration(self) -> float:
        return math.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        hold = Maintain(self.maintain_k, self.t_switch)
        return np.where(t < self.t_switch, self.cool(np.minimum(t, self.t_switch)), hold(t))


ControlPulse = (PiecewiseConstant, Sampled, Maintain, Combined)


# ---------------------------------------------------------------- integration

def time_grid(t_f: float, dt: float, p: DynParams) -> tuple[int, float]:
    """Number of steps and the step h = t_f / n with h <= dt."""
    if not t_f > 0:
        raise DomainError(f"horizon must be positive, got {t_f}")
    if not 0 < dt <= p.period / 500.0 * (1 + 1e-12):
        raise DomainError(f"dt = {dt} exceeds period/500 = {p.period / 500}")
    n = max(1, int(math.ceil(t_f / dt - 1e-9)))
    return n, t_f / n


def stage_values(pulse, n: int, h: float, t0: float = 0.0) -> np.ndarray:
    """Pulse sampled at RK4 stage times (t, t + h/2, t + h) of every step; shape (n, 3)."""
    t = t0 + np.arange(n) * h
    return np.asarray(pulse(np.stack([t, t + 0.5 * h, t + h], axis=1)), dtype=float)


def step_increment(a0, a1, h, c1, c2, c4) -> np.ndarray:
    """One classical RK4 step of the linear system as x -> x + D x; returns D.

    Keeping the identity out of D avoids rounding 1 + O(h) on the diagonal,
    which would bias every step the same way and make invariants drift
    linearly in the number of steps.
    """
    m1, m2, m4 = a0 + c1 * a1, a0 + c2 * a1, a0 + c4 * a1
    k1 = m1
    k2 = m2 + 0.5 * h * (m2 @ k1)
    k3 = m2 + 0.5 * h * (m2 @ k2)
    k4 = m4 + h * (m4 @ k3)
    return h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_matrix(a0, a1, h, c1, c2, c4) -> np.ndarray:
    return np.eye(a0.shape[0], dtype=a0.dtype) + step_increment(a0, a1, h, c1, c2, c4)


def step_matrix_grad(a0, a1, h, c1, c2, c4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivatives of ``step_matrix`` with respect to the three stage couplings."""
    eye = np.eye(a0.shape[0], dtype=a0.dtype)
    m1, m2, m4 = a0 + c1 * a1, a0 + c2 * a1, a0 + c4 * a1
    k1 = m1
    k2 = m2 @ (eye + 0.5 * h * k1)
    k3 = m2 @ (eye + 0.5 * h * k2)
    # c1 enters k1 only
    d1 = a1
    d2 = m2 @ (0.5 * h * d1)
    d3 = m2 @ (0.5 * h * d2)
    d4 = m4 @ (h * d3)
    g1 = h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
    # c2 enters k2 and k3
    d2 = a1 @ (eye + 0.5 * h * k1)
    d3 = a1 @ (eye + 0.5 * h * k2) + m2 @ (0.5 * h * d2)
    d4 = m4 @ (h * d3)
    g2 = h / 6.0 * (2 * d2 + 2 * d3 + d4)
    # c4 enters k4 only
    g4 = h / 6.0 * (a1 @ (eye + h * k3))
    return g1, g2, g4


def _store(d: dict, key, value, max_size: int) -> None:
    if len(d) >= max_size:
        d.pop(next(iter(d)))  # first in, first out
    d[key] = value


class StepCache:
    """Memoized RK4 step increments (and their c-derivatives) keyed by the stage couplings."""

    def __init__(self, p: DynParams, h: float, max_size: int = 4096):
        self.a0, self.a1 = generator_matrices(p)
        self.h = h
        self.max_size = max_size
        self._phi: dict = {}
        self._grad: dict = {}

    def increment(self, key) -> np.ndarray:
        m = self._phi.get(key)
        if m is None:
            m = step_increment(self.a0, self.a1, self.h, *key)
            _store(self._phi, key, m, self.max_size)
        return m

    def grad(self, key):
        m = self._grad.get(key)
        if m is None:
            m = step_matrix_grad(self.a0, self.a1, self.h, *key)
            _store(self._grad, key, m, self.max_size)
        return m


def propagate(x0: np.ndarray, cache: StepCache, cs: np.ndarray, stride: int = 1) -> np.ndarray:
    """RK4 states after every ``stride`` steps (including the initial state)."""
    n = len(cs)
    out = np.empty((n // stride + 1 + (1 if n % stride else 0), N_MOMENTS), dtype=complex)
    out[0] = x = np.asarray(x0, dtype=complex)
    j = 1
    for i in range(n):
        x = x + cache.increment(tuple(cs[i])) @ x
        if (i + 1) % stride == 0 or i + 1 == n:
            out[j] = x
            j += 1
    return out[:j]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_records, 16) complex
    params: DynParams = field(repr=False, default=None)

    @property
    def nbar(self) -> np.ndarray:
        return self.states[:, IDX["ada"]].real

    @property
    def final(self) -> MomentState:
        return MomentState(self.states[-1].copy(), float(self.times[-1]))

    def max_drift(self) -> float:
        return float(max(np.abs(commutator_residuals(self.states)).max(),
                         hermiticity_residual(self.states).max()))

    def to_csv(self, path) -> None:
        header = ["t"] + [f"{part}_{k}" for k in LABELS for part in ("re", "im")] + ["nbar"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, x, nb in zip(self.times, self.states, self.nbar):
                row = [t]
                for v in x:
                    row += [v.real, v.imag]
                row.append(nb)
                w.writerow(["%.17g" % v for v in row])


def integrate(initial: MomentState, p: DynParams, pulse, t_f: float, dt: float | None = None,
              stride: int = 1, drift_tol: float = DRIFT_TOL) -> Trajectory:
    """Fixed-step RK4 from ``initial.time`` over a horizon of length ``t_f``."""
    if dt is None:
        dt = p.period / 2000.0
    n, h = time_grid(t_f, dt, p)
    if stride < 1:
        raise DomainError("stride must be >= 1")
    cs = stage_values(pulse, n, h, initial.time)
    states = propagate(initial.moments, StepCache(p, h), cs, stride)
    steps = np.arange(0, n + 1, stride)
    if steps[-1] != n:
        steps = np.append(steps, n)
    traj = Trajectory(initial.time + steps * h, states, p)
    drift = traj.max_drift()
    if not drift <= drift_tol:
        raise IntegrationQualityError(f"invariant drift {drift:.3e} exceeds {drift_tol:.1e}")
    return traj
