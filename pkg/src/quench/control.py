"""Steepest-descent optimal control of the coupling pulse.

The gradient is the exact derivative of the RK4-discretized objective
(discretize-then-optimize): the costate is pulled back through the same step
increments used by the forward sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DivergenceError, DomainError
from .moments import (
    DRIFT_TOL, IDX, N_MOMENTS, T_SWITCH, commutator_residuals, hermiticity_residual, DynParams, Maintain, MomentState, PiecewiseConstant, StepCache,
    Combined, generator_matrices, propagate, stage_values, thermal_initial, time_grid,
)

NA = IDX["ada"]
FD_STEP = 1e-6
FD_RTOL = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    n_segments: int = 12
    tau: float = 30.0
    epsilon: float = 1e-8
    max_iters: int = 300
    t_f: float = T_SWITCH
    objective: str = "terminal_nbar"  # or "mean_nbar"
    window: tuple = (0.0, T_SWITCH)  # used by mean_nbar
    dt: float = 2.0 * math.pi / 2000.0
    g_max: float = math.inf
    seed: int = 0
    check_gradient: bool = True
    min_tau: float = 1e-14

    def __post_init__(self):
        if int(self.n_segments) != self.n_segments or self.n_segments < 1:
            raise DomainError("n_segments must be a positive integer")
        for name in ("tau", "epsilon", "t_f", "dt", "g_max"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.max_iters < 0:
            raise DomainError("max_iters must be non-negative")
        if self.objective not in ("terminal_nbar", "mean_nbar"):
            raise DomainError(f"unknown objective {self.objective!r}")


@dataclass
class OptimizationResult:
    pulse: PiecewiseConstant
    objective_value: float
    gradient_norm_history: list
    objective_history: list
    iterations: int
    converged: bool
    initial_objective: float
    gradient_check: float = math.nan  # max relative FD mismatch of the spot check


@dataclass
class _Problem:
    """Forward/adjoint machinery for one parameter set and time grid."""

    params: DynParams
    t_f: float
    dt: float
    x0: np.ndarray
    objective: str = "terminal_nbar"
    window: tuple = (0.0, math.inf)
    t0: float = 0.0
    n: int = field(init=False)
    h: float = field(init=False)
    cache: StepCache = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.n, self.h = time_grid(self.t_f, self.dt, self.params)
        self.cache = StepCache(self.params, self.h)
        # objective = sum_i weights[i] * Re <a^dag a>(t_i)
        w = np.zeros(self.n + 1)
        if self.objective == "terminal_nbar":
            w[-1] = 1.0
        else:
            t = self.t0 + np.arange(self.n + 1) * self.h
            mask = (t >= self.window[0] - 1e-12) & (t <= self.window[1] + 1e-12)
            if not mask.any():
                raise DomainError("averaging window contains no grid points")
            w[mask] = 1.0 / mask.sum()
        self.weights = w

    def stages(self, pulse) -> np.ndarray:
        return stage_values(pulse, self.n, self.h, self.t0)

    def forward(self, cs: np.ndarray) -> np.ndarray:
        return propagate(self.x0, self.cache, cs)

    def value(self, xs: np.ndarray) -> float:
        return float(self.weights @ xs[:, NA].real)

    def trial_value(self, pulse) -> float:
        """Objective of a candidate pulse; nan when the integration is not trustworthy."""
        with np.errstate(all="ignore"):
            xs = self.forward(self.stages(pulse))
            last = xs[-1]
            if not np.all(np.isfinite(last)):
                return math.nan
            drift = max(np.abs(commutator_residuals(last)).max(), hermiticity_residual(last).max())
        # too large a coupling for the fixed step: RK4 no longer tracks the dynamics
        if not drift <= DRIFT_TOL:
            return math.nan
        return self.value(xs)

    def stage_gradient(self, xs: np.ndarray, cs: np.ndarray) -> np.ndarray:
        """dJ/dc at every RK4 stage, shape (n, 3)."""
        out = np.empty((self.n, 3))
        mu = np.zeros(N_MOMENTS, dtype=complex)
        mu[NA] = self.weights[-1]
        for i in range(self.n - 1, -1, -1):
            key = tuple(cs[i])
            x = xs[i]
            for j, gm in enumerate(self.cache.grad(key)):
                out[i, j] = np.real(np.vdot(mu, gm @ x))
            mu = mu + self.cache.increment(key).conj().T @ mu
            mu[NA] += self.weights[i]
        return out


def _segment_map(prob: _Problem, pulse: PiecewiseConstant) -> np.ndarray:
    t = prob.t0 + np.arange(prob.n) * prob.h
    st = np.stack([t, t + 0.5 * prob.h, t + prob.h], axis=1)
    return pulse.segment_index(st)


def segment_gradient(prob: _Problem, pulse: PiecewiseConstant):
    """(objective, per-segment gradient) of a piecewise-constant pulse."""
    cs = prob.stages(pulse)
    xs = prob.forward(cs)
    sg = prob.stage_gradient(xs, cs)
    grad = np.zeros(len(pulse.values))
    np.add.at(grad, _segment_map(prob, pulse).ravel(), sg.ravel())
    return prob.value(xs), grad


def gradient_norm(grad: np.ndarray, pulse: PiecewiseConstant) -> float:
    """L2 norm of dH/dg(t); per segment the density is grad_k / duration_k."""
    d = np.asarray(pulse.durations)
    return float(math.sqrt(np.sum(grad**2 / d)))


def _problem(params: DynParams, config: OptimizerConfig, x0=None) -> _Problem:
    if x0 is None:
        x0 = thermal_initial(params.n_t, params.n_cav).moments
    return _Problem(params, config.t_f, config.dt, np.asarray(x0, dtype=complex),
                    config.objective, tuple(config.window))


def gradient(pulse: PiecewiseConstant, params: DynParams, config: OptimizerConfig, x0=None) -> np.ndarray:
    """Per-segment derivative of the objective (exact for the RK4 discretization)."""
    return segment_gradient(_problem(params, config, x0), pulse)[1]


def objective(pulse, params: DynParams, config: OptimizerConfig, x0=None) -> float:
    prob = _problem(params, config, x0)
    return prob.value(prob.forward(prob.stages(pulse)))


def finite_difference(prob: _Problem, pulse: PiecewiseConstant, k: int, step: float = FD_STEP) -> float:
    vals = []
    for s in (step, -step):
        v = list(pulse.values)
        v[k] += s
        p = PiecewiseConstant(pulse.durations, tuple(v))
        vals.append(prob.value(prob.forward(prob.stages(p))))
    return (vals[0] - vals[1]) / (2 * step)


def costate_rhs(costate: np.ndarray, state: np.ndarray, params: DynParams, c: float) -> np.ndarray:
    """Continuous costate equation dp/dt = -(df/dx)^T p on the real 32-component split.

    ``state`` is accepted for interface symmetry; the moment system is linear,
    so the costate dynamics do not depend on it.
    """
    a0, a1 = generator_matrices(params)
    a = a0 + c * a1
    r = np.block([[a.real, -a.imag], [a.imag, a.real]])
    return -r.T @ np.asarray(costate, dtype=float)


def terminal_costate() -> np.ndarray:
    p = np.zeros(2 * N_MOMENTS)
    p[NA] = 1.0
    return p


def to_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag], axis=-1)


def steepest_descent(initial: PiecewiseConstant, params: DynParams, config: OptimizerConfig,
                     x0=None) -> OptimizationResult:
    """g <- g - tau dH/dg with backtracking; tau restarts from config.tau every iteration."""
    if len(initial.values) != config.n_segments:
        raise DomainError("initial pulse does not have n_segments segments")
    prob = _problem(params, config, x0)
    pulse = initial
    with np.errstate(all="ignore"):
        f, grad = segment_gradient(prob, pulse)
    if not (math.isfinite(f) and np.all(np.isfinite(grad))):
        raise DivergenceError("initial objective is not finite")
    f_init = f
    check = math.nan
    if config.check_gradient:
        check = _spot_check(prob, pulse, grad, config.seed)
    durations = np.asarray(pulse.durations)
    norms, values = [gradient_norm(grad, pulse)], [f]
    converged = norms[-1] <= config.epsilon
    it = 0
    while not converged and it < config.max_iters:
        tau = config.tau
        accepted = False
        while tau >= config.min_tau:
            g_new = np.asarray(pulse.values) - tau * grad / durations
            g_new = np.clip(g_new, -config.g_max, config.g_max)
            trial = PiecewiseConstant(pulse.durations, tuple(g_new))
            f_new = prob.trial_value(trial)
            if f_new < f:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
        it += 1
        if not f_new <= values[-1]:
            raise ConvergenceError("accepted iterate increased the objective")
        pulse = trial
        f, grad = segment_gradient(prob, pulse)
        norms.append(gradient_norm(grad, pulse))
        values.append(f)
        converged = norms[-1] <= config.epsilon
    if not f <= f_init:
        raise ConvergenceError("optimized pulse is worse than the initial pulse")
    return OptimizationResult(pulse=pulse, objective_value=f, gradient_norm_history=norms,
                              objective_history=values, iterations=it, converged=converged,
                              initial_objective=f_init, gradient_check=check)


def _spot_check(prob: _Problem, pulse: PiecewiseConstant, grad: np.ndarray, seed: int) -> float:
    rng = np.random.default_rng(seed)
    ks = rng.choice(len(grad), size=min(3, len(grad)), replace=False)
    worst = 0.0
    scale = np.abs(grad).max()
    for k in ks:
        fd = finite_difference(prob, pulse, int(k))
        err = abs(grad[k] - fd) / max(abs(fd), abs(grad[k]), 1e-6 * scale, 1e-300)
        worst = max(worst, err)
    if worst > FD_RTOL:
        raise ConvergenceError(f"adjoint gradient disagrees with finite differences ({worst:.2e})")
    return worst


# ---------------------------------------------------------------- maintenance

@dataclass
class MaintenanceResult:
    k: float
    mean_nbar: float
    pulse: Combined
    grid: list  # (k, mean nbar) evaluated on the coarse grid


def hold_trajectory(state: MomentState, params: DynParams, k: float, periods: float = 50.0,
                    dt: float | None = None, t_switch: float = T_SWITCH):
    """Integrate the holding pulse from a cooled state at t_switch; returns (times, nbar)."""
    if dt is None:
        dt = params.period / 2000.0
    n, h = time_grid(periods * params.period, dt, params)
    pulse = Maintain(k, t_switch)
    cs = stage_values(pulse, n, h, t_switch)
    xs = propagate(state.moments, StepCache(params, h), cs)
    return t_switch + np.arange(n + 1) * h, xs[:, NA].real


def maintained_mean(state: MomentState, params: DynParams, k: float, periods: float = 50.0,
                    dt: float | None = None) -> float:
    return float(np.mean(hold_trajectory(state, params, k, periods, dt)[1]))


def cooled_state(pulse: PiecewiseConstant, params: DynParams, config: OptimizerConfig) -> MomentState:
    prob = _problem(params, config)
    xs = prob.forward(prob.stages(pulse))
    return MomentState(xs[-1], config.t_f)


def optimize_maintenance(params: DynParams, cool: PiecewiseConstant, config: OptimizerConfig,
                         k_range=(0.0, 1.0), n_grid: int = 11, periods: float = 50.0) -> MaintenanceResult:
    """Grid-and-refine search over the plateau k minimizing the window-mean phonon number."""
    lo, hi = k_range
    if not 0.0 <= lo < hi <= 1.0:
        raise DomainError("k_range must lie within [0, 1]")
    state = cooled_state(cool, params, config)
    ks = np.linspace(lo, hi, n_grid)
    grid = [(float(k), maintained_mean(state, params, k, periods, config.dt)) for k in ks]
    i = int(np.argmin([m for _, m in grid]))
    a, b = ks[max(i - 1, 0)], ks[min(i + 1, n_grid - 1)]
    best_k, best_m = grid[i]
    if b > a:
        res = optimize.minimize_scalar(lambda k: maintained_mean(state, params, k, periods, config.dt),
                                       bounds=(a, b), method="bounded", options={"xatol": 1e-4})
        if res.fun < best_m:
            best_k, best_m = float(res.x), float(res.fun)
    return MaintenanceResult(best_k, best_m, Combined(cool, best_k, config.t_f), grid)
