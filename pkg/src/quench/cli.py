"""Command-line front end: JSON config in, CSV data plus a JSON manifest out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize

from . import __version__
from .control import OptimizerConfig, hold_trajectory, steepest_descent
from .entanglement import TwoModeSystem, log_negativity, equilibrium_covariance
from .equilibrium import OscillatorParams, equilibrium_report
from .errors import ConfigError, DomainError, QuenchError
from .moments import (
    T_SWITCH, DynParams, Maintain, MomentState, PiecewiseConstant, integrate, thermal_initial, time_grid,
)
from .sideband import n_m_langevin, n_min_nonmarkovian
from .spectral import BathParams, Drude, OhmicExp

ENV_WORKERS = "QUENCH_WORKERS"
MANIFEST = "manifest.json"
TIMING = "timing.json"  # wall-clock data; excluded from the hash inventory

ERRATA_KERNEL = ("cavity kernel: kappa~(omega) is normalized so that a flat kernel returns kappa; "
                 "a 1/pi-scaled variant of the Fourier transform would rescale n_nml and n_nme by 1/pi^2")
ERRATA_MOMENTS = ("moment equations: d<a^dag a^dag>/dt and d<b^dag b^dag>/dt carry -i c coupling terms, "
                  "d<a^dag b>/dt is damped at (gamma + kappa)/2 and d<b^dag b>/dt is driven by kappa n_cav; "
                  "all four follow from the Heisenberg-Langevin equations")
ERRATA_EQUILIBRIUM = ("strong coupling at low temperature gives omega_eff < omega0 and log z_ratio > 0 "
                      "(the reduced state is more mixed than the canonical one)")


# ---------------------------------------------------------------- config

def parse_axis(key: str, raw) -> list[float]:
    """Grid axis from a number, a list, or {min, max, steps, scale}."""
    if isinstance(raw, bool):
        raise ConfigError(f"{key}: expected a number, list or range object")
    if isinstance(raw, (int, float)):
        return [float(raw)]
    if isinstance(raw, list):
        if not raw:
            raise ConfigError(f"{key}: grid is empty")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise ConfigError(f"{key}: grid entries must be numbers")
        return [float(v) for v in raw]
    if isinstance(raw, dict):
        extra = set(raw) - {"min", "max", "steps", "scale"}
        if extra:
            raise ConfigError(f"{key}: unknown range keys {sorted(extra)}")
        try:
            lo, hi, n = float(raw["min"]), float(raw["max"]), raw["steps"]
        except KeyError as e:
            raise ConfigError(f"{key}: range needs {e.args[0]!r}") from None
        scale = raw.get("scale", "lin")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError(f"{key}: steps must be a positive integer")
        if scale == "lin":
            return [float(v) for v in np.linspace(lo, hi, n)]
        if scale == "log":
            if not (lo > 0 and hi > 0):
                raise ConfigError(f"{key}: log scale needs positive bounds")
            return [float(v) for v in 10.0 ** np.linspace(math.log10(lo), math.log10(hi), n)]
        raise ConfigError(f"{key}: scale must be 'lin' or 'log'")
    raise ConfigError(f"{key}: expected a number, list or range object")


def _number(cfg: dict, key: str, positive=False, nonneg=False, allow_none=False):
    v = cfg[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be positive, got {v}")
    if nonneg and not v >= 0:
        raise ConfigError(f"{key}: must be non-negative, got {v}")
    return float(v)


def _int(cfg: dict, key: str, minimum: int = 0) -> int:
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{key}: expected an integer >= {minimum}, got {v!r}")
    return v


def _positive_axis(key: str, raw, nonneg=False) -> list[float]:
    vals = parse_axis(key, raw)
    for v in vals:
        if not math.isfinite(v) or (v < 0 if nonneg else v <= 0):
            raise ConfigError(f"{key}: value {v} out of range")
    return vals


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


GLOBAL_DEFAULTS = {"seed": 0, "workers": None, "out": None}


def load_config(command: "Command", path, overrides) -> dict:
    cfg = {**GLOBAL_DEFAULTS, **command.defaults}
    given = {}
    if path is not None:
        try:
            with open(path) as fh:
                given = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        if not isinstance(given, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in list(given.items()) + list(overrides):
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------- output

def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_bytes(header: list[str], rows) -> bytes:
    lines = [",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode("ascii")


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("ascii")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Output:
    """Collects emitted files in order and writes them atomically."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[tuple[str, bytes]] = []

    def add(self, name: str, data: bytes) -> None:
        self.files.append((name, data))

    def csv(self, name: str, header, rows) -> None:
        self.add(name, csv_bytes(list(header), rows))

    def json(self, name: str, obj) -> None:
        self.add(name, json_bytes(obj))

    def flush(self) -> list[dict]:
        inventory = []
        for name, data in self.files:
            _atomic_write(self.root / name, data)
            inventory.append({"name": name, "sha256": sha256(data), "bytes": len(data)})
        return inventory


def verify_manifest(out_dir) -> bool:
    """True when every inventoried file exists with the recorded hash."""
    root = Path(out_dir)
    manifest = json.loads((root / MANIFEST).read_text())
    return all(sha256((root / f["name"]).read_bytes()) == f["sha256"] for f in manifest["files"])


# ---------------------------------------------------------------- worker pool

def run_tasks(fn: Callable, tasks: list, workers: int) -> list:
    """Map fn over tasks; results always come back in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _guard(fn: Callable, task) -> tuple[str, object]:
    try:
        return "ok", fn(task)
    except QuenchError as e:
        return f"error: {type(e).__name__}: {e}", None
    except (FloatingPointError, OverflowError, ZeroDivisionError) as e:
        return f"error: {type(e).__name__}: {e}", None


# ---------------------------------------------------------------- equilibrium

def _equilibrium_task(task):
    t, wd, g, w0 = task
    r = equilibrium_report(OscillatorParams(w0), BathParams(t, Drude(g, wd)))
    return [r.q2, r.p2, r.omega_eff, r.z_ratio, r.log_z_ratio, r.s_ratio, r.delta]


def equilibrium_task(task):
    return _guard(_equilibrium_task, task)


def cmd_equilibrium(cfg: dict, out: Output, workers: int) -> dict:
    w0 = _number(cfg, "omega0", positive=True)
    ts = _positive_axis("T", cfg["T"])
    wds = _positive_axis("omega_d", cfg["omega_d"])
    gs = _positive_axis("gamma", cfg["gamma"])
    tasks = [(t, wd, g, w0) for g in gs for t in ts for wd in wds]
    results = run_tasks(equilibrium_task, tasks, workers)
    rows = [list(task[:3]) + (vals if vals is not None else [math.nan] * 7)
            for task, (_, vals) in zip(tasks, results)]
    out.csv("equilibrium.csv", ["T", "omega_d", "gamma", "q2", "p2", "omega_eff", "z_ratio",
                                "log_z_ratio", "s_ratio", "delta"], rows)
    return {"statuses": [s for s, _ in results], "errata": [ERRATA_EQUILIBRIUM]}


# ---------------------------------------------------------------- negativity

def _negativity_task(task):
    t, wd, g, c0, w0 = task
    sys_ = TwoModeSystem(OscillatorParams(w0), c0, BathParams(t, Drude(g, wd)))
    e_n = log_negativity(equilibrium_covariance(sys_))
    return [e_n, e_n == 0.0]


def negativity_task(task):
    return _guard(_negativity_task, task)


def cmd_negativity(cfg: dict, out: Output, workers: int) -> dict:
    w0 = _number(cfg, "omega0", positive=True)
    ts = _positive_axis("T", cfg["T"])
    wds = _positive_axis("omega_d", cfg["omega_d"])
    gs = _positive_axis("gamma", cfg["gamma"])
    c0s = _positive_axis("c0", cfg["c0"], nonneg=True)
    for c0 in c0s:
        if c0 >= w0**2:
            raise ConfigError(f"c0: value {c0} >= omega0^2 is unstable")
    tasks = [(t, wd, g, c0, w0) for c0 in c0s for g in gs for wd in wds for t in ts]
    results = run_tasks(negativity_task, tasks, workers)
    rows = [list(task[:4]) + (vals if vals is not None else [math.nan, False])
            for task, (_, vals) in zip(tasks, results)]
    out.csv("negativity.csv", ["T", "omega_d", "gamma", "c0", "e_n", "separable"], rows)
    return {"statuses": [s for s, _ in results], "errata": []}


# ---------------------------------------------------------------- cooling limits

def _cooling_task(task):
    wc, kappa, wm = task
    nm = n_m_langevin(kappa, wm)
    nl = n_min_nonmarkovian(Drude(kappa, wc), wm)
    ne = n_min_nonmarkovian(OhmicExp(kappa, wc), wm)
    return [nm, nl, ne, nl / nm, ne / nm]


def cooling_task(task):
    return _guard(_cooling_task, task)


def cmd_cooling_limits(cfg: dict, out: Output, workers: int) -> dict:
    wm = _number(cfg, "omega_m", positive=True)
    kappas = _positive_axis("kappa", cfg["kappa"])
    wcs = _positive_axis("omega_c", cfg["omega_c"])
    tasks = [(wc, k, wm) for k in kappas for wc in wcs]
    results = run_tasks(cooling_task, tasks, workers)
    rows = [[task[0], task[1]] + (vals if vals is not None else [math.nan] * 5)
            for task, (_, vals) in zip(tasks, results)]
    out.csv("cooling_limits.csv", ["omega_c", "kappa", "n_m", "n_nml", "n_nme", "ratio_nml", "ratio_nme"],
            rows)
    return {"statuses": [s for s, _ in results], "errata": [ERRATA_KERNEL]}


# ---------------------------------------------------------------- dynamics

def _dyn_params(cfg: dict, gamma: float) -> DynParams:
    kappa = _number(cfg, "kappa", positive=True, allow_none=True)
    try:
        return DynParams(omega_m=_number(cfg, "omega_m", positive=True), gamma=gamma,
                         kappa=gamma if kappa is None else kappa,
                         n_t=_number(cfg, "n_t", nonneg=True), n_cav=_number(cfg, "n_cav", nonneg=True))
    except DomainError as e:
        raise ConfigError(str(e)) from None


def _dt(cfg: dict, p: DynParams) -> float:
    dt = _number(cfg, "dt", positive=True, allow_none=True)
    dt = p.period / 2000.0 if dt is None else dt
    try:
        time_grid(1.0, dt, p)
    except DomainError as e:
        raise ConfigError(f"dt: {e}") from None
    return dt


def _pulse_values(cfg: dict, key: str, n: int | None, seed) -> list[float]:
    raw = cfg[key]
    if raw == "random":
        if n is None:
            raise ConfigError(f"{key}: 'random' needs n_segments")
        return [float(v) for v in np.random.default_rng(seed).uniform(0.0, 0.2, size=n)]
    if isinstance(raw, (int, float)) and not isinstance(raw, bool) and math.isfinite(raw):
        return [float(raw)] * (n or 1)
    if isinstance(raw, list) and raw and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                               and math.isfinite(v) for v in raw):
        if n is not None and len(raw) != n:
            raise ConfigError(f"{key}: expected {n} values, got {len(raw)}")
        return [float(v) for v in raw]
    raise ConfigError(f"{key}: expected a number, a list of numbers or 'random'")


def _trajectory_rows(traj, pulse):
    g = np.asarray(pulse(traj.times), dtype=float)
    return [[t, n, c] for t, n, c in zip(traj.times, traj.nbar, g)]


def _cool_task(task):
    p, values, t_f, dt, stride = task
    pulse = PiecewiseConstant.uniform(values, t_f)
    traj = integrate(thermal_initial(p.n_t, p.n_cav), p, pulse, t_f, dt, stride)
    return _trajectory_rows(traj, pulse), float(traj.nbar[-1])


def cool_task(task):
    return _guard(_cool_task, task)


def cmd_cool(cfg: dict, out: Output, workers: int) -> dict:
    gammas = _positive_axis("gamma", cfg["gamma"])
    t_f = _number(cfg, "t_f", positive=True)
    stride = _int(cfg, "stride", 1)
    values = _pulse_values(cfg, "g", None, cfg["seed"])
    tasks = []
    for g in gammas:
        p = _dyn_params(cfg, g)
        tasks.append((p, values, t_f, _dt(cfg, p), stride))
    results = run_tasks(cool_task, tasks, workers)
    summary = []
    for i, (task, (status, res)) in enumerate(zip(tasks, results)):
        rows, final = res if res is not None else ([], math.nan)
        out.csv(f"cool_{i:03d}.csv", ["t", "nbar", "g"], rows)
        summary.append([task[0].gamma, task[0].kappa, final])
    out.csv("cool_summary.csv", ["gamma", "kappa", "nbar_tf"], summary)
    return {"statuses": [s for s, _ in results], "errata": [ERRATA_MOMENTS]}


def _optimizer_config(cfg: dict, p: DynParams, seed: int) -> OptimizerConfig:
    window = cfg["window"]
    if not (isinstance(window, list) and len(window) == 2):
        raise ConfigError("window: expected [t_start, t_end]")
    g_max = _number(cfg, "g_max", positive=True, allow_none=True)
    try:
        return OptimizerConfig(
            n_segments=_int(cfg, "n_segments", 1), tau=_number(cfg, "tau", positive=True),
            epsilon=_number(cfg, "epsilon", positive=True), max_iters=_int(cfg, "max_iters", 0),
            t_f=_number(cfg, "t_f", positive=True), objective=cfg["objective"],
            window=tuple(float(v) for v in window), dt=_dt(cfg, p),
            g_max=math.inf if g_max is None else g_max, seed=seed,
            check_gradient=bool(cfg["check_gradient"]))
    except DomainError as e:
        raise ConfigError(str(e)) from None


def _optimize_task(task):
    p, oc, values, stride = task
    res = steepest_descent(PiecewiseConstant.uniform(values, oc.t_f), p, oc)
    traj = integrate(thermal_initial(p.n_t, p.n_cav), p, res.pulse, oc.t_f, oc.dt, stride)
    record = {
        "gamma": p.gamma, "kappa": p.kappa, "durations": list(res.pulse.durations),
        "values": list(res.pulse.values), "objective": res.objective_value,
        "initial_objective": res.initial_objective, "iterations": res.iterations,
        "converged": res.converged, "gradient_check": res.gradient_check,
        "objective_history": res.objective_history, "gradient_norm_history": res.gradient_norm_history,
    }
    return record, _trajectory_rows(traj, res.pulse)


def optimize_task(task):
    return _guard(_optimize_task, task)


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def cmd_optimize(cfg: dict, out: Output, workers: int) -> dict:
    gammas = _positive_axis("gamma", cfg["gamma"])
    stride = _int(cfg, "stride", 1)
    tasks = []
    for g, s in zip(gammas, _seeds(cfg["seed"], len(gammas))):
        p = _dyn_params(cfg, g)
        oc = _optimizer_config(cfg, p, s)
        tasks.append((p, oc, _pulse_values(cfg, "g_init", oc.n_segments, s), stride))
    results = run_tasks(optimize_task, tasks, workers)
    records, summary = [], []
    for i, (task, (status, res)) in enumerate(zip(tasks, results)):
        record, rows = res if res is not None else ({"gamma": task[0].gamma, "status": status}, [])
        records.append(record)
        out.csv(f"optimize_{i:03d}.csv", ["t", "nbar", "g"], rows)
        summary.append([task[0].gamma, task[0].kappa, record.get("initial_objective", math.nan),
                        record.get("objective", math.nan), record.get("iterations", -1),
                        record.get("converged", False)])
    out.csv("optimize_summary.csv", ["gamma", "kappa", "initial_objective", "objective", "iterations",
                                     "converged"], summary)
    out.json("optimize.json", records)
    return {"statuses": [s for s, _ in results], "errata": [ERRATA_MOMENTS]}


def _maintain_task(task):
    p, moments, t_switch, k, periods, dt = task
    _, nb = hold_trajectory(MomentState(moments, t_switch), p, k, periods, dt, t_switch)
    return [float(np.mean(nb)), float(np.max(nb) / nb[0])]


def maintain_task(task):
    return _guard(_maintain_task, task)


def cmd_maintain(cfg: dict, out: Output, workers: int) -> dict:
    g = _number(cfg, "gamma", positive=True)
    p = _dyn_params(cfg, g)
    seed = _seeds(cfg["seed"], 1)[0]
    oc = _optimizer_config(cfg, p, seed)
    ks = parse_axis("k", cfg["k"])
    periods = _number(cfg, "periods", positive=True)
    stride = _int(cfg, "stride", 1)
    res = steepest_descent(PiecewiseConstant.uniform(_pulse_values(cfg, "g_init", oc.n_segments, seed),
                                                     oc.t_f), p, oc)
    cool = integrate(thermal_initial(p.n_t, p.n_cav), p, res.pulse, oc.t_f, oc.dt)
    switch = cool.final
    tasks = [(p, switch.moments, oc.t_f, k, periods, oc.dt) for k in ks]
    results = run_tasks(maintain_task, tasks, workers)
    scan = [[k] + (v if v is not None else [math.nan, math.nan]) for k, (_, v) in zip(ks, results)]
    means = [row[1] for row in scan]
    best = int(np.nanargmin(means)) if not all(math.isnan(m) for m in means) else 0
    best_k, best_mean = ks[best], means[best]
    if cfg["refine"] and len(ks) > 1:
        order = np.argsort(ks)
        j = int(np.where(order == best)[0][0])
        a, b = ks[order[max(j - 1, 0)]], ks[order[min(j + 1, len(ks) - 1)]]
        r = optimize.minimize_scalar(lambda k: _maintain_task((p, switch.moments, oc.t_f, k, periods, oc.dt))[0],
                                     bounds=(a, b), method="bounded", options={"xatol": 1e-4})
        if r.fun < best_mean:
            best_k, best_mean = float(r.x), float(r.fun)
    # combined run: the cooling leg followed by the holding leg from the switch state
    hold = integrate(switch, p, Maintain(best_k, oc.t_f), periods * p.period, oc.dt, stride)
    rows = _trajectory_rows(_sub(cool, stride), res.pulse) + _trajectory_rows(_sub(hold, 1, skip_first=True),
                                                                               Maintain(best_k, oc.t_f))
    out.csv("maintain_scan.csv", ["k", "mean_nbar", "max_over_switch"], scan)
    out.csv("maintain.csv", ["t", "nbar", "g"], rows)
    out.json("maintain.json", {
        "gamma": p.gamma, "kappa": p.kappa, "t_switch": oc.t_f, "cool_values": list(res.pulse.values),
        "cool_durations": list(res.pulse.durations), "nbar_switch": float(cool.nbar[-1]),
        "k": best_k, "mean_nbar": best_mean, "cool_iterations": res.iterations,
    })
    return {"statuses": [s for s, _ in results], "errata": [ERRATA_MOMENTS]}


def _sub(traj, stride: int, skip_first: bool = False):
    idx = list(range(0, len(traj.times), stride))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    if skip_first:
        idx = idx[1:]
    return type(traj)(traj.times[idx], traj.states[idx], traj.params)


# ---------------------------------------------------------------- commands

@dataclass(frozen=True)
class Command:
    run: Callable
    defaults: dict


COMMANDS = {
    "equilibrium": Command(cmd_equilibrium, {
        "T": {"min": 0.1, "max": 10.0, "steps": 9, "scale": "log"},
        "omega_d": {"min": 0.1, "max": 100.0, "steps": 7, "scale": "log"},
        "gamma": [0.1], "omega0": 1.0}),
    "negativity": Command(cmd_negativity, {
        "T": {"min": 0.05, "max": 1.0, "steps": 20, "scale": "lin"},
        "omega_d": [0.1, 1.0, 10.0, 100.0], "gamma": [0.1, 0.05, 0.01, 0.005],
        "c0": [0.05, 0.1, 0.15, 0.2], "omega0": 1.0}),
    "cooling-limits": Command(cmd_cooling_limits, {
        "omega_c": {"min": 0.01, "max": 100.0, "steps": 41, "scale": "log"},
        "kappa": [1e-5], "omega_m": 1.0}),
    "cool": Command(cmd_cool, {
        "gamma": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1], "kappa": None, "n_t": 100.0, "n_cav": 0.0,
        "omega_m": 1.0, "t_f": T_SWITCH, "dt": None, "g": 0.1, "stride": 10}),
    "optimize": Command(cmd_optimize, {
        "gamma": [1e-6, 1e-5, 1e-4, 1e-3], "kappa": None, "n_t": 100.0, "n_cav": 0.0, "omega_m": 1.0,
        "t_f": T_SWITCH, "dt": None, "n_segments": 12, "tau": 30.0, "epsilon": 1e-8, "max_iters": 300,
        "objective": "terminal_nbar", "window": [0.0, T_SWITCH], "g_init": 0.01, "g_max": None,
        "check_gradient": True, "stride": 10}),
    "maintain": Command(cmd_maintain, {
        "gamma": 1e-6, "kappa": None, "n_t": 100.0, "n_cav": 0.0, "omega_m": 1.0, "t_f": T_SWITCH,
        "dt": None, "n_segments": 12, "tau": 30.0, "epsilon": 1e-8, "max_iters": 300,
        "objective": "terminal_nbar", "window": [0.0, T_SWITCH], "g_init": 0.01, "g_max": None,
        "check_gradient": True, "k": [0.02, 0.05, 0.1], "refine": False, "periods": 50.0, "stride": 10}),
}


def _workers(flag, cfg_value) -> int:
    for source, v in (("--workers", flag), ("workers", cfg_value), (ENV_WORKERS, os.environ.get(ENV_WORKERS))):
        if v is None:
            continue
        try:
            n = int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{source}: expected a positive integer, got {v!r}") from None
        if n < 1 or isinstance(v, bool):
            raise ConfigError(f"{source}: expected a positive integer, got {v!r}")
        return n
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quench", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"quench {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--workers", type=int, help=f"worker processes (default ${ENV_WORKERS} or 1)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (value parsed as JSON)")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = COMMANDS[args.command]
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    try:
        cfg = load_config(command, args.config, [parse_override(s) for s in args.set])
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = str(args.out)
        seed = cfg["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
        workers = _workers(args.workers, cfg["workers"])
        root = Path(cfg["out"] if cfg["out"] is not None else f"quench-{args.command}")
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"out: cannot create {root}: {e}") from None
        if not os.access(root, os.W_OK):
            raise ConfigError(f"out: {root} is not writable")
        out = Output(root)
        info = command.run(cfg, out, workers)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except QuenchError as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    inventory = out.flush()
    statuses = info["statuses"]
    resolved = {k: v for k, v in cfg.items() if k not in ("workers", "out")}
    manifest = {
        "tool": "quench", "version": __version__, "command": args.command, "config": resolved,
        "tasks": [{"index": i, "status": s} for i, s in enumerate(statuses)],
        "files": inventory, "errata": info["errata"],
    }
    _atomic_write(root / MANIFEST, json_bytes(manifest))
    finished = datetime.now(timezone.utc)
    _atomic_write(root / TIMING, json_bytes({
        "started": started.isoformat(), "finished": finished.isoformat(),
        "elapsed_s": time.perf_counter() - clock, "workers": workers,
    }))
    failed = sum(s != "ok" for s in statuses)
    if failed:
        print(f"{failed} of {len(statuses)} tasks failed; see {root / MANIFEST}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
