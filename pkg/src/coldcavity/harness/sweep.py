"""Parameter sweeps over up to three axes, fanned out over a process pool.

Rows come back in grid order (first axis slowest) whatever the worker count,
so the written table is byte-identical for 1 or N workers.
"""
from __future__ import annotations

import itertools
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from ..dynamics import detect_oscillations, integrate
from ..model import CavityState, DomainError, DriveSpec, ModelParams
from ..noise import UnstableStateError, linearize, spectrum_extrema
from ..steady import OSCILLATORY, STABLE, NoThreshold, bistability_threshold, solve_steady
from .table import ResultTable

WORKERS_ENV = "COLDCAVITY_WORKERS"
MAX_AXES = 3

MONOSTABLE, BISTABLE, OSCILLATING = "monostable", "bistable", "oscillatory"

_MODEL_AXES = {f.name for f in fields(ModelParams) if f.type in ("float", float)}
AXIS_NAMES = _MODEL_AXES | {"I_in", "I_in_rel", "theta", "omega_mhz"}


def parse_range(spec: str) -> np.ndarray:
    """``"start:stop:n"`` -> ``n`` evenly spaced values, ends included."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"range {spec!r} must look like start:stop:n")
    a, b = float(parts[0]), float(parts[1])
    n = int(parts[2])
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"bad range {spec!r}")
    if n == 1:
        return np.array([a])
    return np.linspace(a, b, n)


def parse_axes(spec: str) -> list[tuple[str, np.ndarray]]:
    """``"C=0:400:9; I_in_rel=0.5:3:11"`` -> list of ``(name, values)``."""
    axes = []
    for item in filter(None, (s.strip() for s in re.split(r"[;,]", spec))):
        name, _, rng = item.partition("=")
        name = name.strip()
        if name not in AXIS_NAMES:
            raise ValueError(f"unknown sweep axis {name!r}")
        axes.append((name, parse_range(rng.strip())))
    if not 1 <= len(axes) <= MAX_AXES:
        raise ValueError(f"a sweep needs 1 to {MAX_AXES} axes, got {len(axes)}")
    if len({a for a, _ in axes}) != len(axes):
        raise ValueError("duplicate sweep axis")
    if "I_in" in dict(axes) and "I_in_rel" in dict(axes):
        raise ValueError("I_in and I_in_rel are mutually exclusive")
    return axes


def default_workers() -> int:
    v = os.environ.get(WORKERS_ENV)
    if v:
        return max(1, int(v))
    return os.cpu_count() or 1


# --- per-point kernels -------------------------------------------------------

def _resolve(point: dict, base: dict):
    model = ModelParams(**{**base["model"], **{k: v for k, v in point.items() if k in _MODEL_AXES}})
    try:
        thr = bistability_threshold(model)
    except NoThreshold:
        thr = math.nan
    if "I_in" in point:
        I_in = point["I_in"]
    elif "I_in_rel" in point:
        I_in = point["I_in_rel"] * thr
    else:
        I_in = base["I_in"]
    theta = point.get("theta", base["theta"])
    omega = point.get("omega_mhz", base["omega_mhz"])
    return model, I_in, thr, theta, omega


def _theta_window(model: ModelParams) -> np.ndarray:
    # the resonance moves between -phi_atoms/gamma_cav and 0; phi_atoms <= 2 phi_L
    reach = 2 * abs(model.phi_linear) / model.gamma_cav
    lo = -reach - 5 if model.delta_a >= 0 else -5
    hi = 5 if model.delta_a >= 0 else reach + 5
    return lo, hi


def classify_point(model: ModelParams, I_in: float, thr: float, theta_step: float, theta=None) -> str:
    """Phase of one parameter point, scanning the detuning unless ``theta`` is fixed.

    Without pumping the field-only system cannot undergo a Hopf bifurcation, so
    bistability is read off the threshold directly.  A detuning with an
    oscillatory-unstable state, or with no stable state at all, makes the point
    oscillatory.
    """
    if not model.pumping_on and theta is None:
        return BISTABLE if math.isfinite(thr) and I_in > thr else MONOSTABLE
    if theta is None:
        lo, hi = _theta_window(model)
        grid = np.arange(lo, hi + theta_step / 2, theta_step)
    else:
        grid = [theta]
    phase = MONOSTABLE
    for th in grid:
        sts = solve_steady(I_in, th * model.gamma_cav, model)
        if any(s.stability == OSCILLATORY for s in sts) or not any(s.stability == STABLE for s in sts):
            return OSCILLATING
        if sum(s.stability == STABLE for s in sts) >= 2:
            phase = BISTABLE
    return phase


def _kernel_steady(model, I_in, thr, theta, omega, base, point):
    th = theta if "theta" in point else None
    return {"phase": classify_point(model, I_in, thr, base["theta_step"], th)}


def _kernel_oscillation(model, I_in, thr, theta, omega, base, point):
    g = model.gamma_cav
    sts = solve_steady(I_in, theta * g, model)
    s = sts[0]
    # kick off the fixed point so an unstable state is left quickly
    start = CavityState(s.alpha * 1.01, min(s.p * 1.01, 1.0))
    T = base["t_span"]
    traj = integrate(start, DriveSpec.from_intensity(I_in, phi_0=theta * g), model, T, T / 20000)
    rep = detect_oscillations(traj.trace(), 0.2 * T)
    phase = OSCILLATING if rep.oscillating else (
        BISTABLE if sum(x.stability == STABLE for x in sts) >= 2 else MONOSTABLE)
    return {"phase": phase, "amplitude": rep.amplitude, "frequency": rep.frequency}


def _kernel_smin(model, I_in, thr, theta, omega, base, point):
    sts = solve_steady(I_in, theta * model.gamma_cav, model)
    best = (math.nan, math.nan)
    for s in sts:
        try:
            lin = linearize(s, model)
        except UnstableStateError:
            continue
        smin, smax, _ = spectrum_extrema(lin, 2 * math.pi * omega * 1e6)
        if not smin >= best[0]:
            best = (smin, smax)
    stable = sum(s.stability == STABLE for s in sts)
    phase = OSCILLATING if any(s.stability == OSCILLATORY for s in sts) or not stable else (
        BISTABLE if stable >= 2 else MONOSTABLE)
    return {"phase": phase, "S_min": best[0], "S_max": best[1]}


KERNELS = {
    "steady": (_kernel_steady, []),
    "oscillation": (_kernel_oscillation, ["amplitude", "frequency"]),
    "smin": (_kernel_smin, ["S_min", "S_max"]),
}


def run_point(args):
    """Evaluate one grid point; failures land in the ``error`` column."""
    kernel, point, base = args
    fn, extra = KERNELS[kernel]
    out = {"I_in_abs": math.nan, "threshold": math.nan, "phase": "", "error": ""}
    out.update({k: math.nan for k in extra})
    try:
        model, I_in, thr, theta, omega = _resolve(point, base)
        out["I_in_abs"] = I_in
        out["threshold"] = thr
        if not math.isfinite(I_in):
            # relative drive with no threshold: the point is monostable at any power
            out["phase"] = MONOSTABLE
            return out
        out.update(fn(model, I_in, thr, theta, omega, base, point))
    except (DomainError, ValueError, ArithmeticError, RuntimeError) as e:
        out["error"] = f"{type(e).__name__}: {e}".replace("\n", " ")
    return out


def sweep(axes, kernel: str, model: ModelParams, *, I_in: float = 1.0, theta: float = 0.0,
          omega_mhz: float = 5.0, theta_step: float = 0.1, t_span: float = 1e-3,
          workers: int | None = None, max_points: int = 10000) -> ResultTable:
    """Evaluate ``kernel`` on the Cartesian grid of ``axes``.

    ``axes`` is a list of ``(name, values)``; values not swept come from the
    keyword defaults and ``model``.
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    if isinstance(axes, str):
        axes = parse_axes(axes)
    names = [a for a, _ in axes]
    points = [dict(zip(names, map(float, vals))) for vals in itertools.product(*(v for _, v in axes))]
    if len(points) > max_points:
        raise ValueError(f"sweep has {len(points)} points, limit is {max_points}")
    base = {"model": {f.name: getattr(model, f.name) for f in fields(ModelParams)},
            "I_in": I_in, "theta": theta, "omega_mhz": omega_mhz,
            "theta_step": theta_step, "t_span": t_span}
    jobs = [(kernel, p, base) for p in points]
    workers = default_workers() if not workers else workers
    if workers == 1:
        results = [run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    extra = KERNELS[kernel][1]
    cols = names + ["I_in_abs", "threshold", "phase"] + extra + ["error"]
    table = ResultTable(cols)
    for p, r in zip(points, results):
        row = [p[n] for n in names] + [r["I_in_abs"], r["threshold"], r["phase"]] + [r[k] for k in extra] + [r["error"]]
        table.add(*row)
    return table
