"""Time integration, dynamic scans and limit-cycle detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel
from .model import CavityState, DriveSpec, ModelParams
from .trace import Trace

# oscillation detection constants
AMPLITUDE_FRACTION = 0.05
FREQ_AGREEMENT = 0.20


class IntegrationError(RuntimeError):
    """Integration stopped early; ``last_state`` and ``last_time`` hold the last good point."""

    def __init__(self, msg, last_time, last_state):
        super().__init__(msg)
        self.last_time = last_time
        self.last_state = last_state


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution of the rate equations."""

    t0: float
    dt: float
    alpha: np.ndarray
    p: np.ndarray
    steps: int = 0

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.p))

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2

    def trace(self, what: str = "intensity") -> Trace:
        if what == "intensity":
            return Trace(self.t0, self.dt, self.intensity, "intensity")
        if what == "p":
            return Trace(self.t0, self.dt, self.p, "intensity")
        raise ValueError(what)

    def state(self, i: int) -> CavityState:
        return CavityState(complex(self.alpha[i]), float(self.p[i]))


def max_step(params: ModelParams) -> float:
    """Step ceiling: a tenth of the cavity amplitude decay time."""
    return 0.1 * params.tau / (2 * params.gamma_cav)


def integrate(initial: CavityState, drive: DriveSpec, params: ModelParams, t_span: float,
              dt_out: float | None = None, tol: float = 1e-8, *, fixed_step: float | None = None,
              max_steps: int = 10**9) -> Trajectory:
    """Integrate the rate equations over ``[0, t_span]``.

    Adaptive Dormand-Prince 5(4) with per-step error below ``tol`` relative
    (absolute floor ``tol`` times the larger of the empty-cavity resonant
    amplitude, the initial amplitude and 1e-3 for the field, ``tol`` for the
    orientation).  The dense output is sampled every ``dt_out`` seconds.  Passing ``fixed_step`` disables step control.
    """
    if not t_span > 0:
        raise ValueError("t_span must be positive")
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-12, 1e-3]")
    h_max = max_step(params)
    if dt_out is None:
        dt_out = h_max
    n = int(round(t_span / dt_out)) + 1
    t_out = np.arange(n) * dt_out
    par = _kernel.pack(params, drive)
    # field scale for the absolute tolerance, floored at 1e-3 saturation amplitudes
    # so vanishing drives do not make the error norm degenerate
    a_scale = max(params.t_mirror * drive.alpha_in / params.kappa, abs(initial.alpha), 1e-3)
    atol = np.array([tol * a_scale, tol * a_scale, tol])
    y0 = np.array([initial.alpha.real, initial.alpha.imag, initial.p], dtype=float)
    adaptive = fixed_step is None
    h_fixed = 0.0 if adaptive else float(fixed_step)
    samples, status, steps, t_last, y_last = _kernel.dopri_integrate(
        y0, 0.0, t_out, par, tol, atol, h_max, 1e-12 * h_max, max_steps, adaptive, h_fixed)
    if status != _kernel.OK:
        why = "step-size underflow" if status == _kernel.STEP_UNDERFLOW else "step budget exhausted"
        raise IntegrationError(f"{why} at t={t_last:.6g} s", t_last,
                               CavityState(complex(y_last[0], y_last[1]), float(y_last[2])))
    return Trajectory(0.0, dt_out, samples[:, 0] + 1j * samples[:, 1], samples[:, 2].copy(), steps)


# --- oscillation detection -------------------------------------------------

@dataclass(frozen=True)
class OscillationReport:
    oscillating: bool
    amplitude: float
    frequency: float
    window: tuple
    freq_crossings: float = 0.0
    freq_fft: float = 0.0


def detect_oscillations(trace: Trace, window: float | None = None, start: float | None = None) -> OscillationReport:
    """Peak-to-peak amplitude and dominant frequency of a trace window.

    The window defaults to the last ``window`` seconds (whole trace when
    omitted).  Oscillating means peak-to-peak above 5% of the window mean and
    zero-crossing and DFT-peak frequencies agreeing within 20%.
    """
    if window is None:
        window = trace.duration
    if window > trace.duration + 0.5 * trace.dt:
        raise ValueError("window exceeds trace")
    if start is None:
        start = trace.t0 + trace.duration - window
    w = trace.window(start, min(window, trace.duration - (start - trace.t0)))
    x = w.samples
    mean = float(np.mean(x))
    y = x - mean
    p2p = float(np.ptp(x))
    span = (w.t0, w.t0 + w.duration)
    if p2p == 0:
        return OscillationReport(False, 0.0, 0.0, span)
    s = np.signbit(y)
    ups = np.nonzero(s[:-1] & ~s[1:])[0]
    if len(ups) >= 2:
        # interpolate the upward crossing times
        tc = ups + y[ups] / (y[ups] - y[ups + 1])
        f_zc = (len(tc) - 1) / ((tc[-1] - tc[0]) * w.dt)
    else:
        f_zc = 0.0
    spec = np.abs(np.fft.rfft(y * np.hanning(len(y))))
    freqs = np.fft.rfftfreq(len(y), w.dt)
    k = int(np.argmax(spec[1:])) + 1 if len(spec) > 1 else 0
    if 1 <= k < len(spec) - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        shift = 0.5 * (a - c) / (a - 2 * b + c) if (a - 2 * b + c) != 0 else 0.0
    else:
        shift = 0.0
    f_fft = float((k + shift) * freqs[1]) if k else 0.0
    agree = f_zc > 0 and f_fft > 0 and abs(f_zc - f_fft) <= FREQ_AGREEMENT * max(f_zc, f_fft)
    big = abs(mean) > 0 and p2p > AMPLITUDE_FRACTION * abs(mean)
    osc = bool(agree and big)
    return OscillationReport(osc, p2p, f_zc if osc else 0.0, span, f_zc, f_fft)


# --- scans ---------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    """Transmitted intensity along a dynamic scan, with the swept coordinate."""

    trace: Trace
    theta: np.ndarray
    C: np.ndarray
    p: np.ndarray


def scan_cavity_dynamic(I_in: float, theta_start: float, theta_stop: float, params: ModelParams,
                        scan_time: float = 1e-3, dt_out: float = 1e-8, tol: float = 1e-8,
                        initial: CavityState | None = None) -> ScanResult:
    """Ramp the cavity detuning linearly from ``theta_start`` to ``theta_stop``.

    Detunings are in cavity linewidths.  The field starts from the steady
    state at ``theta_start`` unless ``initial`` is given.
    """
    g = params.gamma_cav
    rate = (theta_stop - theta_start) * g / scan_time
    drive = DriveSpec(alpha_in=math.sqrt(I_in), phi_0=theta_start * g, phi0_rate=rate)
    if initial is None:
        initial = _start_state(I_in, theta_start * g, params)
    traj = integrate(initial, drive, params, scan_time, dt_out, tol)
    th = theta_start + (theta_stop - theta_start) * traj.time / scan_time
    return ScanResult(traj.trace(), th, np.full_like(th, params.C), traj.p)


def scan_atom_decay(I_in: float, theta: float, C_0: float, T_decay: float, params: ModelParams,
                    duration: float | None = None, dt_out: float = 1e-7, tol: float = 1e-8) -> ScanResult:
    """Fixed cavity length while the cooperativity decays as ``C_0 exp(-t / T_decay)``."""
    pp = replace(params, C=C_0)
    if duration is None:
        duration = 3 * T_decay
    drive = DriveSpec(alpha_in=math.sqrt(I_in), phi_0=theta * pp.gamma_cav, T_decay=T_decay)
    initial = _start_state(I_in, theta * pp.gamma_cav, pp)
    traj = integrate(initial, drive, pp, duration, dt_out, tol)
    C = C_0 * np.exp(-traj.time / T_decay)
    return ScanResult(traj.trace(), np.full_like(C, theta), C, traj.p)


def _start_state(I_in, phi_0, params):
    from .steady import solve_steady

    sts = solve_steady(I_in, phi_0, params)
    s = sts[0]
    return CavityState(s.alpha, s.p)


def oscillation_map(result: ScanResult, window: float, step: float | None = None):
    """Run :func:`detect_oscillations` on consecutive windows along a scan.

    Returns ``(theta_centres, reports)``.
    """
    tr = result.trace
    step = window if step is None else step
    out_t, reps = [], []
    start = tr.t0
    while start + window <= tr.t0 + tr.duration + 1e-15:
        rep = detect_oscillations(tr, window, start)
        i = int(round((start + window / 2 - tr.t0) / tr.dt))
        out_t.append(result.theta[min(i, len(result.theta) - 1)])
        reps.append(rep)
        start += step
    return np.array(out_t), reps
