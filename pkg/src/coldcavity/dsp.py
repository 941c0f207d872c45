"""Post-detection signal processing: videofilter model, reconstruction, dB conversion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .trace import Trace


@dataclass(frozen=True)
class FilterSpec:
    f_c: float
    kind: str = "first-order-lowpass"
    domain: str = "dB"

    def __post_init__(self):
        if not self.f_c > 0:
            raise ValueError("f_c must be > 0")
        if self.kind != "first-order-lowpass":
            raise ValueError(f"unsupported filter kind {self.kind!r}")
        if self.domain not in ("linear-power", "dB"):
            raise ValueError(f"unknown filter domain {self.domain!r}")


def _pole(f_c: float, dt: float) -> float:
    if not f_c > 0:
        raise ValueError("f_c must be > 0")
    if f_c * dt >= 0.5:
        raise ValueError("f_c * dt must be < 0.5")
    return 1.0 - math.exp(-2 * math.pi * f_c * dt)


def first_order_lowpass(trace: Trace, f_c: float) -> Trace:
    """Discrete single-pole RC: ``y[n] = y[n-1] + a (x[n] - y[n-1])``, ``y[0] = x[0]``."""
    a = _pole(f_c, trace.dt)
    x = trace.samples
    if len(x) == 0:
        return trace
    zi = np.array([(1 - a) * x[0]])
    y, _ = lfilter([a], [1, -(1 - a)], x, zi=zi)
    return trace.with_samples(y)


def lowpass_response(freqs, f_c: float, dt: float) -> np.ndarray:
    """Complex frequency response of :func:`first_order_lowpass` at ``freqs`` (Hz)."""
    a = _pole(f_c, dt)
    z = np.exp(-2j * np.pi * np.asarray(freqs) * dt)
    return a / (1 - (1 - a) * z)


def reconstruct(trace: Trace, f_c: float, gain_cap: float = 100.0) -> Trace:
    """Undo a first-order videofilter by division in the discrete Fourier domain.

    A finite record is not periodic, and the jump at the wrap-around would be
    amplified by the inverse response.  The record is therefore first made
    circularly consistent: its spectrum is replaced by that of the circular
    filter applied to the exact sample-domain preimage.  Dividing by the
    response with the inverse gain clamped at ``gain_cap`` (phase kept) then
    leaves the preimage untouched wherever the cap is inactive.
    """
    if not gain_cap > 1:
        raise ValueError("gain_cap must be > 1")
    a = _pole(f_c, trace.dt)
    y = trace.samples
    n = len(y)
    if n < 2:
        return trace
    pre = np.empty(n)
    pre[0] = y[0]
    pre[1:] = (y[1:] - (1 - a) * y[:-1]) / a
    base = pre[0]
    f = np.fft.rfftfreq(n, trace.dt)
    H = lowpass_response(f, f_c, trace.dt)
    Y = np.fft.rfft(pre - base) * H
    inv = 1.0 / H
    mag = np.abs(inv)
    inv = np.where(mag > gain_cap, inv * (gain_cap / mag), inv)
    x = np.fft.irfft(Y * inv, n) + base
    return trace.with_samples(x)


def db_to_power(trace: Trace) -> Trace:
    if trace.unit != "noise-power-dB":
        raise ValueError(f"expected a dB trace, got {trace.unit!r}")
    return trace.with_samples(10.0 ** (trace.samples / 10.0), "noise-power-linear")


def power_to_db(trace: Trace) -> Trace:
    if trace.unit != "noise-power-linear":
        raise ValueError(f"expected a linear power trace, got {trace.unit!r}")
    if np.any(trace.samples <= 0):
        raise ValueError("power_to_db needs strictly positive samples")
    return trace.with_samples(10.0 * np.log10(trace.samples), "noise-power-dB")


def modulated_noise(S_depth: float, f_mod: float, duration: float, dt: float) -> Trace:
    """Sinusoidal noise power between ``S_depth`` and ``1 / S_depth``.

    The maximum saturates the uncertainty product, ``S_min * S_max = 1``.
    """
    if not 0 < S_depth <= 1:
        raise ValueError("S_depth must lie in (0, 1]")
    hi = 1.0 / S_depth
    mid, amp = 0.5 * (hi + S_depth), 0.5 * (hi - S_depth)
    t = np.arange(int(round(duration / dt))) * dt
    return Trace(0.0, dt, mid + amp * np.sin(2 * np.pi * f_mod * t), "noise-power-linear")


@dataclass(frozen=True)
class VideofilterReport:
    displayed_min_dB_filtered: float
    recovered_min_power: float
    true_min_power: float
    settle_time: float


def videofilter_artifact_demo(S_depth: float = 0.5, f_mod: float = 1e3, f_c_video: float = 300.0,
                              f_c_numeric: float = 1e3, duration: float = 50e-3, dt: float = 1e-6,
                              gain_cap: float = 100.0) -> VideofilterReport:
    """Compare the analyzer's dB-domain videofilter with the numerical fix.

    Pipeline A: ``power_to_db`` then the videofilter (what the display shows).
    Pipeline B: reconstruct the filtered dB record, convert to power and
    apply a numeric low-pass at ``f_c_numeric``.  Minima are taken after the
    filters have settled (five time constants of the slowest one).
    """
    if not 0 < S_depth <= 1:
        raise ValueError("S_depth must lie in (0, 1]")
    if f_mod <= 0 or f_c_video <= 0 or f_c_numeric <= 0:
        raise ValueError("frequencies must be positive")
    S = modulated_noise(S_depth, f_mod, duration, dt)
    shown = first_order_lowpass(power_to_db(S), f_c_video)
    recovered = first_order_lowpass(db_to_power(reconstruct(shown, f_c_video, gain_cap)), f_c_numeric)
    settle = 5.0 / (2 * math.pi * min(f_c_video, f_c_numeric))
    k = int(math.ceil(settle / dt))
    if k >= len(S):
        raise ValueError("duration too short for the filters to settle")
    return VideofilterReport(
        displayed_min_dB_filtered=float(shown.samples[k:].min()),
        recovered_min_power=float(recovered.samples[k:].min()),
        true_min_power=float(S.samples.min()),
        settle_time=settle,
    )
