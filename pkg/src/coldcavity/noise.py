"""Linearized quadrature noise of the cavity output and the detection chain.

Fluctuations are linearized around a stable steady state with the orientation
frozen (valid for analysis frequencies well above ``gamma_p``).  Two ports
carry vacuum noise into the cavity: the coupling mirror and a lumped loss
port (window losses plus atomic absorption).  Spectra are in shot-noise
units: vacuum gives exactly 1.

Quadratures are ``x = da + da*`` and ``y = -i (da - da*)``; the local
oscillator phase ``theta`` selects ``cos(theta) x + sin(theta) y``, with
``theta = 0`` along the real axis of the (real) input drive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import DomainError, ModelParams
from .steady import STABLE, SteadyState, _atoms, _continue_branch, make_state, steady_intensities
from .trace import Trace


class UnstableStateError(ValueError):
    """Noise spectra are only defined around stable steady states; use the dynamics module otherwise."""


@dataclass(frozen=True)
class LinearizedCavity:
    steady: SteadyState
    drift: np.ndarray  # 2x2 complex, acts on (da, da*), units 1/s
    rate_mirror: float  # amplitude decay rate through the coupling mirror, 1/s
    rate_loss: float  # amplitude decay rate into the loss port, 1/s
    gamma_p: float = 0.0

    @property
    def quadrature_drift(self) -> np.ndarray:
        """Drift in the real ``(x, y)`` quadrature basis."""
        T = np.array([[1, 1], [-1j, 1j]])
        return (T @ self.drift @ np.linalg.inv(T)).real


def linearize(ss: SteadyState, params: ModelParams) -> LinearizedCavity:
    if ss.stability != STABLE:
        raise UnstableStateError(
            f"steady state is {ss.stability}; integrate it with coldcavity.dynamics instead")
    a = ss.alpha
    I = abs(a) ** 2
    _, phi_I, _, A, A_I, _ = _atoms(I, ss.p, params)
    D = params.kappa + A - 1j * ss.phi_cav
    D_I = A_I - 1j * phi_I
    tau = params.tau
    m11 = -(D + I * D_I) / tau
    m12 = -(a * a * D_I) / tau
    drift = np.array([[m11, m12], [np.conj(m12), np.conj(m11)]])
    return LinearizedCavity(
        steady=ss,
        drift=drift,
        rate_mirror=params.gamma_cav / tau,
        rate_loss=(params.loss_rt / 2 + float(A)) / tau,
        gamma_p=params.gamma_p if params.pumping_on else 0.0,
    )


def output_covariance(lin: LinearizedCavity, Omega: float) -> np.ndarray:
    """Real symmetric 2x2 spectral covariance of the output quadratures."""
    if Omega < 0:
        raise DomainError("Omega must be >= 0")
    J = lin.quadrature_drift
    G = np.linalg.inv(-1j * Omega * np.eye(2) - J)
    km, kl = lin.rate_mirror, lin.rate_loss
    T_m = np.eye(2) - 2 * km * G
    T_l = -2 * math.sqrt(km * kl) * G
    S = T_m @ T_m.conj().T + T_l @ T_l.conj().T
    S = S.real
    return 0.5 * (S + S.T)


def quad_spectrum(lin: LinearizedCavity, Omega: float, theta):
    """Noise of the ``theta`` quadrature at analysis frequency ``Omega`` (rad/s)."""
    S = output_covariance(lin, Omega)
    c, s = np.cos(theta), np.sin(theta)
    return S[0, 0] * c * c + 2 * S[0, 1] * c * s + S[1, 1] * s * s


def spectrum_extrema(lin: LinearizedCavity, Omega: float) -> tuple[float, float, float]:
    """``(S_min, S_max, theta_min)`` from the eigen-decomposition of the covariance.

    ``theta_min`` lies in ``[0, pi)``; it is 0 when the spectrum does not depend
    on the phase.
    """
    S = output_covariance(lin, Omega)
    w, v = np.linalg.eigh(S)
    if w[1] - w[0] <= 1e-12 * max(1.0, w[1]):
        return float(w[0]), float(w[1]), 0.0
    th = math.atan2(v[1, 0], v[0, 0]) % math.pi
    return float(w[0]), float(w[1]), th


@dataclass(frozen=True)
class NoiseSpectrum:
    Omega: float
    theta: np.ndarray
    S: np.ndarray
    S_min: float
    S_max: float
    theta_min: float
    frozen_p_warning: bool = False


def noise_spectrum(lin: LinearizedCavity, Omega: float, n_theta: int = 360) -> NoiseSpectrum:
    theta = np.linspace(0, math.pi, n_theta, endpoint=False)
    smin, smax, th = spectrum_extrema(lin, Omega)
    warn = lin.gamma_p > 0 and Omega < 10 * lin.gamma_p
    return NoiseSpectrum(Omega, theta, quad_spectrum(lin, Omega, theta), smin, smax, th, warn)


# --- detection chain -------------------------------------------------------

@dataclass(frozen=True)
class DetectionChain:
    eta_pd: float = 0.94
    eta_hom: float = 0.875
    cmrr_db: float = 20.0

    def __post_init__(self):
        for name in ("eta_pd", "eta_hom"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise DomainError(f"{name} must lie in (0, 1]")

    @property
    def eta(self) -> float:
        return self.eta_pd * self.eta_hom


def apply_detection(S, chain: DetectionChain):
    """Measured noise after a detection efficiency ``eta``: ``1 + eta (S - 1)``."""
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise DomainError("noise power must be >= 0")
    out = 1 + chain.eta * (S - 1)
    return float(out) if out.ndim == 0 else out


def invert_detection(S_measured, chain: DetectionChain):
    """Infer the noise before detection losses; rejects ``S_measured < 1 - eta``."""
    S_measured = np.asarray(S_measured, dtype=float)
    if np.any(S_measured < 1 - chain.eta):
        raise DomainError("measured noise below 1 - eta is unphysical")
    out = 1 + (S_measured - 1) / chain.eta
    return float(out) if out.ndim == 0 else out


# --- homodyne trace synthesis ----------------------------------------------

@dataclass(frozen=True)
class LOScan:
    f_scan: float = 1e3
    amplitude: float = math.pi / 2
    offset: float = math.pi / 2

    def phase(self, t):
        return self.offset + self.amplitude * np.sin(2 * math.pi * self.f_scan * t)


@dataclass(frozen=True)
class HomodyneTrace:
    """Synthesized noise-power record during the atom-number decay.

    ``samples``, ``s_min`` and ``s_max`` already include the detection chain.
    ``flagged`` marks samples whose occupied branch is unstable (left NaN).
    """

    time: np.ndarray
    C: np.ndarray
    I: np.ndarray
    samples: np.ndarray
    s_min: np.ndarray
    s_max: np.ndarray
    resonant: np.ndarray
    lower_branch: np.ndarray
    flagged: np.ndarray
    switch_times: list = field(default_factory=list)

    def trace(self, which: str = "samples") -> Trace:
        x = getattr(self, which)
        if np.any(self.flagged):
            raise ValueError("trace contains flagged (unstable) samples")
        dt = float(self.time[1] - self.time[0])
        return Trace(float(self.time[0]), dt, x, "noise-power-linear")


OFF_RESONANCE_WIDTHS = 10.0


def synthesize_homodyne_trace(I_in: float, C_0: float, T_decay: float, theta: float, Omega: float,
                              params: ModelParams, lo: LOScan = LOScan(), chain: DetectionChain = DetectionChain(),
                              duration: float = 30e-3, dt: float = 20e-6,
                              off_resonance: float = OFF_RESONANCE_WIDTHS) -> HomodyneTrace:
    """Noise at fixed cavity length while ``C(t) = C_0 exp(-t / T_decay)`` scans the resonance.

    The occupied steady state is followed adiabatically along ``C(t)``; where
    its round-trip detuning exceeds ``off_resonance`` cavity half-widths the
    probe is reflected and the sample is set to shot noise.
    """
    if T_decay <= 0 or duration <= 0 or dt <= 0:
        raise DomainError("T_decay, duration and dt must be positive")
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    C = C_0 * np.exp(-t / T_decay)
    phi_0 = theta * params.gamma_cav
    th_lo = lo.phase(t)
    out = np.ones(n)
    smin = np.ones(n)
    smax = np.ones(n)
    I_occ = np.zeros(n)
    resonant = np.zeros(n, bool)
    flagged = np.zeros(n, bool)
    lower = np.zeros(n, bool)
    switches = []
    prev_I = None
    k = 0
    switched = False
    for j in range(n):
        pp = replace(params, C=float(C[j]))
        Is = steady_intensities(I_in, phi_0, pp)
        sts = [make_state(x, I_in, phi_0, pp) for x in Is]
        stable = [i for i, s in enumerate(sts) if s.stability == STABLE]
        if prev_I is None:
            k = stable[0] if stable else 0
        else:
            c = _continue_branch(prev_I, k, Is)
            if c is not None and sts[c].stability == STABLE:
                k = c
            elif stable:
                ref = prev_I[k]
                k = min(stable, key=lambda i: abs(Is[i] - ref))
                switches.append(float(t[j]))
                switched = True
            else:
                k = c if c is not None else 0
        prev_I = Is
        ss = sts[k]
        I_occ[j] = ss.I
        lower[j] = not switched
        _, _, _, A, _, _ = _atoms(ss.I, ss.p, pp)
        width = pp.kappa + float(A)
        if abs(ss.phi_cav) > off_resonance * width:
            continue
        resonant[j] = True
        if ss.stability != STABLE:
            flagged[j] = True
            out[j] = smin[j] = smax[j] = np.nan
            continue
        lin = linearize(ss, pp)
        lo_min, lo_max, _ = spectrum_extrema(lin, Omega)
        out[j] = apply_detection(max(quad_spectrum(lin, Omega, th_lo[j]), 0.0), chain)
        smin[j] = apply_detection(lo_min, chain)
        smax[j] = apply_detection(lo_max, chain)
    return HomodyneTrace(t, C, I_occ, out, smin, smax, resonant, lower, flagged, switches)
