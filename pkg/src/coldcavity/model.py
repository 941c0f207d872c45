"""Semiclassical model of a driven cavity filled with cold, optically pumped atoms.

Intensities are measured in units of the atomic saturation intensity, so the
saturated two-level dispersion reads ``1 / (1 + delta_a**2 + I)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# 0.5 m round trip in a 25 cm linear cavity
DEFAULT_TAU = 0.5 / 299792458.0


class DomainError(ValueError):
    """Raised when an argument lies outside the physical domain of the model."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical constants of the cavity + atoms system.

    ``gamma_cav`` is not stored: it is always ``t_mirror**2 / 2``.
    """

    tau: float = DEFAULT_TAU
    t_mirror: float = math.sqrt(0.1)
    loss_rt: float = 0.0
    C: float = 400.0
    delta_a: float = 44.0
    Gamma: float = 2 * math.pi * 5.2e6
    gamma_p: float = 1.0e4
    beta: float = 2.5e3
    absorption_on: bool = False
    pumping_on: bool = True

    def __post_init__(self):
        checks = [
            (self.tau > 0, "tau must be > 0"),
            (0 < self.t_mirror < 1, "t_mirror must lie in (0, 1)"),
            (0 <= self.loss_rt < 1, "loss_rt must lie in [0, 1)"),
            (self.C >= 0, "C must be >= 0"),
            (self.Gamma > 0, "Gamma must be > 0"),
            (self.gamma_p >= 0, "gamma_p must be >= 0"),
            (self.beta >= 0, "beta must be >= 0"),
            (math.isfinite(self.delta_a), "delta_a must be finite"),
        ]
        for ok, msg in checks:
            if not ok:
                raise DomainError(msg)
        lw = self.linewidth_hz
        if not (math.isfinite(lw) and lw > 0):
            raise DomainError("cavity linewidth must be finite and positive")

    @property
    def gamma_cav(self) -> float:
        return self.t_mirror**2 / 2

    @property
    def kappa(self) -> float:
        """Empty-cavity amplitude decay per round trip, mirror plus windows."""
        return self.gamma_cav + self.loss_rt / 2

    @property
    def linewidth_hz(self) -> float:
        """Cavity linewidth gamma_cav / (2 pi tau) in Hz."""
        return self.gamma_cav / (2 * math.pi * self.tau)

    @property
    def phi_linear(self) -> float:
        """Linear atomic round-trip phase at zero intensity and zero orientation."""
        return 2 * self.C * self.gamma_cav * self.delta_a / (1 + self.delta_a**2)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class CavityState:
    alpha: complex
    p: float = 0.0

    @property
    def intensity(self) -> float:
        return abs(self.alpha) ** 2


@dataclass(frozen=True)
class DriveSpec:
    """Input drive and optional schedules.

    ``phi_0`` is the empty-cavity round-trip phase at t = 0; it is ramped
    linearly at ``phi0_rate`` rad/s.  When ``T_decay`` is set the
    cooperativity decays as ``C * exp(-t / T_decay)``.
    """

    alpha_in: float
    phi_0: float = 0.0
    phi0_rate: float = 0.0
    T_decay: float | None = None

    def __post_init__(self):
        if not self.alpha_in >= 0:
            raise DomainError("alpha_in must be >= 0")
        if self.T_decay is not None and not self.T_decay > 0:
            raise DomainError("T_decay must be > 0 when a decay is scheduled")

    @classmethod
    def from_intensity(cls, I_in: float, **kw) -> "DriveSpec":
        if I_in < 0:
            raise DomainError("input intensity must be >= 0")
        return cls(alpha_in=math.sqrt(I_in), **kw)

    @property
    def I_in(self) -> float:
        return self.alpha_in**2

    def phi0_at(self, t: float) -> float:
        return self.phi_0 + self.phi0_rate * t

    def C_factor_at(self, t: float) -> float:
        if self.T_decay is None:
            return 1.0
        return math.exp(-t / self.T_decay)


def _check_domain(I, p):
    if np.any(np.asarray(I) < 0):
        raise DomainError("intensity must be >= 0")
    p = np.asarray(p)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("orientation p must lie in [0, 1]")


def atomic_phase(I, p, params: ModelParams):
    """Round-trip phase of the atoms: ``phi_L * p`` plus the saturated dispersion.

    At ``I = 0`` the saturated term equals ``phi_L``, so the result can be read
    as ``phi_L (1 + p) + phi_NL`` with ``phi_NL <= 0`` for ``delta_a > 0``.
    Works elementwise on arrays.
    """
    _check_domain(I, p)
    g = 2 * params.C * params.gamma_cav * params.delta_a
    return params.phi_linear * p + g / (1 + params.delta_a**2 + I)


def atomic_absorption(I, p, params: ModelParams):
    """Extra amplitude decay per round trip from atomic absorption.

    Zero unless ``params.absorption_on``.  Orientation scales the coupling by
    ``1 + p``, as for the linear index.
    """
    _check_domain(I, p)
    if not params.absorption_on:
        return np.zeros_like(np.asarray(I, dtype=float)) if np.ndim(I) else 0.0
    return 2 * params.C * params.gamma_cav * (1 + p) / (1 + params.delta_a**2 + I)


def pump_steady(I, params: ModelParams):
    """Fixed point ``beta I / (gamma_p + beta I)`` of the orientation equation.

    Returns 0 when both ``gamma_p`` and ``beta I`` vanish.
    """
    _check_domain(I, 0.0)
    rate = params.beta * np.asarray(I, dtype=float)
    den = params.gamma_p + rate
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, rate / np.where(den > 0, den, 1.0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def round_trip_decay(I, p, params: ModelParams):
    """Total amplitude decay per round trip, mirror + windows + atoms."""
    return params.kappa + atomic_absorption(I, p, params)


def rhs(state: CavityState, drive: DriveSpec, params: ModelParams, t: float = 0.0) -> CavityState:
    """Time derivative of ``state``; returned as a CavityState of rates (1/s)."""
    I = state.intensity
    p = min(max(state.p, 0.0), 1.0)
    pp = params.with_(C=params.C * drive.C_factor_at(t)) if drive.T_decay else params
    phi = drive.phi0_at(t) + atomic_phase(I, p, pp)
    decay = round_trip_decay(I, p, pp)
    dalpha = (pp.t_mirror * drive.alpha_in - (decay - 1j * phi) * state.alpha) / pp.tau
    if pp.pumping_on:
        dp = -pp.gamma_p * state.p + pp.beta * I * (1 - state.p)
    else:
        dp = 0.0
    return CavityState(alpha=complex(dalpha), p=float(dp))
