"""Steady states, linear stability, hysteresis scans and bistability threshold."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .eigen import eigenvalues
from .model import DomainError, DriveSpec, ModelParams, pump_steady

log = logging.getLogger(__name__)

STABLE = "stable"
SADDLE = "saddle"
OSCILLATORY = "oscillatory-unstable"

GRID_NODES = 4000
REFINE_NODES = 400
REL_TOL = 1e-12


class SolverDiagnostic(RuntimeError):
    """The bracketing grid failed to produce any root."""


@dataclass(frozen=True)
class SteadyState:
    I: float
    alpha: complex
    p: float
    phi_cav: float
    transmitted: float
    eigenvalues: np.ndarray = field(repr=False)
    stability: str
    phi_0: float = 0.0
    I_in: float = 0.0

    @property
    def theta(self) -> float:
        return self.phi_0


def _atoms(I, p, params: ModelParams, C=None):
    """Atomic phase and absorption with their partial derivatives.

    Returns ``(phi, dphi_dI, dphi_dp, A, dA_dI, dA_dp)``; arrays allowed.
    """
    C = params.C if C is None else C
    s = 1 + params.delta_a**2
    den = s + I
    g = 2 * C * params.gamma_cav * params.delta_a
    phi_l = g / s
    phi = phi_l * p + g / den
    dphi_dI = -g / den**2
    dphi_dp = phi_l + 0 * den
    if params.absorption_on:
        a0 = 2 * C * params.gamma_cav
        A = a0 * (1 + p) / den
        dA_dI = -a0 * (1 + p) / den**2
        dA_dp = a0 / den
    else:
        A = dA_dI = dA_dp = 0 * den
    return phi, dphi_dI, dphi_dp, A, dA_dI, dA_dp


def orientation_at(I, params: ModelParams, p_frozen: float = 0.0):
    """Steady orientation: pumping fixed point, or the frozen value when pumping is off."""
    if params.pumping_on:
        return pump_steady(I, params)
    return p_frozen + 0 * np.asarray(I, dtype=float)


def state_function(I, I_in: float, phi_0: float, params: ModelParams, p_frozen: float = 0.0):
    """``I [(kappa + A)^2 + phi_cav^2] - t^2 I_in``; zero at a steady state."""
    I = np.asarray(I, dtype=float)
    p = orientation_at(I, params, p_frozen)
    phi, _, _, A, _, _ = _atoms(I, p, params)
    return I * ((params.kappa + A) ** 2 + (phi_0 + phi) ** 2) - params.t_mirror**2 * I_in


def _grid(I_max: float) -> np.ndarray:
    half = GRID_NODES // 2
    lo = np.logspace(math.log10(I_max) - 12, math.log10(I_max), half)
    lin = np.linspace(0, I_max, half + 1)[1:]
    return np.unique(np.concatenate([lo, lin]))


def _brackets(I_in, phi_0, params, p_frozen):
    t2 = params.t_mirror**2
    # every root lies below the empty resonant value; pad it so a root sitting
    # exactly there is still bracketed
    I_max = t2 * I_in / params.kappa**2 * (1 + 1e-6)
    x = _grid(I_max)
    fx = state_function(x, I_in, phi_0, params, p_frozen)
    # local refinement around interior extrema of f, where root pairs can hide
    d = np.diff(fx)
    ext = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0] + 1
    if len(ext):
        extra = [np.linspace(x[max(k - 1, 0)], x[min(k + 1, len(x) - 1)], REFINE_NODES) for k in ext]
        x = np.unique(np.concatenate([x] + extra))
        fx = state_function(x, I_in, phi_0, params, p_frozen)
    exact = x[fx == 0]
    sc = np.nonzero(np.sign(fx[1:]) * np.sign(fx[:-1]) < 0)[0]
    return x[sc], x[sc + 1], fx[sc], exact


def _bisect(lo, hi, flo, I_in, phi_0, params, p_frozen):
    lo = lo.copy()
    hi = hi.copy()
    flo = flo.copy()
    for _ in range(200):
        if np.all(hi - lo <= REL_TOL * hi):
            break
        mid = 0.5 * (lo + hi)
        fm = state_function(mid, I_in, phi_0, params, p_frozen)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def jacobian(ss: SteadyState, drive: DriveSpec, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of the rate equations in ``(Re alpha, Im alpha, p)``, units 1/s."""
    a = ss.alpha
    I = abs(a) ** 2
    p = ss.p
    phi, phi_I, phi_p, A, A_I, A_p = _atoms(I, p, params)
    D = params.kappa + A - 1j * (drive.phi_0 + phi)
    D_I = A_I - 1j * phi_I
    D_p = A_p - 1j * phi_p
    tau = params.tau
    # field rate F = (t alpha_in - D alpha) / tau
    dF_dr = -(D + a * D_I * 2 * a.real) / tau
    dF_di = -(1j * D + a * D_I * 2 * a.imag) / tau
    dF_dp = -(a * D_p) / tau
    J = np.zeros((3, 3))
    J[0, :] = [dF_dr.real, dF_di.real, dF_dp.real]
    J[1, :] = [dF_dr.imag, dF_di.imag, dF_dp.imag]
    if params.pumping_on:
        b = params.beta
        J[2, :] = [2 * b * a.real * (1 - p), 2 * b * a.imag * (1 - p), -params.gamma_p - b * I]
    return J


def classify(eig: np.ndarray) -> str:
    """Stability label from eigenvalues (rates in 1/s)."""
    scale = max(1.0, float(np.max(np.abs(eig))))
    tol = 1e-12 * scale
    unstable = [z for z in eig if z.real > tol]
    if not unstable:
        return STABLE
    if any(abs(z.imag) > tol for z in unstable):
        return OSCILLATORY
    return SADDLE


def stability_eigenvalues(J: np.ndarray, params: ModelParams) -> np.ndarray:
    """Eigenvalues used for classification.

    With pumping off the orientation row is zero; its eigenvalue is exactly 0
    and carries no dynamics, so it is excluded from the classification.
    """
    if not params.pumping_on:
        return np.concatenate([_eig2(J[:2, :2]), [0j]])
    return eigenvalues(J)


def _eig2(M) -> np.ndarray:
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = complex(tr * tr / 4 - det)
    r = disc**0.5
    ev = [tr / 2 + r, tr / 2 - r]
    ev.sort(key=lambda z: (-z.real, -z.imag))
    return np.array(ev, dtype=complex)


def make_state(I: float, I_in: float, phi_0: float, params: ModelParams, p_frozen: float = 0.0) -> SteadyState:
    p = float(orientation_at(I, params, p_frozen))
    phi, _, _, A, _, _ = _atoms(I, p, params)
    phi_cav = phi_0 + float(phi)
    alpha = params.t_mirror * math.sqrt(I_in) / (params.kappa + float(A) - 1j * phi_cav)
    ss = SteadyState(I=float(I), alpha=complex(alpha), p=p, phi_cav=phi_cav, transmitted=float(I),
                     eigenvalues=np.zeros(3, complex), stability=STABLE, phi_0=phi_0, I_in=I_in)
    J = jacobian(ss, DriveSpec.from_intensity(I_in, phi_0=phi_0), params)
    eig = stability_eigenvalues(J, params)
    return SteadyState(I=ss.I, alpha=ss.alpha, p=p, phi_cav=phi_cav, transmitted=ss.transmitted,
                       eigenvalues=eig, stability=classify(eig), phi_0=phi_0, I_in=I_in)


def steady_intensities(I_in: float, phi_0: float, params: ModelParams, p_frozen: float = 0.0) -> np.ndarray:
    """All steady intracavity intensities, ascending."""
    if I_in < 0:
        raise DomainError("I_in must be >= 0")
    if I_in == 0:
        return np.zeros(1)
    lo, hi, flo, exact = _brackets(I_in, phi_0, params, p_frozen)
    roots = np.concatenate([_bisect(lo, hi, flo, I_in, phi_0, params, p_frozen), exact])
    if len(roots) == 0:
        raise SolverDiagnostic(f"no root bracketed for I_in={I_in!r}, phi_0={phi_0!r}")
    return np.sort(roots)


def solve_steady(I_in: float, phi_0: float, params: ModelParams, p_frozen: float = 0.0) -> list[SteadyState]:
    """Every steady state at fixed drive, with eigenvalues and stability.

    Roots of the intensity equation are bracketed on a log + linear grid
    (refined around extrema of the state function) and bisected.  When
    pumping is off, the orientation is held at ``p_frozen``.
    """
    return [make_state(I, I_in, phi_0, params, p_frozen) for I in steady_intensities(I_in, phi_0, params, p_frozen)]


# --- hysteresis scans ------------------------------------------------------

@dataclass
class HysteresisTrace:
    """Adiabatic up/down scans of the cavity detuning ``theta = phi_0 / gamma_cav``."""

    theta: np.ndarray
    states: list
    up_index: list
    down_index: list
    up_switches: list
    down_switches: list
    up_unstable: np.ndarray
    down_unstable: np.ndarray

    def branch(self, direction: str) -> np.ndarray:
        idx = self.up_index if direction == "up" else self.down_index
        return np.array([self.states[k][i].I for k, i in enumerate(idx)])

    @property
    def up_I(self) -> np.ndarray:
        return self.branch("up")

    @property
    def down_I(self) -> np.ndarray:
        return self.branch("down")


def _continue_branch(prev: np.ndarray, k: int, cur: np.ndarray) -> int | None:
    """Index in ``cur`` of the branch that was ``prev[k]``, or None if it vanished.

    Roots are sorted.  When the count changes by two, the created/annihilated
    pair is the adjacent pair whose removal best matches the other list.
    """
    n0, n1 = len(prev), len(cur)
    if n0 == n1:
        return k

    def cost(a, b):
        return float(np.sum(np.abs(np.log(np.maximum(a, 1e-300)) - np.log(np.maximum(b, 1e-300)))))

    if n1 < n0:
        drop = n0 - n1
        best = min(range(n0 - drop + 1), key=lambda i: cost(np.delete(prev, range(i, i + drop)), cur))
        if best <= k < best + drop:
            return None
        return k if k < best else k - drop
    add = n1 - n0
    best = min(range(n1 - add + 1), key=lambda i: cost(prev, np.delete(cur, range(i, i + add))))
    return k if k < best else k + add


def _sweep(theta, states, order):
    idx = [0] * len(theta)
    switches = []
    unstable = np.zeros(len(theta), bool)
    prev_I = None
    k = None
    for n, j in enumerate(order):
        sts = states[j]
        I = np.array([s.I for s in sts])
        stable = [i for i, s in enumerate(sts) if s.stability == STABLE]
        if prev_I is None:
            k = stable[0] if stable else 0
        else:
            c = _continue_branch(prev_I, k, I)
            if c is not None and sts[c].stability == STABLE:
                k = c
            elif stable:
                ref = prev_I[k]
                k = min(stable, key=lambda i: abs(I[i] - ref))
                if c is None or c != k:
                    switches.append(float(theta[j]))
            else:
                k = c if c is not None else int(np.argmin(np.abs(I - prev_I[k])))
                unstable[j] = True
        idx[j] = k
        prev_I = I
    return idx, switches, unstable


def scan_detuning(I_in: float, theta, params: ModelParams, p_frozen: float = 0.0) -> HysteresisTrace:
    """Static hysteresis cycle from adiabatic branch following.

    ``theta`` is the empty-cavity detuning in cavity linewidths,
    ``phi_0 = theta * gamma_cav``.  Both sweep directions are computed; a switch
    is recorded at the first grid point where the occupied branch no longer
    exists or is no longer stable.
    """
    theta = np.sort(np.asarray(theta, dtype=float))
    if len(theta) < 2 or not np.all(np.isfinite(theta)):
        raise ValueError("theta range must be finite with at least 2 points")
    g = params.gamma_cav
    states = [solve_steady(I_in, th * g, params, p_frozen) for th in theta]
    n = len(theta)
    up_idx, up_sw, up_un = _sweep(theta, states, range(n))
    dn_idx, dn_sw, dn_un = _sweep(theta, states, range(n - 1, -1, -1))
    return HysteresisTrace(theta, states, up_idx, dn_idx, up_sw, dn_sw, up_un, dn_un)


# --- bistability threshold -------------------------------------------------

class NoThreshold(Exception):
    """The cavity is not bistable at any input power."""


def _fold_levels(I, params: ModelParams):
    """Fold points of the intensity map at p = 0, parametrized by intracavity I.

    Returns ``(phi_0, level, curvature)`` arrays of shape ``(2, len(I))`` for
    the two solution signs; ``level = t^2 I_in`` at the fold and
    ``curvature > 0`` marks a local minimum (lower turning point).
    """
    I = np.asarray(I, dtype=float)
    phi, Pp, _, A, Ap, _ = _atoms(I, 0.0, params)
    s = 1 + params.delta_a**2
    den = s + I
    Ppp = 2 * 2 * params.C * params.gamma_cav * params.delta_a / den**3
    App = (2 * 2 * params.C * params.gamma_cav / den**3) if params.absorption_on else 0 * den
    k = params.kappa + A
    disc = (I * Pp) ** 2 - k**2 - 2 * I * k * Ap
    root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    us = np.stack([-I * Pp + root, -I * Pp - root])
    phi0 = us - phi
    level = I * (k**2 + us**2)
    curv = 4 * us * Pp + 2 * I * Ppp * us + 2 * I * Pp**2 + 4 * k * Ap + 2 * I * Ap**2 + 2 * I * k * App
    return phi0, level, curv


def bistability_threshold(params: ModelParams) -> float:
    """Smallest input intensity at which some detuning gives three steady states.

    Pumping is forced off (orientation frozen at 0).  The lower turning point
    of the intensity map is traced as a function of intracavity intensity and
    its minimum over all detunings is located by a grid scan and bounded
    refinement.
    """
    pp = params.with_(pumping_on=False)
    if pp.C == 0 or pp.delta_a == 0 and not pp.absorption_on:
        raise NoThreshold("no atomic nonlinearity")
    s = 1 + pp.delta_a**2
    I = np.logspace(math.log10(s) - 6, math.log10(s) + 6, 20001)
    _, level, curv = _fold_levels(I, pp)
    ok = np.isfinite(level) & (curv > 0)
    if not np.any(ok):
        raise NoThreshold(f"no bistability for C={pp.C}, delta_a={pp.delta_a}")
    masked = np.where(ok, level, np.inf)
    br, j = np.unravel_index(np.argmin(masked), masked.shape)
    lo = I[max(j - 1, 0)]
    hi = I[min(j + 1, len(I) - 1)]

    def obj(x):
        _, lv, cv = _fold_levels(np.array([x]), pp)
        v = lv[br, 0]
        if not np.isfinite(v) or cv[br, 0] <= 0:
            return float(masked[br, j]) * 2
        return float(v)

    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": lo * 1e-12})
    best = min(float(masked[br, j]), float(res.fun))
    return best / pp.t_mirror**2


def threshold_detuning(params: ModelParams) -> float:
    """Empty-cavity phase at the lowest-power lower turning point (pumping off)."""
    pp = params.with_(pumping_on=False)
    s = 1 + pp.delta_a**2
    I = np.logspace(math.log10(s) - 6, math.log10(s) + 6, 20001)
    phi0, level, curv = _fold_levels(I, pp)
    masked = np.where(np.isfinite(level) & (curv > 0), level, np.inf)
    br, j = np.unravel_index(np.argmin(masked), masked.shape)
    return float(phi0[br, j])


def resonance_detuning(I_in: float, params: ModelParams, p_frozen: float = 0.0) -> float:
    """Detuning (cavity linewidths) at which a steady state sits exactly on resonance.

    On resonance ``phi_cav = 0`` and the intracavity intensity takes its
    largest value ``t^2 I_in / (kappa + A)^2``; this is the peak of the
    transmission curve and the reference for "left" and "right" of resonance.
    """
    if I_in <= 0:
        raise DomainError("I_in must be > 0")
    t2 = params.t_mirror**2
    I = t2 * I_in / params.kappa**2
    for _ in range(200):
        p = float(orientation_at(I, params, p_frozen))
        _, _, _, A, _, _ = _atoms(I, p, params)
        I_new = t2 * I_in / (params.kappa + float(A)) ** 2
        if abs(I_new - I) <= 1e-15 * I:
            break
        I = I_new
    p = float(orientation_at(I, params, p_frozen))
    phi = float(_atoms(I, p, params)[0])
    return -phi / params.gamma_cav
