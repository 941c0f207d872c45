"""Compiled right-hand side and Dormand-Prince 5(4) stepper.

State vector is ``[Re alpha, Im alpha, p]``.  The parameter vector layout is
fixed by :func:`pack`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# fifth minus fourth order weights
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# 4th order continuous extension (Shampine), y(t + x h) = y + h K^T P [x, x^2, x^3, x^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

NPAR = 14


def pack(params, drive) -> np.ndarray:
    """Flatten model parameters and drive into the kernel's parameter vector."""
    return np.array([
        params.tau, params.t_mirror, params.gamma_cav, params.loss_rt,
        params.C, params.delta_a, params.gamma_p, params.beta,
        1.0 if params.absorption_on else 0.0,
        1.0 if params.pumping_on else 0.0,
        drive.alpha_in, drive.phi_0, drive.phi0_rate,
        0.0 if drive.T_decay is None else 1.0 / drive.T_decay,
    ], dtype=np.float64)


@njit(cache=True)
def rhs_kernel(t, y, par, out):
    tau = par[0]
    tm = par[1]
    gcav = par[2]
    C = par[4]
    da = par[5]
    if par[13] != 0.0:
        C = C * math.exp(-t * par[13])
    ar = y[0]
    ai = y[1]
    p = y[2]
    I = ar * ar + ai * ai
    den = 1.0 + da * da + I
    phi_l = 2.0 * C * gcav * da / (1.0 + da * da)
    phi = par[11] + par[12] * t + phi_l * p + 2.0 * C * gcav * da / den
    decay = gcav + 0.5 * par[3]
    if par[8] != 0.0:
        decay += 2.0 * C * gcav * (1.0 + p) / den
    # tau dalpha/dt = t alpha_in - (decay - i phi) alpha
    out[0] = (tm * par[10] - decay * ar - phi * ai) / tau
    out[1] = (-decay * ai + phi * ar) / tau
    if par[9] != 0.0:
        out[2] = -par[6] * p + par[7] * I * (1.0 - p)
    else:
        out[2] = 0.0


@njit(cache=True)
def dopri_integrate(y0, t0, t_out, par, rtol, atol, h_max, h_min, max_steps, adaptive, h_fixed):
    """Integrate from ``t0`` and sample the dense output at the times ``t_out``.

    Returns ``(samples, status, n_steps, t_last, y_last)``.  With
    ``adaptive = False`` the step is fixed at ``h_fixed`` (used for order
    checks).
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    samples = np.empty((n_out, n))
    K = np.zeros((7, n))
    y = y0.copy()
    ytmp = np.empty(n)
    ynew = np.empty(n)
    t = t0
    t_end = t_out[n_out - 1]
    j = 0
    while j < n_out and t_out[j] <= t0:
        samples[j, :] = y0
        j += 1

    rhs_kernel(t, y, par, K[0])
    if adaptive:
        # initial step from the local derivative scale
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol[i] + abs(y[i]) * rtol
            d0 += (y[i] / sc) ** 2
            d1 += (K[0, i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6 * h_max
        else:
            h = 0.01 * d0 / d1
        h = min(h, h_max)
    else:
        h = h_fixed

    steps = 0
    status = 0
    while j < n_out:
        if steps >= max_steps:
            status = 2
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        for s in range(1, 7):
            for i in range(n):
                acc = 0.0
                for m in range(s):
                    acc += _A[s, m] * K[m, i]
                ytmp[i] = y[i] + h * acc
            rhs_kernel(t + _C[s] * h, ytmp, par, K[s])
        # ytmp now holds the 5th order solution (stage 7 is FSAL)
        for i in range(n):
            ynew[i] = ytmp[i]
        err = 0.0
        if adaptive:
            for i in range(n):
                e = 0.0
                for m in range(7):
                    e += _E[m] * K[m, i]
                sc = atol[i] + max(abs(y[i]), abs(ynew[i])) * rtol
                err += (h * e / sc) ** 2
            err = math.sqrt(err / n)
        if err <= 1.0:
            t_new = t_end if last else t + h
            while j < n_out and t_out[j] <= t_new:
                x = (t_out[j] - t) / h
                for i in range(n):
                    acc = 0.0
                    for m in range(7):
                        q = _P[m, 0] * x + _P[m, 1] * x * x + _P[m, 2] * x ** 3 + _P[m, 3] * x ** 4
                        acc += K[m, i] * q
                    samples[j, i] = y[i] + h * acc
                j += 1
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                K[0, i] = K[6, i]
            steps += 1
            if adaptive:
                fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
                h = min(h * fac, h_max)
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
            if h < h_min:
                status = 1
                break
    return samples[:j], status, steps, t, y
