"""Independent reference computations used as test oracles.

Nothing here imports the solver modules under test; only the parameter
container and the plain right-hand side are shared.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar


def state_residual(I, I_in, phi_0, prm, p_frozen=0.0):
    """``I [(kappa + A)^2 + phi_cav^2] - t^2 I_in`` written out from the model equations."""
    I = np.asarray(I, dtype=float)
    s = 1 + prm.delta_a**2
    if prm.pumping_on:
        p = prm.beta * I / (prm.gamma_p + prm.beta * I)
    else:
        p = np.full_like(I, p_frozen)
    g = 2 * prm.C * prm.gamma_cav
    phi = g * prm.delta_a * (p / s + 1 / (s + I))
    A = g * (1 + p) / (s + I) if prm.absorption_on else 0.0
    k = prm.gamma_cav + prm.loss_rt / 2 + A
    return I * (k**2 + (phi_0 + phi) ** 2) - prm.t_mirror**2 * I_in


def brute_roots(I_in, phi_0, prm, n=10**6, p_frozen=0.0):
    """Sign changes of the residual on an ``n``-point geometric grid, polished with Brent."""
    k0 = prm.gamma_cav + prm.loss_rt / 2
    I_max = prm.t_mirror**2 * I_in / k0**2
    x = np.geomspace(I_max * 1e-13, I_max * (1 + 1e-9), n)
    f = state_residual(x, I_in, phi_0, prm, p_frozen)
    idx = np.nonzero(np.sign(f[1:]) != np.sign(f[:-1]))[0]
    out = []
    for i in idx:
        out.append(brentq(lambda z: float(state_residual(z, I_in, phi_0, prm, p_frozen)), x[i], x[i + 1],
                          xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    return np.array(out)


def cubic_root_count(I_in, phi_0, C, delta_a, t2=0.1):
    """Number of positive real steady states of the lossless dispersive model at p = 0.

    Clearing the saturation denominator turns the state equation into a cubic
    in I, solved here with ``numpy.roots``.
    """
    g = t2 / 2
    s = 1 + delta_a**2
    G = 2 * C * g * delta_a
    P1 = np.poly1d([1, s])
    poly = np.poly1d([1, 0]) * (g**2 * P1**2 + (phi_0 * P1 + G) ** 2) - t2 * I_in * P1**2
    r = poly.r
    real = np.abs(r.imag) < 1e-9 * np.max(np.abs(r))
    return int(np.sum(real & (r.real > 0)))


def fd_jacobian(f, y, rel=1e-6, lower=None, upper=None):
    """Central finite-difference Jacobian of ``f`` (vector -> vector) at ``y``.

    Coordinates sitting on a bound switch to a second-order one-sided stencil.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, float)
    J = np.zeros((len(f(y)), n))
    for j in range(n):
        h = rel * max(abs(y[j]), 1e-3)
        e = np.zeros(n)
        e[j] = h
        if y[j] - h < lower[j]:
            J[:, j] = (-3 * f(y) + 4 * f(y + e) - f(y + 2 * e)) / (2 * h)
        elif y[j] + h > upper[j]:
            J[:, j] = (3 * f(y) - 4 * f(y - e) + f(y - 2 * e)) / (2 * h)
        else:
            J[:, j] = (f(y + e) - f(y - e)) / (2 * h)
    return J


def empty_cavity_amplitude(t, alpha_in, prm):
    """Resonant empty cavity started from vacuum: ``alpha_ss (1 - exp(-gamma t / tau))``."""
    g = prm.gamma_cav
    return prm.t_mirror * alpha_in / g * (1 - np.exp(-g * np.asarray(t) / prm.tau))


def grid_extrema(S_of_theta, step_deg=1.0):
    """Min and max of a pi-periodic function by a degree grid plus bounded refinement."""
    th = np.deg2rad(np.arange(0, 180, step_deg))
    vals = np.array([S_of_theta(x) for x in th])
    h = np.deg2rad(step_deg)
    res = []
    for sign, k in ((1, int(np.argmin(vals))), (-1, int(np.argmax(vals)))):
        r = minimize_scalar(lambda x: sign * S_of_theta(x), bounds=(th[k] - h, th[k] + h), method="bounded",
                            options={"xatol": 1e-12})
        res.append((sign * r.fun, r.x % math.pi))
    (smin, thmin), (smax, _) = res
    return smin, smax, thmin


def single_pole_gain(f, f_c):
    """Continuous RC magnitude response."""
    return 1 / np.sqrt(1 + (np.asarray(f) / f_c) ** 2)


def cubic_three_roots(I_in, phi_0, C, delta_a, t2=0.1):
    """Vectorized test for three positive roots of the same cubic via its discriminant.

    Evaluated in long double; ``phi_0`` may be an array.
    """
    ld = np.longdouble
    g = ld(t2) / 2
    s = 1 + ld(delta_a) ** 2
    G = 2 * ld(C) * g * ld(delta_a)
    phi_0 = np.asarray(phi_0, dtype=ld)
    I_in = ld(I_in)
    a2 = g * g + phi_0**2
    b1 = 2 * phi_0 * G
    a = a2
    b = 2 * s * a2 + b1 - ld(t2) * I_in
    c = a2 * s * s + b1 * s + G * G - 2 * s * ld(t2) * I_in
    d = -ld(t2) * I_in * s * s
    disc = 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d
    # three real roots, and Descartes' sign rule makes all of them positive
    return (disc > 0) & (b < 0) & (c > 0)


def complex_basis_spectrum(drift, rate_mirror, rate_loss, Omega, theta):
    """Symmetrized quadrature spectrum computed on the ``(da, da^dagger)`` basis.

    Vacuum enters through both ports with symmetrized covariance ``I / 2``;
    the quadrature ``exp(-i theta) a + exp(i theta) a^dagger`` has unit vacuum
    noise.  Positive and negative frequencies are averaged.
    """
    u = np.array([np.exp(1j * theta), np.exp(-1j * theta)])
    out = 0.0
    for W in (Omega, -Omega):
        G = np.linalg.inv(-1j * W * np.eye(2) - drift)
        Tm = np.eye(2) - 2 * rate_mirror * G
        Tl = -2 * math.sqrt(rate_mirror * rate_loss) * G
        for T in (Tm, Tl):
            w = u.conj() @ T
            out += 0.5 * float(np.real(w @ w.conj()))
    return out / 2
