"""Closed-form eigenvalues of 3x3 real matrices."""
from __future__ import annotations

import math

import numpy as np


def char_poly(M) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of ``lambda**3 + a lambda**2 + b lambda + c``."""
    M = np.asarray(M, dtype=float)
    a = -np.trace(M)
    b = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
         + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
         + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    c = -np.linalg.det(M)
    return float(a), float(b), float(c)


def _cubic_roots(a: float, b: float, c: float) -> list[complex]:
    """Roots of the monic cubic via the depressed form ``x**3 + p x + q``.

    Branch convention: three real roots use the trigonometric form; otherwise
    the real root is built from the larger-magnitude Cardano cube root and the
    second cube root is taken as ``-p / (3 u)`` to avoid cancellation.
    """
    shift = -a / 3
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    D = q * q / 4 + p**3 / 27
    if p == 0 and q == 0:
        return [complex(shift)] * 3
    if D < 0:
        r = 2 * math.sqrt(-p / 3)
        arg = 3 * q / (p * r)
        arg = min(1.0, max(-1.0, arg))
        th = math.acos(arg) / 3
        return [complex(r * math.cos(th - 2 * math.pi * k / 3) + shift) for k in range(3)]
    s = math.sqrt(D)
    w = -q / 2 + (s if q <= 0 else -s)
    u = math.copysign(abs(w) ** (1 / 3), w)
    v = -p / (3 * u) if u != 0 else 0.0
    x1 = u + v
    re = -x1 / 2
    im = math.sqrt(3) / 2 * (u - v)
    return [complex(x1 + shift), complex(re + shift, im), complex(re + shift, -im)]


def _polish(z: complex, a: float, b: float, c: float) -> complex:
    for _ in range(3):
        f = ((z + a) * z + b) * z + c
        df = (3 * z + 2 * a) * z + b
        if df == 0:
            break
        znew = z - f / df
        fnew = ((znew + a) * znew + b) * znew + c
        if abs(fnew) >= abs(f):
            break
        z = znew
    return z


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a 3x3 real matrix, sorted by descending real part.

    The matrix is rescaled by its largest entry before forming the
    characteristic cubic, and each root is polished with Newton steps.
    Ties in the real part are ordered by descending imaginary part.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise ValueError("expected a finite 3x3 matrix")
    scale = float(np.max(np.abs(M)))
    if scale == 0:
        return np.zeros(3, dtype=complex)
    a, b, c = char_poly(M / scale)
    roots = [_polish(z, a, b, c) for z in _cubic_roots(a, b, c)]
    # keep conjugate pairs exact and real roots real
    out = []
    for z in roots:
        if abs(z.imag) <= 1e-14 * max(1.0, abs(z)):
            z = complex(z.real, 0.0)
        out.append(z * scale)
    out.sort(key=lambda z: (-round(z.real / scale, 12), -z.imag))
    return np.array(out, dtype=complex)
