"""Wigner 3j symbols, Clebsch-Gordan and Gaunt coefficients (integer l only).

All coefficients come from Racah's closed-form finite sum evaluated in
exact rational arithmetic and converted to float at the end.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

_FOUR_PI = 4.0 * math.pi


def _triangle(a: int, b: int, c: int) -> bool:
    return abs(a - b) <= c <= a + b


@lru_cache(maxsize=None)
def wigner_3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    if m1 + m2 + m3 != 0 or not _triangle(j1, j2, j3):
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    f = math.factorial
    delta = Fraction(f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3), f(j1 + j2 + j3 + 1))
    pre = delta * f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3)
    k_min = max(0, j2 - j3 - m1, j1 - j3 + m2)
    k_max = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        den = (
            f(k)
            * f(j3 - j2 + k + m1)
            * f(j3 - j1 + k - m2)
            * f(j1 + j2 - j3 - k)
            * f(j1 - k - m1)
            * f(j2 - k + m2)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    sign = -1.0 if (j1 - j2 - m3) % 2 else 1.0
    # sqrt(pre) * total, keeping the rational part exact until the end
    value = math.sqrt(pre.numerator) / math.sqrt(pre.denominator) * float(total)
    return sign * value


def clebsch_gordan(j1: int, m1: int, j2: int, m2: int, j: int, m: int) -> float:
    """<j1 m1 j2 m2 | j m>."""
    if m1 + m2 != m:
        return 0.0
    sign = -1.0 if (j1 - j2 + m) % 2 else 1.0
    return sign * math.sqrt(2 * j + 1) * wigner_3j(j1, j2, j, m1, m2, -m)


@lru_cache(maxsize=None)
def gaunt(l1: int, m1: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral of Y_{l1 m1} Y_{l2 m2} Y_{l3 m3} over the unit sphere."""
    if (l1 + l2 + l3) % 2:
        return 0.0
    w0 = wigner_3j(l1, l2, l3, 0, 0, 0)
    if w0 == 0.0:
        return 0.0
    norm = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / _FOUR_PI)
    return norm * w0 * wigner_3j(l1, l2, l3, m1, m2, m3)


def gaunt_conj(lp: int, mp: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral of conj(Y_{lp mp}) Y_{l2 m2} Y_{l3 m3}."""
    sign = -1.0 if mp % 2 else 1.0
    return sign * gaunt(lp, -mp, l2, m2, l3, m3)


def spherical_harmonic(l: int, m: int, direction) -> complex:
    """Y_lm (Condon-Shortley phase) at a unit direction."""
    x, y, z = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    return complex(special.sph_harm_y(l, m, theta, phi))


def spherical_components(v) -> dict[int, complex]:
    """Spherical components v_{+1}, v_0, v_{-1} of a (complex) Cartesian vector."""
    vx, vy, vz = (complex(c) for c in v)
    s = math.sqrt(0.5)
    return {1: -s * (vx + 1j * vy), 0: vz, -1: s * (vx - 1j * vy)}
