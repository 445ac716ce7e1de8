"""Photoabsorption: transition matrix elements and sub-shell cross sections.

The one-electron element ``<p| exp(i k.x) eps.grad / i |a>`` is evaluated with
the Rayleigh expansion of the plane wave, truncated at multipole order
``L_max``.  The gradient acting on ``R_a(r) Y_{l m}`` couples to ``l +- 1``
through the standard gradient formula, so every amplitude reduces to Gaunt
coefficients times radial integrals

    I(L, l') = int u_p(r) j_L(k r) D_{l'} u_a(r) dr,

with ``D u = u' - (l+1) u / r`` for ``l' = l + 1`` and ``D u = u' + l u / r``
for ``l' = l - 1``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .angular import clebsch_gordan, gaunt_conj, spherical_components, spherical_harmonic
from .radial import (
    PotentialModel,
    RadialOrbital,
    RadialSolverError,
    _check_same_grid,
    solve_continuum,
)
from .spectra import Spectrum, line_shape
from .units import ALPHA

DEFAULT_L_MAX = 3
_QUADRATURE_RTOL = 1e-6


class RadialQuadratureError(RadialSolverError):
    """Radial integrand has not decayed by the end of the grid."""


def _unit(v, name: str, dtype=float) -> np.ndarray:
    v = np.asarray(v, dtype=dtype).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError(f"{name} must be a unit vector (|v| = {np.linalg.norm(v)!r})")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class PhotonMode:
    """Photon of energy ``omega`` (hartree), direction k-hat and polarization eps."""

    omega: float
    direction: np.ndarray
    polarization: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError("photon energy must be positive and finite")
        k = _unit(self.direction, "direction")
        eps = _unit(self.polarization, "polarization", complex)
        if abs(np.dot(eps, k)) > 1e-12:
            raise ValueError("polarization must be transverse to the propagation direction")
        object.__setattr__(self, "direction", k)
        object.__setattr__(self, "polarization", eps)

    @classmethod
    def linear(cls, omega: float, direction=(0.0, 0.0, 1.0), polarization=(1.0, 0.0, 0.0)):
        return cls(float(omega), np.asarray(direction, float), np.asarray(polarization, complex))

    @property
    def wavenumber(self) -> float:
        return ALPHA * self.omega

    def with_omega(self, omega: float) -> "PhotonMode":
        return PhotonMode(float(omega), self.direction, self.polarization)

    def orthogonal_partner(self) -> "PhotonMode":
        """Same photon with the orthogonal polarization conj(k x eps)."""
        eps2 = np.conj(np.cross(self.direction, self.polarization))
        return PhotonMode(self.omega, self.direction, eps2)


@dataclass(frozen=True)
class SubshellSpec:
    orbital: RadialOrbital
    occupation: float
    label: str = ""

    def __post_init__(self):
        if not self.orbital.is_bound:
            raise ValueError("sub-shell orbital must be bound")
        cap = 2 * (2 * self.orbital.l + 1)
        if not 0 <= self.occupation <= cap:
            raise ValueError(f"occupation {self.occupation} outside [0, {cap}]")
        if not self.label:
            object.__setattr__(self, "label", self.orbital.label)


# ---------------------------------------------------------------------------
# matrix elements
# ---------------------------------------------------------------------------


def _final_channels(l_a: int, L_max: int) -> list[int]:
    """Final-state l values reachable from l_a with multipoles up to L_max."""
    out = set()
    for lq in (l_a - 1, l_a + 1):
        if lq < 0:
            continue
        for L in range(L_max + 1):
            for lp in range(abs(lq - L), lq + L + 1):
                if (lp + L + lq) % 2 == 0:
                    out.add(lp)
    return sorted(out)


def _radial_integrals(a: RadialOrbital, p: RadialOrbital, k: float, L_max: int) -> dict:
    """I[(L, l')] for the gradient channels of ``a``; raises if not converged."""
    _check_same_grid(a.grid, p.grid)
    grid = a.grid
    r = grid.r
    l = a.l
    d = {
        l + 1: a.du_dr - (l + 1) * a.u / r,
        l - 1: a.du_dr + l * a.u / r,
    }
    if l == 0:
        del d[-1]
    L_top = L_max if k > 0 else 0
    # tail estimate: weight of |integrand| over the outermost 5% of points
    tail = slice(int(0.95 * grid.n), None)
    out = {}
    for L in range(L_top + 1):
        jl = special.spherical_jn(L, k * r) if k > 0 else np.ones_like(r)
        for lq, du in d.items():
            f = p.u * jl * du
            val = grid.integrate(f)
            scale = grid.integrate(np.abs(f))
            tail_err = float(np.sum(np.abs(f[tail]) * grid.dr[tail]))
            if scale > 0 and tail_err > _QUADRATURE_RTOL * scale:
                raise RadialQuadratureError(
                    f"radial integrand not converged (L={L}, l'={lq}): "
                    f"estimated tail error {tail_err:.3e} vs scale {scale:.3e}"
                )
            out[(L, lq)] = val
    return out


def _amplitude(
    l_a: int,
    m_a: int,
    l_p: int,
    m_p: int,
    eps_sph: dict,
    ylm_k: dict,
    radial: dict,
) -> complex:
    total = 0j
    for q in (-1, 0, 1):
        e = eps_sph[-q]
        if e == 0:
            continue
        phase_q = -1.0 if q % 2 else 1.0
        m1 = m_a + q
        for (L, lq), rad in radial.items():
            if rad == 0.0 or abs(m1) > lq:
                continue
            if lq == l_a + 1:
                s = math.sqrt((l_a + 1) / (2 * l_a + 3)) * clebsch_gordan(l_a, m_a, 1, q, lq, m1)
            else:
                s = -math.sqrt(l_a / (2 * l_a - 1)) * clebsch_gordan(l_a, m_a, 1, q, lq, m1)
            if s == 0.0:
                continue
            M = m_p - m1
            if abs(M) > L:
                continue
            g = gaunt_conj(l_p, m_p, L, M, lq, m1)
            if g == 0.0:
                continue
            total += phase_q * e * s * 4.0 * math.pi * (1j**L) * np.conj(ylm_k[(L, M)]) * g * rad
    return -1j * total


def _angular_inputs(mode: PhotonMode, L_max: int):
    eps_sph = spherical_components(mode.polarization)
    ylm_k = {
        (L, M): spherical_harmonic(L, M, mode.direction)
        for L in range(L_max + 1)
        for M in range(-L, L + 1)
    }
    return eps_sph, ylm_k


def transition_matrix_element(
    a: RadialOrbital,
    p: RadialOrbital,
    mode: PhotonMode,
    m_a: int,
    m_p: int,
    L_max: int = DEFAULT_L_MAX,
    retardation: bool = True,
) -> complex:
    """``<p, m_p| exp(i k.x) eps.grad / i |a, m_a>``.

    With ``retardation=False`` the plane wave is replaced by 1 (velocity-form
    dipole element).

    Raises
    ------
    IncompatibleGridError
        Orbitals on different grids.
    RadialQuadratureError
        Integrand not decayed at the grid edge.
    """
    if not a.is_bound:
        raise ValueError("initial orbital must be bound")
    if abs(m_a) > a.l or abs(m_p) > p.l:
        raise ValueError("|m| must not exceed l")
    if L_max < 0:
        raise ValueError("L_max must be >= 0")
    k = mode.wavenumber if retardation else 0.0
    radial = _radial_integrals(a, p, k, L_max)
    eps_sph, ylm_k = _angular_inputs(mode, L_max)
    return _amplitude(a.l, m_a, p.l, m_p, eps_sph, ylm_k, radial)


def _summed_strength(a: RadialOrbital, finals, mode: PhotonMode, L_max: int, k: float) -> float:
    """Sum over m_a, final orbitals and m_p of |M|^2 (not averaged)."""
    eps_sph, ylm_k = _angular_inputs(mode, L_max)
    total = 0.0
    for p in finals:
        radial = _radial_integrals(a, p, k, L_max)
        for m_a in range(-a.l, a.l + 1):
            for m_p in range(-p.l, p.l + 1):
                total += abs(_amplitude(a.l, m_a, p.l, m_p, eps_sph, ylm_k, radial)) ** 2
    return total


# ---------------------------------------------------------------------------
# cross sections
# ---------------------------------------------------------------------------


def continuum_channels(
    shell: SubshellSpec, epsilon: float, pot: PotentialModel, L_max: int
) -> list[RadialOrbital]:
    a = shell.orbital
    return [
        solve_continuum(pot, epsilon, lp, grid=a.grid, shell=shell.label or None)
        for lp in _final_channels(a.l, L_max)
    ]


def subshell_cross_section(
    shell: SubshellSpec,
    mode: PhotonMode,
    pot: PotentialModel,
    L_max: int = DEFAULT_L_MAX,
    retardation: bool = True,
    unpolarized: bool = False,
) -> float:
    """Photoionization cross section of one sub-shell (bohr^2).

    Zero at or below the ionization threshold.  The final state is the
    energy-normalized continuum at ``omega - I_a``; the initial ``m`` is
    averaged and multiplied by the occupation.  With ``unpolarized`` the
    result is averaged over ``mode`` and its orthogonal partner.
    """
    a = shell.orbital
    omega = mode.omega
    if omega <= a.ionization_potential:
        return 0.0
    if shell.occupation == 0:
        return 0.0
    finals = continuum_channels(shell, omega - a.ionization_potential, pot, L_max)
    k = mode.wavenumber if retardation else 0.0
    modes = [mode, mode.orthogonal_partner()] if unpolarized else [mode]
    strength = sum(_summed_strength(a, finals, m, L_max, k) for m in modes) / len(modes)
    return (4.0 * math.pi**2 * ALPHA / omega) * strength * shell.occupation / (2 * a.l + 1)


def multipole_convergence(
    shell: SubshellSpec,
    mode: PhotonMode,
    pot: PotentialModel,
    L_max: int = DEFAULT_L_MAX,
    unpolarized: bool = False,
) -> np.ndarray:
    """Cross sections for truncation orders 0..L_max+1.

    ``np.diff`` of the result gives the L -> L+1 increments used as a
    convergence diagnostic.
    """
    return np.array(
        [
            subshell_cross_section(shell, mode, pot, L, retardation=True, unpolarized=unpolarized)
            for L in range(L_max + 2)
        ]
    )


@dataclass(frozen=True)
class BoundBoundLine:
    energy: float
    strength: float
    oscillator_strength: float

    def profile(self, omega, width: float, shape: str = "lorentzian") -> np.ndarray:
        """Absorption cross section (bohr^2) of the broadened line.

        Area equals ``2 pi^2 alpha f``; ``width`` is the FWHM.
        """
        return 2.0 * math.pi**2 * ALPHA * self.oscillator_strength * line_shape(
            omega, self.energy, width, shape
        )


def bound_bound_strength(
    a: RadialOrbital,
    b: RadialOrbital,
    mode: PhotonMode,
    L_max: int = DEFAULT_L_MAX,
    retardation: bool = False,
) -> BoundBoundLine:
    """Excitation a -> b: transition energy, summed |M|^2 and oscillator strength.

    ``strength`` is |M|^2 summed over m_b and averaged over m_a; the
    oscillator strength is ``2 * strength / dE``.  ``mode.omega`` is ignored
    in favor of the resonance energy.
    """
    if not (a.is_bound and b.is_bound):
        raise ValueError("bound-bound strength needs two bound orbitals")
    _check_same_grid(a.grid, b.grid)
    de = b.energy - a.energy
    if a is b or (a.l == b.l and a.n == b.n) or de == 0.0:
        raise ValueError("transition energy is zero (same orbital)")
    res_mode = mode.with_omega(abs(de))
    k = res_mode.wavenumber if retardation else 0.0
    strength = _summed_strength(a, [b], res_mode, L_max, k) / (2 * a.l + 1)
    return BoundBoundLine(de, strength, 2.0 * strength / de)


def absorption_spectrum(
    shells: list[SubshellSpec],
    omega_grid,
    pot: PotentialModel,
    mode: PhotonMode | None = None,
    L_max: int = DEFAULT_L_MAX,
    retardation: bool = True,
    unpolarized: bool = False,
    threads: int = 1,
) -> Spectrum:
    """Per-shell and total cross sections (bohr^2) on ``omega_grid``.

    ``mode`` fixes direction and polarization (default: along z, x-polarized);
    its energy is replaced by each grid point.  Grid points are independent
    and are evaluated concurrently when ``threads > 1``; results are placed
    by index so the output does not depend on scheduling.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if omega.ndim != 1 or omega.size == 0 or np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be strictly increasing")
    labels = [s.label for s in shells]
    if len(set(labels)) != len(labels):
        raise ValueError("shell labels must be unique")
    if "total" in labels:
        raise ValueError("'total' is reserved")
    base = mode or PhotonMode.linear(float(omega[0]))

    def point(w):
        m = base.with_omega(w)
        return [
            subshell_cross_section(s, m, pot, L_max, retardation, unpolarized) for s in shells
        ]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(point, omega))
    else:
        rows = [point(w) for w in omega]
    data = np.array(rows, dtype=float).reshape(omega.size, len(shells))
    channels = {lab: data[:, i] for i, lab in enumerate(labels)}
    channels["total"] = data.sum(axis=1)
    return Spectrum(omega, channels)
