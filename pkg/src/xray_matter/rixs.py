"""Resonant inelastic x-ray scattering in the Kramers-Heisenberg form.

Single-determinant amplitude for core hole i, excited particle a and
refilling valence electron b:

    A(w_in) = M_em(i <- b) M_abs(a <- i) / (e_i - e_a + w_in + i Gamma)

Only the regular (absorb-then-emit) pathway is included.  The strict energy
conservation delta of the cross section is replaced by a unit-area line
shape centered at w_F = w_in - (e_a - e_b).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .photoabs import PhotonMode, transition_matrix_element
from .radial import RadialOrbital
from .spectra import SpectralMap, line_shape
from .units import ALPHA

MODEL_FLAGS = {"pathway": "regular-only"}


class LevelOrderingError(ValueError):
    pass


@dataclass(frozen=True)
class Broadening:
    """Final-state / instrument line shape; ``width`` is the FWHM (hartree)."""

    width: float
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("broadening width must be positive")
        if self.shape not in ("gaussian", "lorentzian"):
            raise ValueError(f"unknown line shape {self.shape!r}")

    def __call__(self, x, center: float):
        return line_shape(x, center, self.width, self.shape)


@dataclass(frozen=True)
class RIXSLevelModel:
    """Orbital energies, one-electron matrix elements and lifetime width.

    ``unoccupied`` and ``valence`` map orbital labels to energies;
    ``m_abs[a]`` is the absorption element for i -> a and ``m_em[b]`` the
    emission element for b -> i.  Missing elements count as zero.
    """

    core_energy: float
    unoccupied: Mapping[str, float]
    valence: Mapping[str, float]
    m_abs: Mapping[str, complex]
    m_em: Mapping[str, complex]
    gamma: float
    check_ordering: bool = True
    core_label: str = "i"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("lifetime width gamma must be positive")
        for name in ("unoccupied", "valence", "m_abs", "m_em"):
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))
        for a in self.m_abs:
            if a not in self.unoccupied:
                raise KeyError(f"absorption element for unknown orbital {a!r}")
        for b in self.m_em:
            if b not in self.valence:
                raise KeyError(f"emission element for unknown orbital {b!r}")
        if self.check_ordering:
            for b, eb in self.valence.items():
                for a, ea in self.unoccupied.items():
                    if not self.core_energy < eb < ea:
                        raise LevelOrderingError(
                            f"expected e_i < e_b < e_a, got e_i={self.core_energy}, "
                            f"e_{b}={eb}, e_{a}={ea}"
                        )

    @classmethod
    def from_orbitals(
        cls,
        core: tuple[RadialOrbital, int],
        unoccupied: Mapping[str, tuple[RadialOrbital, int]],
        valence: Mapping[str, tuple[RadialOrbital, int]],
        mode_in: PhotonMode,
        mode_out: PhotonMode,
        gamma: float,
        L_max: int = 3,
        retardation: bool = True,
    ) -> "RIXSLevelModel":
        """Matrix elements from radial orbitals ``(orbital, m)``.

        Emission b -> i uses conj(<b| exp(i k_F.x) eps_F.grad/i |i>), the
        Hermitian conjugate of the absorption operator for the outgoing mode.
        """
        ci, mi = core
        m_abs = {
            a: transition_matrix_element(ci, orb, mode_in, mi, m, L_max, retardation)
            for a, (orb, m) in unoccupied.items()
        }
        m_em = {
            b: np.conj(transition_matrix_element(ci, orb, mode_out, mi, m, L_max, retardation))
            for b, (orb, m) in valence.items()
        }
        return cls(
            ci.energy,
            {a: o.energy for a, (o, _) in unoccupied.items()},
            {b: o.energy for b, (o, _) in valence.items()},
            m_abs,
            m_em,
            gamma,
        )

    def shifted(self, delta: float) -> "RIXSLevelModel":
        """All orbital energies moved by ``delta``."""
        return RIXSLevelModel(
            self.core_energy + delta,
            {k: v + delta for k, v in self.unoccupied.items()},
            {k: v + delta for k, v in self.valence.items()},
            self.m_abs,
            self.m_em,
            self.gamma,
            self.check_ordering,
            self.core_label,
        )

    def with_core_energy(self, core_energy: float) -> "RIXSLevelModel":
        return RIXSLevelModel(
            core_energy,
            self.unoccupied,
            self.valence,
            self.m_abs,
            self.m_em,
            self.gamma,
            self.check_ordering,
            self.core_label,
        )

    def emission_center(self, omega_in, final: tuple[str, str]):
        a, b = final
        return omega_in - (self.unoccupied[a] - self.valence[b])


def rixs_amplitude(model: RIXSLevelModel, omega_in: float, final: tuple[str, str]) -> complex:
    if not omega_in > 0:
        raise ValueError("omega_in must be positive")
    a, b = final
    num = complex(model.m_em.get(b, 0.0)) * complex(model.m_abs.get(a, 0.0))
    return num / (model.core_energy - model.unoccupied[a] + omega_in + 1j * model.gamma)


def _ci_amplitude(model: RIXSLevelModel, omega_in: float, final, intermediates) -> complex:
    a, b = final
    core = model.core_label
    em = ci_emission_elements(intermediates, {(core, b): model.m_em.get(b, 0.0)}, a)
    return rixs_amplitude_ci(
        intermediates, 0.0, em, (core, a), omega_in, model.gamma, b, m_abs=model.m_abs.get(a, 0.0)
    )


def rixs_ddcs(
    model: RIXSLevelModel,
    omega_in: float,
    omega_f,
    final: tuple[str, str],
    broadening: Broadening,
    intermediates=None,
):
    """alpha^4 (w_F/w_in) |A|^2 x line shape, in bohr^2 / (sr hartree).

    With ``intermediates`` (CI states whose energies are E_M - E_0) the
    amplitude is the coherent CI sum with the model's one-electron elements;
    the pumped pair is (core_label, a).
    """
    wf = np.asarray(omega_f, dtype=float)
    if intermediates is None:
        amp = rixs_amplitude(model, omega_in, final)
    else:
        amp = _ci_amplitude(model, omega_in, final, intermediates)
    amp2 = abs(amp) ** 2
    center = model.emission_center(omega_in, final)
    return ALPHA**4 * (wf / omega_in) * amp2 * broadening(wf, center)


def _unique_finals(finals) -> list[tuple[str, str]]:
    out = []
    for f in finals:
        f = (str(f[0]), str(f[1]))
        if f not in out:
            out.append(f)
    return out


def rixs_map(
    model: RIXSLevelModel,
    omega_in_grid,
    omega_f_grid,
    finals,
    broadening: Broadening,
    threads: int = 1,
    intermediates=None,
) -> SpectralMap:
    """Incoherent sum over distinct finals of :func:`rixs_ddcs` on a 2-D grid.

    A final listed more than once is counted once: with a single core hole
    there is one pathway per (a, b).
    """
    w_in = np.asarray(omega_in_grid, dtype=float)
    wf = np.asarray(omega_f_grid, dtype=float)
    uniq = _unique_finals(finals)

    def row(x):
        out = np.zeros(wf.size)
        for f in uniq:
            out += rixs_ddcs(model, float(x), wf, f, broadening, intermediates)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(row, w_in))
    else:
        rows = [row(x) for x in w_in]
    norm = dict(MODEL_FLAGS)
    norm.update(
        {
            "gamma_hartree": model.gamma,
            "broadening": broadening.shape,
            "broadening_fwhm_hartree": broadening.width,
            "finals": ";".join(f"{a}/{b}" for a, b in uniq),
            "intermediates": "single-determinant" if intermediates is None else "ci",
        }
    )
    return SpectralMap(
        (("omega_in_hartree", w_in), ("omega_f_hartree", wf)),
        np.array(rows).reshape(w_in.size, wf.size),
        norm,
    )


# ---------------------------------------------------------------------------
# configuration-interaction intermediates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CIIntermediate:
    """Correlated intermediate state.

    ``energy`` is E_M on the same scale as the ``e0`` passed to
    :func:`rixs_amplitude_ci`; ``singles`` maps (hole, particle) pairs to
    M_i^a and ``doubles`` holds two-particle-two-hole coefficients, which
    count toward the normalization but are otherwise ignored.
    """

    label: str
    energy: float
    singles: Mapping[tuple[str, str], complex]
    m0: complex = 0.0
    doubles: Mapping[tuple, complex] = field(default_factory=dict)

    def __post_init__(self):
        singles = {(str(i), str(a)): complex(c) for (i, a), c in self.singles.items()}
        object.__setattr__(self, "singles", MappingProxyType(singles))
        object.__setattr__(self, "doubles", MappingProxyType(dict(self.doubles)))
        total = abs(self.m0) ** 2 + sum(abs(c) ** 2 for c in singles.values())
        total += sum(abs(complex(c)) ** 2 for c in self.doubles.values())
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"intermediate {self.label!r} is not normalized (norm^2 = {total!r})")
        if self.doubles:
            warnings.warn(
                f"intermediate {self.label!r}: two-particle-two-hole coefficients are ignored",
                stacklevel=3,
            )

    def coefficient(self, pair: tuple[str, str]) -> complex:
        return self.singles.get((str(pair[0]), str(pair[1])), 0j)


def ci_emission_elements(
    intermediates, single_particle: Mapping[tuple[str, str], complex], particle: str
) -> dict:
    """Emission elements toward the final with the electron left in ``particle``.

    em(p, b, M) = M_p^a * em_sp(p, b): the intermediate's (p, a) component
    decays by b filling the hole p.
    """
    out = {}
    for m in intermediates:
        for (p, b), e in single_particle.items():
            out[(p, b, m.label)] = m.coefficient((p, particle)) * complex(e)
    return out


def rixs_amplitude_ci(
    intermediates,
    e0: float,
    emission: Mapping[tuple[str, str, str], complex],
    pair: tuple[str, str],
    omega_in: float,
    gamma: float,
    valence: str,
    m_abs: complex = 1.0,
    hole: str | None = None,
) -> complex:
    """Coherent sum over CI intermediates.

    sum_M em(p, b, M) conj(M_i^a) M_abs / (E_0 - E_M + w_in + i Gamma),
    with (i, a) = ``pair`` the pumped particle-hole pair, b = ``valence``
    and p = ``hole`` (defaults to i).
    """
    inters = list(intermediates)
    if not inters:
        warnings.warn("no intermediate states; amplitude is zero", stacklevel=2)
        return 0j
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    p = pair[0] if hole is None else hole
    labels = [m.label for m in inters]
    if len(set(labels)) != len(labels):
        raise ValueError("intermediate labels must be unique")
    total = 0j
    for m in inters:
        c = m.coefficient(pair)
        if c == 0:
            continue
        em = complex(emission.get((p, valence, m.label), 0.0))
        total += em * np.conj(c) * m_abs / (e0 - m.energy + omega_in + 1j * gamma)
    return complex(total)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def _vertex(y0: float, y1: float, y2: float) -> float | None:
    den = y0 - 2.0 * y1 + y2
    if den >= 0:
        return None
    return 0.5 * (y0 - y2) / den


def peak_ridge(smap: SpectralMap) -> list[tuple[float, float]]:
    """Interpolated emission-peak position for each omega_in column.

    The three samples around the maximum are fit with a parabola in log
    space when all are positive (exact for Gaussian profiles) and in linear
    space otherwise.  Flat columns and maxima on the grid edge are skipped.
    """
    w_in = smap.axes[0][1]
    wf = smap.axes[1][1]
    if wf.size < 3:
        return []
    out = []
    for x, col in zip(w_in, np.asarray(smap.values).real):
        if not np.any(col) or col.max() == col.min():
            continue
        k = int(np.argmax(col))
        if k == 0 or k == wf.size - 1:
            continue
        y = col[k - 1 : k + 2]
        off = None
        if np.all(y > 0):
            off = _vertex(*np.log(y))
        if off is None:
            off = _vertex(*y)
        if off is None:
            continue
        h = 0.5 * (wf[k + 1] - wf[k - 1])
        out.append((float(x), float(wf[k] + off * h)))
    return out


def ridge_slope(ridge) -> float:
    """Least-squares slope d(omega_F peak)/d(omega_in)."""
    if len(ridge) < 2:
        raise ValueError("need at least two ridge points")
    x, y = np.array(ridge).T
    return float(np.polyfit(x, y, 1)[0])


def excitation_profile(smap: SpectralMap) -> np.ndarray:
    """Map integrated over omega_F (trapezoid), per omega_in."""
    return np.trapezoid(np.asarray(smap.values).real, smap.axes[1][1], axis=1)


def lorentzian_fwhm(omega, profile) -> tuple[float, float]:
    """Least-squares Lorentzian fit; returns (center, FWHM)."""
    from scipy.optimize import curve_fit

    x = np.asarray(omega, dtype=float)
    y = np.asarray(profile, dtype=float)
    k = int(np.argmax(y))
    guess = (y[k], x[k], 0.25 * (x[-1] - x[0]))

    def model(t, amp, c, hw):
        return amp * hw**2 / ((t - c) ** 2 + hw**2)

    (amp, c, hw), _ = curve_fit(model, x, y, p0=guess)
    return float(c), float(2 * abs(hw))
