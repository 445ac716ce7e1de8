"""Atomic-unit constants and conversions to laboratory units.

Everything inside the package is computed in Hartree atomic units
(m_e = hbar = |e| = 1, c = 1/alpha).  Conversions happen only at the
I/O boundary.  Constants are the CODATA values shipped with
:mod:`scipy.constants`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _sc


class UnitError(ValueError):
    """Unknown or incompatible unit tag."""


@dataclass(frozen=True)
class PhysicalConstants:
    alpha: float
    hartree_in_ev: float
    bohr_in_angstrom: float
    bohr_sq_in_megabarn: float
    au_time_in_fs: float

    def __post_init__(self):
        if not 7.297e-3 <= self.alpha <= 7.298e-3:
            raise ValueError(f"fine-structure constant out of range: {self.alpha}")
        if not 27.9 <= self.bohr_sq_in_megabarn <= 28.1:
            raise ValueError(f"bohr^2 in Mb out of range: {self.bohr_sq_in_megabarn}")
        for name in ("hartree_in_ev", "bohr_in_angstrom", "au_time_in_fs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _codata() -> PhysicalConstants:
    bohr_m = _sc.physical_constants["Bohr radius"][0]
    return PhysicalConstants(
        alpha=_sc.fine_structure,
        hartree_in_ev=_sc.physical_constants["Hartree energy in eV"][0],
        bohr_in_angstrom=bohr_m / _sc.angstrom,
        bohr_sq_in_megabarn=bohr_m**2 / 1e-22,
        au_time_in_fs=_sc.physical_constants["atomic unit of time"][0] / _sc.femto,
    )


CONSTANTS = _codata()
ALPHA = CONSTANTS.alpha

# unit tag -> size of the unit expressed in atomic units
_ENERGY = {
    "hartree": 1.0,
    "ev": 1.0 / CONSTANTS.hartree_in_ev,
}
_AREA = {
    "au_area": 1.0,
    "megabarn": 1.0 / CONSTANTS.bohr_sq_in_megabarn,
    "barn": 1e-6 / CONSTANTS.bohr_sq_in_megabarn,
}
_LENGTH = {
    "bohr": 1.0,
    "angstrom": 1.0 / CONSTANTS.bohr_in_angstrom,
}
_TIME = {
    "au_time": 1.0,
    "fs": 1.0 / CONSTANTS.au_time_in_fs,
}

_ALIASES = {
    "ha": "hartree",
    "eh": "hartree",
    "au": None,  # resolved per quantity
    "a.u.": None,
    "b": "barn",
    "mb": "megabarn",
    "a0": "bohr",
    "aa": "angstrom",
    "a": "angstrom",
    "femtosecond": "fs",
}


def _lookup(table: dict, au_tag: str, tag: str) -> float:
    key = str(tag).strip().lower()
    if key in _ALIASES:
        key = _ALIASES[key] or au_tag
    try:
        return table[key]
    except KeyError:
        raise UnitError(f"unknown unit tag {tag!r}; expected one of {sorted(table)}") from None


def _convert(table, au_tag, value, from_unit, to_unit):
    return value * (_lookup(table, au_tag, from_unit) / _lookup(table, au_tag, to_unit))


def convert_energy(value, from_unit: str, to_unit: str):
    """Convert an energy between ``hartree`` and ``eV``."""
    return _convert(_ENERGY, "hartree", value, from_unit, to_unit)


def convert_cross_section(value, from_unit: str, to_unit: str):
    """Convert an area between ``au_area`` (bohr^2), ``barn`` and ``megabarn``."""
    return _convert(_AREA, "au_area", value, from_unit, to_unit)


def convert_length(value, from_unit: str, to_unit: str):
    return _convert(_LENGTH, "bohr", value, from_unit, to_unit)


def convert_time(value, from_unit: str, to_unit: str):
    return _convert(_TIME, "au_time", value, from_unit, to_unit)


def photon_wavenumber(omega):
    """Photon wavenumber k = alpha * omega (atomic units)."""
    return ALPHA * omega


def thomson_total_cross_section() -> float:
    """Unpolarized point-electron Thomson cross section 8 pi alpha^4 / 3 in au_area."""
    return 8.0 * math.pi / 3.0 * ALPHA**4
