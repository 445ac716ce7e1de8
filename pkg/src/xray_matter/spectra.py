"""Containers for 1-D spectra and N-D spectral maps, plus unit-area line shapes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_increasing(name: str, grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D grid")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError(f"{name} must be strictly increasing")
    if not np.all(np.isfinite(grid)):
        raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class Spectrum:
    """Values on a 1-D energy (or momentum) axis, one array per channel.

    ``nonnegative`` selects whether negative values are rejected; cross
    sections require it, form factors of shell-structured densities do not.
    """

    axis: np.ndarray
    channels: Mapping[str, np.ndarray]
    axis_label: str = "omega_hartree"
    nonnegative: bool = True

    def __post_init__(self):
        axis = _frozen(self.axis)
        _check_increasing("axis", axis)
        chans = {}
        for label, vals in self.channels.items():
            v = _frozen(vals)
            if v.shape != axis.shape:
                raise ValueError(f"channel {label!r} has shape {v.shape}, axis has {axis.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"channel {label!r} contains non-finite values")
            if self.nonnegative and np.any(v < 0):
                raise ValueError(f"channel {label!r} contains negative values")
            chans[label] = v
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "channels", MappingProxyType(chans))

    @property
    def labels(self) -> list[str]:
        return list(self.channels)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.channels[label]


@dataclass(frozen=True)
class SpectralMap:
    """Values on a tensor-product grid of labeled axes.

    Parameters
    ----------
    axes : sequence of (name, grid)
        One entry per array dimension, in array order.
    values : ndarray
        Finite, shape matching the axes.  Real for spectra; pair-distribution
        maps may be complex.
    normalization : mapping
        Free-form record (window kind, time span, bin width, ...), echoed
        into output headers.
    """

    axes: tuple
    values: np.ndarray
    normalization: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        axes = []
        for name, grid in self.axes:
            g = _frozen(grid)
            _check_increasing(f"axis {name!r}", g)
            axes.append((str(name), g))
        vals = np.array(self.values, copy=True)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        vals.setflags(write=False)
        shape = tuple(g.size for _, g in axes)
        if vals.shape != shape:
            raise ValueError(f"values shape {vals.shape} does not match axes {shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("spectral map contains non-finite values")
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "normalization", MappingProxyType(dict(self.normalization)))

    @property
    def axis_names(self) -> list[str]:
        return [n for n, _ in self.axes]

    def axis(self, name: str) -> np.ndarray:
        for n, g in self.axes:
            if n == name:
                return g
        raise KeyError(name)


# -- line shapes (unit area over the real line) -------------------------------


def lorentzian(x, center: float, hwhm: float):
    x = np.asarray(x, dtype=float)
    return (hwhm / math.pi) / ((x - center) ** 2 + hwhm**2)


def gaussian(x, center: float, fwhm: float):
    x = np.asarray(x, dtype=float)
    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return np.exp(-0.5 * ((x - center) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def line_shape(x, center: float, width: float, shape: str = "lorentzian"):
    """Unit-area profile; ``width`` is the FWHM for both shapes."""
    if not width > 0:
        raise ValueError("line width must be positive")
    if shape == "lorentzian":
        return lorentzian(x, center, 0.5 * width)
    if shape == "gaussian":
        return gaussian(x, center, width)
    raise ValueError(f"unknown line shape {shape!r}")
