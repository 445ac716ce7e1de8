"""Coherent elastic (Thomson) scattering from spherical electron densities."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .photoabs import PhotonMode
from .radial import ElectronDensity, RadialSolverError
from .spectra import Spectrum
from .units import ALPHA

UNPOLARIZED = "unpolarized"
# absolute tolerance on f0, in units of N_el, for the Richardson check
_FF_TOL = 1e-8


class QuadratureError(RadialSolverError):
    """Form-factor quadrature did not converge on the density's grid."""


@dataclass(frozen=True, eq=False)
class ScatteringGeometry:
    """Incoming photon and outgoing direction.

    The elastic momentum transfer uses |k_F| = |k_in|; :meth:`q_vector` also
    covers the inelastic case with |k_F| = alpha * omega_F.
    """

    incoming: PhotonMode
    outgoing_direction: np.ndarray

    def __post_init__(self):
        kf = np.asarray(self.outgoing_direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(kf) - 1.0) > 1e-12:
            raise ValueError("outgoing direction must be a unit vector")
        kf.setflags(write=False)
        object.__setattr__(self, "outgoing_direction", kf)
        q = self.q_magnitude
        kin = self.incoming.wavenumber
        if abs(q - 2.0 * kin * math.sin(self.theta / 2.0)) > 1e-12 * max(kin, 1.0):
            raise ValueError("inconsistent elastic kinematics")

    @classmethod
    def from_angles(
        cls, omega: float, theta: float, phi: float = 0.0, polarization=(1.0, 0.0, 0.0)
    ) -> "ScatteringGeometry":
        """Incoming along +z; outgoing at polar angle theta, azimuth phi."""
        mode = PhotonMode.linear(omega, (0.0, 0.0, 1.0), polarization)
        out = np.array(
            [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
        )
        return cls(mode, out)

    @classmethod
    def from_q(cls, omega: float, q: float, phi: float = 0.0, polarization=(1.0, 0.0, 0.0)):
        """Geometry whose elastic |Q| equals ``q`` (requires q <= 2 alpha omega)."""
        kin = ALPHA * omega
        if not 0 <= q <= 2.0 * kin * (1 + 1e-14):
            raise ValueError(f"|Q| = {q} not reachable at omega = {omega} (max {2 * kin})")
        theta = 2.0 * math.asin(min(q / (2.0 * kin), 1.0))
        return cls.from_angles(omega, theta, phi, polarization)

    @property
    def theta(self) -> float:
        k = self.incoming.direction
        kf = self.outgoing_direction
        return math.atan2(np.linalg.norm(np.cross(k, kf)), float(np.dot(k, kf)))

    def q_vector(self, omega_f: float | None = None) -> np.ndarray:
        """Q = k_in - k_F; elastic unless ``omega_f`` is given."""
        kin = self.incoming.wavenumber * self.incoming.direction
        kf_mag = self.incoming.wavenumber if omega_f is None else ALPHA * omega_f
        return kin - kf_mag * self.outgoing_direction

    @property
    def q_magnitude(self) -> float:
        return 2.0 * self.incoming.wavenumber * math.sin(self.theta / 2.0)

    def rotated(self, rot: np.ndarray) -> "ScatteringGeometry":
        m = self.incoming
        return ScatteringGeometry(
            PhotonMode(m.omega, rot @ m.direction, rot @ m.polarization),
            rot @ self.outgoing_direction,
        )


def form_factor(density: ElectronDensity, q_magnitude: float) -> float:
    """f0(Q) = 4 pi int rho(r) r^2 sinc(Q r) dr for a spherical density.

    Simpson's rule on the density grid, checked against the same rule at
    half the sampling (Richardson estimate).

    Raises
    ------
    QuadratureError
        If the estimated error exceeds 1e-8 N_el.
    """
    if not (q_magnitude >= 0 and math.isfinite(q_magnitude)):
        raise ValueError("|Q| must be finite and non-negative")
    g = density.grid
    f = 4.0 * math.pi * density.rho * g.r**2 * np.sinc(q_magnitude * g.r / math.pi) * g.jacobian
    fine = integrate.simpson(f, dx=g.h)
    coarse = integrate.simpson(f[::2], dx=2 * g.h)
    err = abs(fine - coarse) / 15.0
    if err > _FF_TOL * max(density.n_electrons, 1.0):
        raise QuadratureError(
            f"form factor at Q={q_magnitude:g} not converged (estimated error {err:.2e})"
        )
    return float(fine)


def _outgoing_basis(kf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    trial = np.array([1.0, 0.0, 0.0]) if abs(kf[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, kf) * kf
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(kf, e1)


def polarization_sum(geometry: ScatteringGeometry, polarization=None) -> float:
    """Sum over outgoing polarizations of |eps_F* . eps_in|^2.

    ``polarization`` is a complex unit vector, ``None`` for the incoming
    mode's own polarization, or ``"unpolarized"`` to average over two
    orthogonal incoming polarizations.
    """
    if isinstance(polarization, str):
        if polarization != UNPOLARIZED:
            raise ValueError(f"unknown polarization tag {polarization!r}")
        m = geometry.incoming
        pair = (m.polarization, m.orthogonal_partner().polarization)
        return 0.5 * sum(polarization_sum(geometry, e) for e in pair)
    eps = geometry.incoming.polarization if polarization is None else np.asarray(polarization, complex)
    if abs(np.linalg.norm(eps) - 1.0) > 1e-12:
        raise ValueError("polarization must be a unit vector")
    if abs(np.dot(eps, geometry.incoming.direction)) > 1e-12:
        raise ValueError("polarization must be transverse to the incoming direction")
    total = 0.0
    for ef in _outgoing_basis(geometry.outgoing_direction):
        total += abs(np.vdot(ef, eps)) ** 2
    return float(total)


def thomson_dcs(geometry: ScatteringGeometry, polarization=None) -> float:
    """Point-electron differential cross section alpha^4 * polarization sum (bohr^2/sr)."""
    return ALPHA**4 * polarization_sum(geometry, polarization)


def elastic_dcs(geometry: ScatteringGeometry, density: ElectronDensity, polarization=None) -> float:
    """alpha^4 * polarization sum * |f0(|Q|)|^2 in bohr^2 per steradian."""
    f0 = form_factor(density, geometry.q_magnitude)
    return thomson_dcs(geometry, polarization) * f0 * f0


def form_factor_curve(density: ElectronDensity, q_grid, threads: int = 1) -> Spectrum:
    q = np.asarray(q_grid, dtype=float)

    def one(x):
        return form_factor(density, float(x))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(one, q))
    else:
        vals = [one(x) for x in q]
    return Spectrum(q, {"f0": np.array(vals)}, axis_label="q_inv_bohr", nonnegative=False)


def molecular_form_factor(q_vector, sites) -> complex:
    """Independent-atom molecular form factor sum_s f_s(|Q|) exp(i Q.R_s).

    ``sites`` is an iterable of ``(density, position)`` pairs, positions in bohr.
    """
    q = np.asarray(q_vector, dtype=float).reshape(3)
    qm = float(np.linalg.norm(q))
    total = 0j
    cache: dict[int, float] = {}
    for dens, pos in sites:
        key = id(dens)
        if key not in cache:
            cache[key] = form_factor(dens, qm)
        total += cache[key] * np.exp(1j * float(np.dot(q, np.asarray(pos, dtype=float))))
    return complex(total)
