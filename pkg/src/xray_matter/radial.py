"""Bound and continuum orbitals of spherically symmetric one-electron potentials.

The radial equation

    u''(r) = [2 (V(r) - E) + l (l + 1) / r^2] u(r),   u = r R

is integrated with the Numerov scheme.  On an exponential grid the
substitution x = ln r, u = sqrt(r) y gives the Numerov-friendly form

    y''(x) = [2 r^2 (V - E) + (l + 1/2)^2] y(x)

on a uniform x mesh.  Bound states are located by node-counting bisection
(Sturm oscillation) and polished by a root search on the derivative
mismatch at the outer classical turning point.  Continuum states are
integrated outward and scaled to energy normalization by matching to
regular/irregular Coulomb functions in the tail.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np
from numba import njit
from scipy import integrate, optimize, special
from scipy.interpolate import CubicSpline

__all__ = [
    "RadialGrid",
    "PotentialModel",
    "RadialOrbital",
    "ElectronDensity",
    "RadialSolverError",
    "NoSuchStateError",
    "GridTooSmallError",
    "IncompatibleGridError",
    "default_grid",
    "solve_bound",
    "solve_continuum",
    "hydrogenic_orbital",
    "build_density",
    "coulomb_phase",
    "shell_label",
    "parse_shell_label",
]

_SPECTROSCOPIC = "spdfghik"

# decay required at r_max, relative to the turning-point amplitude
_TAIL_DECAY = 1e-10
# outward integration is abandoned this deep (in WKB exponent) in the forbidden region
_FORBIDDEN_CUTOFF = 60.0
# largest local phase advance per Numerov step on the continuum path
_MAX_PHASE_STEP = 0.05


class RadialSolverError(RuntimeError):
    pass


class NoSuchStateError(RadialSolverError):
    pass


class GridTooSmallError(RadialSolverError):
    pass


class IncompatibleGridError(ValueError):
    pass


def shell_label(n: int, l: int) -> str:
    return f"{n}{_SPECTROSCOPIC[l]}"


def parse_shell_label(label: str) -> tuple[int, int]:
    """``'2p'`` -> ``(2, 1)``."""
    label = label.strip().lower()
    try:
        n = int(label[:-1])
        l = _SPECTROSCOPIC.index(label[-1])
    except (ValueError, IndexError):
        raise ValueError(f"not a shell label: {label!r}") from None
    if n < 1 or l > n - 1:
        raise ValueError(f"invalid shell {label!r}")
    return n, l


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Radial mesh, uniform in ``x`` where ``r = exp(x)`` (exponential) or ``x = r`` (linear)."""

    kind: str
    x0: float
    h: float
    n: int

    def __post_init__(self):
        if self.kind not in ("exponential", "linear"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n < 200:
            raise ValueError("radial grid needs at least 200 points")
        if not self.h > 0:
            raise ValueError("grid step must be positive")
        if self.kind == "linear" and not self.x0 > 0:
            raise ValueError("linear grid must start at r > 0")

    @classmethod
    def exponential(cls, r_min: float = 1e-5, r_max: float = 250.0, n: int = 4000) -> "RadialGrid":
        if not 0 < r_min < r_max:
            raise ValueError("need 0 < r_min < r_max")
        x0 = math.log(r_min)
        return cls("exponential", x0, (math.log(r_max) - x0) / (n - 1), n)

    @classmethod
    def linear(cls, r_max: float, n: int) -> "RadialGrid":
        h = r_max / n
        return cls("linear", h, h, n)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x0 + self.h * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def r(self) -> np.ndarray:
        r = np.exp(self.x) if self.kind == "exponential" else self.x.copy()
        r.setflags(write=False)
        return r

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @cached_property
    def jacobian(self) -> np.ndarray:
        """dr/dx."""
        jac = self.r.copy() if self.kind == "exponential" else np.ones(self.n)
        jac.setflags(write=False)
        return jac

    @cached_property
    def dr(self) -> np.ndarray:
        """Local spacing dr = (dr/dx) h."""
        return self.jacobian * self.h

    def integrate(self, f) -> float:
        """Composite Simpson rule for the integral of ``f(r) dr`` over the grid."""
        return float(integrate.simpson(np.asarray(f) * self.jacobian, dx=self.h))

    def integrate_complex(self, f) -> complex:
        f = np.asarray(f)
        return complex(self.integrate(f.real), self.integrate(f.imag))

    def derivative(self, f: np.ndarray) -> np.ndarray:
        """Fourth-order finite-difference df/dr."""
        f = np.asarray(f, dtype=float)
        dfdx = np.empty_like(f)
        h = self.h
        dfdx[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
        edge = np.gradient(f, h, edge_order=2)
        dfdx[:2] = edge[:2]
        dfdx[-2:] = edge[-2:]
        return dfdx / self.jacobian

    def same_as(self, other: "RadialGrid") -> bool:
        return (
            self.kind == other.kind
            and self.n == other.n
            and math.isclose(self.x0, other.x0, rel_tol=0, abs_tol=1e-14)
            and math.isclose(self.h, other.h, rel_tol=1e-14)
        )

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same span with ``factor`` times denser sampling."""
        return RadialGrid(self.kind, self.x0, self.h / factor, (self.n - 1) * factor + 1)


_DEFAULT_GRID: RadialGrid | None = None


def default_grid() -> RadialGrid:
    """Exponential grid, 4000 points, r in [1e-5, 250] bohr."""
    global _DEFAULT_GRID
    if _DEFAULT_GRID is None:
        _DEFAULT_GRID = RadialGrid.exponential()
    return _DEFAULT_GRID


def _check_same_grid(a: RadialGrid, b: RadialGrid):
    if a is not b and not a.same_as(b):
        raise IncompatibleGridError("orbitals live on different radial grids")


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PotentialModel:
    """One-electron central potential.

    ``coulomb``: V = -Z/r.
    ``screened``: V = -(Z - s_shell)/r with a per-shell screening constant;
    the shell is selected with :meth:`for_shell`.
    ``tabulated``: samples of V(r), with V -> -z_asym/r outside the table.
    """

    kind: str
    z: float = 0.0
    screening: dict = field(default_factory=dict)
    r_table: np.ndarray | None = None
    v_table: np.ndarray | None = None
    z_asym: float = 0.0
    tag: str = ""

    def __post_init__(self):
        if self.kind == "coulomb":
            if not self.z > 0:
                raise ValueError("coulomb potential needs Z > 0")
        elif self.kind == "screened":
            if not self.z > 0:
                raise ValueError("screened potential needs Z > 0")
            for label, s in self.screening.items():
                parse_shell_label(label)
                if not 0 <= s < self.z:
                    raise ValueError(f"screening constant for {label} must lie in [0, Z)")
        elif self.kind == "tabulated":
            if self.r_table is None or self.v_table is None:
                raise ValueError("tabulated potential needs r and V samples")
            if self.z_asym < 0:
                raise ValueError("asymptotic charge must be >= 0")
            r = np.asarray(self.r_table, dtype=float)
            if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0) or r[0] <= 0:
                raise ValueError("tabulated radii must be positive and strictly increasing")
            if np.asarray(self.v_table).shape != r.shape:
                raise ValueError("tabulated V must match the radii")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def coulomb(cls, z: float) -> "PotentialModel":
        return cls("coulomb", z=float(z), tag=f"coulomb(Z={z:g})")

    @classmethod
    def screened(cls, z: float, screening: dict) -> "PotentialModel":
        screening = {k.strip().lower(): float(v) for k, v in screening.items()}
        return cls("screened", z=float(z), screening=screening, tag=f"screened(Z={z:g})")

    @classmethod
    def tabulated(cls, r, v, z_asym: float, tag: str = "tabulated") -> "PotentialModel":
        return cls(
            "tabulated",
            r_table=np.array(r, dtype=float),
            v_table=np.array(v, dtype=float),
            z_asym=float(z_asym),
            tag=tag,
        )

    @classmethod
    def free(cls) -> "PotentialModel":
        """V = 0 everywhere."""
        r = np.geomspace(1e-8, 1e8, 8)
        return cls.tabulated(r, np.zeros_like(r), 0.0, tag="free")

    def for_shell(self, label: str | None) -> "PotentialModel":
        """Potential seen by the electron of a given shell (identity unless screened)."""
        if self.kind != "screened":
            return self
        if label is None:
            raise ValueError("screened potential needs a shell label")
        key = label.strip().lower()
        if key not in self.screening:
            raise KeyError(f"no screening constant for shell {label!r}")
        return PotentialModel.coulomb(self.z - self.screening[key])

    @property
    def asymptotic_charge(self) -> float:
        if self.kind == "tabulated":
            return self.z_asym
        return self.z

    def values(self, grid: RadialGrid) -> np.ndarray:
        return self.values_at(grid.r)

    def values_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "coulomb":
            return -self.z / r
        if self.kind == "screened":
            raise ValueError("select a shell with for_shell() before evaluating a screened potential")
        rt = np.asarray(self.r_table)
        rv = CubicSpline(rt, rt * np.asarray(self.v_table))(np.clip(r, rt[0], rt[-1]))
        out = rv / r
        out[r > rt[-1]] = -self.z_asym / r[r > rt[-1]]
        return out

    def asymptotic_radius(self, grid: RadialGrid, rtol: float = 1e-7) -> float:
        """Smallest grid radius beyond which V is the bare Coulomb tail."""
        if self.kind != "tabulated":
            return float(grid.r[0])
        v = self.values(grid)
        resid = np.abs(grid.r * v + self.z_asym)
        bad = np.nonzero(resid > rtol * max(self.z_asym, 1.0))[0]
        if bad.size == 0:
            return float(grid.r[0])
        if bad[-1] == grid.n - 1:
            return math.inf
        return float(grid.r[bad[-1] + 1])


# ---------------------------------------------------------------------------
# orbitals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialOrbital:
    """u(r) = r R(r) on a grid.

    ``norm_kind`` is ``bound_unit`` (integral of u^2 is 1) or
    ``continuum_energy`` (u ~ sqrt(2/(pi k)) sin(...) asymptotically).
    """

    n: int | None
    l: int
    energy: float
    u: np.ndarray
    grid: RadialGrid
    norm_kind: str
    phase_shift: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.norm_kind not in ("bound_unit", "continuum_energy"):
            raise ValueError(f"unknown normalization {self.norm_kind!r}")
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.grid.n,):
            raise ValueError("orbital does not match its grid")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def is_bound(self) -> bool:
        return self.norm_kind == "bound_unit"

    @property
    def ionization_potential(self) -> float:
        if not self.is_bound:
            raise ValueError("ionization potential is defined for bound orbitals only")
        return -self.energy

    @cached_property
    def du_dr(self) -> np.ndarray:
        d = self.grid.derivative(self.u)
        d.setflags(write=False)
        return d

    def norm(self) -> float:
        return self.grid.integrate(self.u**2)

    def node_count(self) -> int:
        return _count_sign_changes(self.u, _significant(self.u))

    def overlap(self, other: "RadialOrbital") -> float:
        _check_same_grid(self.grid, other.grid)
        return self.grid.integrate(self.u * other.u)


@dataclass(frozen=True, eq=False)
class ElectronDensity:
    """Spherically averaged density rho(r) in electrons / bohr^3."""

    grid: RadialGrid
    rho: np.ndarray
    n_electrons: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (self.grid.n,):
            raise ValueError("density does not match its grid")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("density must be finite and non-negative")
        total = 4.0 * math.pi * self.grid.integrate(rho * self.grid.r**2)
        if self.n_electrons == 0:
            if total != 0:
                raise ValueError("density integrates to a nonzero charge but n_electrons = 0")
        elif abs(total - self.n_electrons) > 1e-6 * self.n_electrons:
            raise ValueError(f"density integrates to {total}, not {self.n_electrons}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def gaussian(cls, sigma: float, n_electrons: float, grid: RadialGrid | None = None):
        grid = grid or default_grid()
        r = grid.r
        rho = n_electrons * (2 * math.pi * sigma**2) ** -1.5 * np.exp(-(r**2) / (2 * sigma**2))
        return cls(grid, rho, float(n_electrons))


# ---------------------------------------------------------------------------
# Numerov kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _numerov_outward(g, h, y0, y1, stop):
    """Integrate y'' = g y from index 0 to ``stop`` (inclusive)."""
    y = np.zeros(g.shape[0])
    y[0] = y0
    y[1] = y1
    c = h * h / 12.0
    for i in range(1, stop):
        y[i + 1] = (2.0 * (1.0 + 5.0 * c * g[i]) * y[i] - (1.0 - c * g[i - 1]) * y[i - 1]) / (
            1.0 - c * g[i + 1]
        )
        if abs(y[i + 1]) > 1e150:
            for j in range(i + 2):
                y[j] *= 1e-150
    return y


@njit(cache=True)
def _numerov_inward(g, h, start, stop, seed):
    """Integrate y'' = g y from index ``start`` (y = 0) down to ``stop``."""
    y = np.zeros(g.shape[0])
    y[start] = 0.0
    y[start - 1] = seed
    c = h * h / 12.0
    for i in range(start - 1, stop, -1):
        y[i - 1] = (2.0 * (1.0 + 5.0 * c * g[i]) * y[i] - (1.0 - c * g[i + 1]) * y[i + 1]) / (
            1.0 - c * g[i - 1]
        )
        if abs(y[i - 1]) > 1e150:
            for j in range(i - 1, start + 1):
                y[j] *= 1e-150
    return y


def _significant(y: np.ndarray) -> np.ndarray:
    return np.abs(y) > 1e-12 * np.max(np.abs(y)) if np.any(y) else np.zeros(y.shape, bool)


def _count_sign_changes(y: np.ndarray, mask=None) -> int:
    v = y if mask is None else y[mask]
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


class _Shooter:
    """Precomputed arrays for one (potential, l) pair on one grid."""

    def __init__(self, v: np.ndarray, l: int, grid: RadialGrid):
        self.grid = grid
        self.l = l
        r = grid.r
        self.r = r
        self.veff = v + l * (l + 1) / (2.0 * r**2)
        if grid.kind == "exponential":
            self._scale = 2.0 * r**2
            self._gconst = 2.0 * r**2 * v + (l + 0.5) ** 2
            # regular solution u ~ r^(l+1)  ->  y ~ r^(l+1/2)
            self.y0 = r[0] ** (l + 0.5)
            self.y1 = r[1] ** (l + 0.5)
        else:
            self._scale = 2.0 * np.ones_like(r)
            self._gconst = 2.0 * self.veff
            self.y0 = r[0] ** (l + 1)
            self.y1 = r[1] ** (l + 1)

    def g(self, energy: float) -> np.ndarray:
        return self._gconst - self._scale * energy

    def to_u(self, y: np.ndarray) -> np.ndarray:
        return y * np.sqrt(self.r) if self.grid.kind == "exponential" else y

    def turning_point(self, energy: float) -> int:
        allowed = np.nonzero(self.veff < energy)[0]
        return int(allowed[-1]) if allowed.size else -1

    def decay_exponent(self, energy: float, start: int) -> np.ndarray:
        """Cumulative WKB exponent int kappa dr from index ``start``."""
        kappa = np.sqrt(np.maximum(2.0 * (self.veff[start:] - energy), 0.0))
        return np.concatenate(([0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * np.diff(self.r[start:]))))

    def cutoff(self, energy: float, it: int) -> int:
        cum = self.decay_exponent(energy, max(it, 0))
        beyond = np.nonzero(cum > _FORBIDDEN_CUTOFF)[0]
        n = self.grid.n
        return n - 1 if beyond.size == 0 else min(n - 1, max(it, 0) + int(beyond[0]))

    def nodes(self, energy: float) -> int:
        it = self.turning_point(energy)
        if it < 0:
            return 0
        ic = self.cutoff(energy, it)
        y = _numerov_outward(self.g(energy), self.grid.h, self.y0, self.y1, ic)
        return _count_sign_changes(y[: ic + 1])

    def _match_index(self, energy: float, ic: int) -> int:
        it = self.turning_point(energy)
        return int(min(max(it, 10), ic - 10))

    def matched(self, energy: float):
        """Outward/inward solutions joined at the outer turning point; returns (y, mismatch)."""
        it = self.turning_point(energy)
        ic = self.cutoff(energy, max(it, 0))
        m = self._match_index(energy, ic)
        g = self.g(energy)
        h = self.grid.h
        yo = _numerov_outward(g, h, self.y0, self.y1, m + 1)
        yi = _numerov_inward(g, h, ic, m - 1, 1e-30)
        if yi[m] == 0.0 or yo[m] == 0.0:
            return None, math.nan
        yi = yi * (yo[m] / yi[m])
        mismatch = ((yo[m + 1] - yo[m - 1]) - (yi[m + 1] - yi[m - 1])) / (2.0 * h * yo[m])
        y = np.concatenate((yo[:m], yi[m:]))
        return y, mismatch


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------


def solve_bound(
    pot: PotentialModel, n: int, l: int, grid: RadialGrid | None = None, tol: float = 1e-12
) -> RadialOrbital:
    """Bound eigenstate with n - l - 1 radial nodes.

    For a screened model the potential of shell ``n l`` is used.
    """
    if n < 1 or not 0 <= l <= n - 1:
        raise ValueError(f"invalid quantum numbers n={n}, l={l}")
    grid = grid or default_grid()
    label = shell_label(n, l)
    shell_pot = pot.for_shell(label)
    sh = _Shooter(shell_pot.values(grid), l, grid)
    nr = n - l - 1

    lo = float(np.min(sh.veff))
    hi = 0.0
    if sh.nodes(hi) <= nr:
        if shell_pot.asymptotic_charge > 0:
            raise GridTooSmallError(f"{label}: r_max = {grid.r_max:g} too small to hold this state")
        raise NoSuchStateError(f"{label}: potential has no bound state with {nr} nodes")

    # node-count bisection on the Dirichlet problem
    while hi - lo > 1e-7 * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if sh.nodes(mid) > nr:
            hi = mid
        else:
            lo = mid
    energy = _polish(sh, lo, hi, nr, tol)

    it = sh.turning_point(energy)
    if it < 0:
        raise RadialSolverError(f"{label}: no classically allowed region at E={energy}")
    tail = sh.decay_exponent(energy, it)[-1]
    if tail < -math.log(_TAIL_DECAY):
        raise GridTooSmallError(
            f"{label}: orbital has not decayed at r_max = {grid.r_max:g} bohr "
            f"(WKB attenuation e^-{tail:.1f})"
        )
    y, _ = sh.matched(energy)
    if y is None:
        raise RadialSolverError(f"{label}: matching failed at E={energy}")
    u = sh.to_u(y)
    u /= math.sqrt(grid.integrate(u**2))
    if u[_significant(u)][0] < 0:
        u = -u
    orb = RadialOrbital(n, l, float(energy), u, grid, "bound_unit", label=label)
    if orb.node_count() != nr:
        raise RadialSolverError(f"{label}: converged to a state with {orb.node_count()} nodes")
    return orb


def _polish(sh: _Shooter, lo: float, hi: float, nr: int, tol: float) -> float:
    """Root of the turning-point derivative mismatch inside the bisection bracket."""

    def f(e):
        return sh.matched(e)[1]

    flo, fhi = f(lo), f(hi)
    if np.isfinite(flo) and np.isfinite(fhi) and flo * fhi < 0:
        return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sh.nodes(mid) > nr:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def hydrogenic_orbital(z: float, n: int, l: int, grid: RadialGrid | None = None) -> RadialOrbital:
    """Closed-form hydrogenic orbital, positive near the origin."""
    if n < 1 or not 0 <= l <= n - 1:
        raise ValueError(f"invalid quantum numbers n={n}, l={l}")
    if not z > 0:
        raise ValueError("Z must be positive")
    grid = grid or default_grid()
    rho = 2.0 * z * grid.r / n
    log_norm = 0.5 * (
        3 * math.log(2.0 * z / n) + math.lgamma(n - l) - math.log(2.0 * n) - math.lgamma(n + l + 1)
    )
    radial = (
        np.exp(log_norm - rho / 2.0)
        * rho**l
        * special.eval_genlaguerre(n - l - 1, 2 * l + 1, rho)
    )
    u = grid.r * radial
    return RadialOrbital(n, l, -(z**2) / (2.0 * n**2), u, grid, "bound_unit", label=shell_label(n, l))


# ---------------------------------------------------------------------------
# continuum
# ---------------------------------------------------------------------------


def coulomb_phase(l: int, eta: float) -> float:
    """sigma_l = arg Gamma(l + 1 + i eta)."""
    return float(np.imag(special.loggamma(complex(l + 1, eta))))


# mpmath keeps module-level mutable state (working precision, series caches)
_MPMATH_LOCK = threading.Lock()


def _coulomb_fg(l: int, eta: float, rho: float) -> tuple[float, float]:
    with _MPMATH_LOCK, mpmath.workprec(53):
        return float(mpmath.coulombf(l, eta, rho)), float(mpmath.coulombg(l, eta, rho))


@njit(cache=True)
def _numerov_uniform(g, h, y0, y1):
    n = g.shape[0]
    y = np.empty(n)
    y[0] = y0
    y[1] = y1
    c = h * h / 12.0
    for i in range(1, n - 1):
        y[i + 1] = (2.0 * (1.0 + 5.0 * c * g[i]) * y[i] - (1.0 - c * g[i - 1]) * y[i - 1]) / (
            1.0 - c * g[i + 1]
        )
    return y


def solve_continuum(
    pot: PotentialModel,
    epsilon: float,
    l: int,
    grid: RadialGrid | None = None,
    shell: str | None = None,
) -> RadialOrbital:
    """Energy-normalized continuum orbital at kinetic energy ``epsilon`` (hartree).

    Numerov runs on the grid while the local phase advance per step stays
    small; from there on it continues on a uniform mesh fine enough for the
    local wavelength, and the result is interpolated back onto the grid.
    Normalization and phase come from matching to Coulomb functions near r_max.
    """
    if not epsilon > 0:
        raise ValueError("continuum energy must be positive")
    if l < 0:
        raise ValueError("l must be >= 0")
    grid = grid or default_grid()
    shell_pot = pot.for_shell(shell) if pot.kind == "screened" else pot
    sh = _Shooter(shell_pot.values(grid), l, grid)
    r = grid.r
    k = math.sqrt(2.0 * epsilon)
    z_asym = shell_pot.asymptotic_charge
    eta = -z_asym / k
    r_asym = shell_pot.asymptotic_radius(grid)

    klocal = np.sqrt(np.maximum(2.0 * (epsilon - sh.veff), 0.0))
    coarse = np.nonzero(klocal * grid.dr > _MAX_PHASE_STEP)[0]
    i_stop = grid.n - 1 if coarse.size == 0 else max(int(coarse[0]) - 1, 8)
    y = _numerov_outward(sh.g(epsilon), grid.h, sh.y0, sh.y1, i_stop)
    u = sh.to_u(y)

    if i_stop < grid.n - 1:
        # continue on a uniform mesh resolving the fastest local oscillation
        r_a = r[i_stop - 4]
        k_max = float(np.max(klocal[i_stop - 4 :]))
        step = _MAX_PHASE_STEP / k_max
        n_fine = int(math.ceil((grid.r_max - r_a) / step)) + 1
        rf = np.linspace(r_a, grid.r_max, n_fine)
        hf = rf[1] - rf[0]
        head = CubicSpline(r[i_stop - 8 : i_stop + 1], u[i_stop - 8 : i_stop + 1])
        vf = shell_pot.values_at(rf)
        gf = 2.0 * (vf - epsilon) + l * (l + 1) / rf**2
        uf = _numerov_uniform(gf, hf, float(head(rf[0])), float(head(rf[1])))
        tail = CubicSpline(rf, uf)
        u[i_stop + 1 :] = tail(r[i_stop + 1 :])
        r_m, dr_m = rf[-1], hf
        u_of = tail
    else:
        r_m, dr_m = r[-1], grid.dr[-1]
        u_of = CubicSpline(r, u)

    # two matching radii a quarter wavelength apart
    r_2 = r_m - max(math.pi / (2.0 * k), 4 * dr_m)
    if r_2 < max(r_asym, r[0]) or k * r_m < math.pi / 2:
        raise GridTooSmallError(
            f"asymptotic region not reached on the grid for epsilon={epsilon:g} hartree, l={l}"
        )
    f1, g1 = _coulomb_fg(l, eta, k * r_m)
    f2, g2 = _coulomb_fg(l, eta, k * r_2)
    a, b = np.linalg.solve([[f1, g1], [f2, g2]], [float(u_of(r_m)), float(u_of(r_2))])
    amp = math.hypot(a, b)
    u = u * (math.sqrt(2.0 / (math.pi * k)) / amp)
    return RadialOrbital(
        None,
        l,
        float(epsilon),
        u,
        grid,
        "continuum_energy",
        phase_shift=math.atan2(b, a),
        label=f"eps,l={l}",
    )


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------


def build_density(orbitals, grid: RadialGrid | None = None) -> ElectronDensity:
    """rho(r) = sum occ * u^2 / (4 pi r^2) over ``(orbital, occupation)`` pairs."""
    orbitals = list(orbitals)
    if not orbitals:
        g = grid or default_grid()
        return ElectronDensity(g, np.zeros(g.n), 0.0)
    g = grid or orbitals[0][0].grid
    rho = np.zeros(g.n)
    total = 0.0
    for orb, occ in orbitals:
        _check_same_grid(g, orb.grid)
        if occ < 0:
            raise ValueError("occupations must be non-negative")
        if not orb.is_bound:
            raise ValueError("density is built from bound orbitals")
        rho += occ * orb.u**2
        total += occ
    rho /= 4.0 * math.pi * g.r**2
    return ElectronDensity(g, rho, float(total))
