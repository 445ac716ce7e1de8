"""Dynamic structure factor, van Hove function and inelastic Thomson scattering.

Nuclei are classical point particles on a trajectory R_n(t).  For a
momentum transfer Q the collective phase is rho(t) = sum_n exp(i Q.R_n(t))
and the intermediate scattering function is F(t) = rho(t) conj(rho(0))
(single time origin) or its average over time origins.  The dynamic
structure factor is the windowed two-sided transform

    S(dw) = dt/(2 pi) [w_0 F_0 + 2 Re sum_{j>=1} w_j F_j exp(-i dw t_j)],

using F(-t) = conj F(t).  Windows have w_0 = 1, so the integral of S over
the full Nyquist band equals F(0) for every window.
"""

from __future__ import annotations

import io
import math
import os
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .elastic import ScatteringGeometry, polarization_sum
from .spectra import SpectralMap, Spectrum
from .units import ALPHA, convert_length, convert_time

WINDOWS = ("rectangular", "hann")
_DT_RTOL = 1e-6
_ALIAS_TOL = 1e-3
_CHUNK = 1 << 22  # elements per phase block in the direct transform
_TIME_RE = re.compile(r"(?:^|\s)time=([^\s,;]+)")


class TrajectoryFormatError(ValueError):
    """Malformed trajectory input; the message carries line/frame numbers."""


class NyquistError(ValueError):
    """Requested frequency beyond pi/dt."""


class AliasingWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions (frames, atoms, 3) in bohr at a uniform step ``dt`` (a.u.)."""

    positions: np.ndarray
    dt: float
    species: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 3 or pos.shape[2] != 3 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise ValueError("positions must have shape (frames, atoms, 3)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        species = tuple(self.species) or ("X",) * pos.shape[1]
        if len(species) != pos.shape[1]:
            raise ValueError("one species label per atom required")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "species", species)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_frames)

    def truncated(self, n_frames: int) -> "Trajectory":
        return Trajectory(self.positions[:n_frames], self.dt, self.species, self.t0)


# ---------------------------------------------------------------------------
# extended-XYZ reader
# ---------------------------------------------------------------------------


def _lines(source):
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")).read().splitlines()
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return fh.read().splitlines()
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


def load_trajectory(source, fmt: str = "xyz") -> Trajectory:
    """Read a multi-frame extended-XYZ trajectory.

    Each frame is an atom-count line, a comment line containing
    ``time=<fs>``, and one ``species x y z`` line per atom (angstrom).
    ``source`` is a path, bytes, or a readable stream.

    Raises
    ------
    TrajectoryFormatError
        On any malformed line (1-based line numbers), inconsistent frames
        (0-based frame index) or a non-uniform time step.
    """
    if fmt.lower() not in ("xyz", "extxyz"):
        raise TrajectoryFormatError(f"unsupported trajectory format {fmt!r}")
    lines = _lines(source)
    frames, times, species = [], [], None
    i = 0
    n_lines = len(lines)
    while i < n_lines:
        if not lines[i].strip():
            i += 1
            continue
        frame = len(frames)
        try:
            n = int(lines[i].strip())
        except ValueError:
            raise TrajectoryFormatError(
                f"line {i + 1}: expected atom count for frame {frame}, got {lines[i]!r}"
            ) from None
        if n < 1:
            raise TrajectoryFormatError(f"line {i + 1}: frame {frame} has atom count {n}")
        if frames and n != frames[0].shape[0]:
            raise TrajectoryFormatError(
                f"line {i + 1}: frame {frame} has {n} atoms, frame 0 has {frames[0].shape[0]}"
            )
        if i + 1 >= n_lines:
            raise TrajectoryFormatError(f"line {i + 2}: missing comment line of frame {frame}")
        m = _TIME_RE.search(lines[i + 1])
        if m is None:
            raise TrajectoryFormatError(f"line {i + 2}: no time=<fs> in comment of frame {frame}")
        try:
            times.append(float(m.group(1)))
        except ValueError:
            raise TrajectoryFormatError(f"line {i + 2}: bad time value {m.group(1)!r}") from None
        xyz = np.empty((n, 3))
        names = []
        for a in range(n):
            ln = i + 2 + a
            if ln >= n_lines:
                raise TrajectoryFormatError(
                    f"line {ln + 1}: frame {frame} ends after {a} of {n} atoms"
                )
            parts = lines[ln].split()
            if len(parts) < 4:
                raise TrajectoryFormatError(f"line {ln + 1}: expected 'species x y z'")
            try:
                xyz[a] = [float(v) for v in parts[1:4]]
            except ValueError:
                raise TrajectoryFormatError(f"line {ln + 1}: non-numeric coordinate") from None
            names.append(parts[0])
        if species is None:
            species = tuple(names)
        elif tuple(names) != species:
            raise TrajectoryFormatError(f"frame {frame}: species order differs from frame 0")
        frames.append(xyz)
        i += 2 + n
    if not frames:
        raise TrajectoryFormatError("line 1: empty trajectory")
    if len(frames) < 2:
        raise TrajectoryFormatError("trajectory needs at least two frames to define dt")
    t = np.array(times)
    steps = np.diff(t)
    dt = float(steps[0])
    if not dt > 0:
        raise TrajectoryFormatError("frame 1: time does not increase")
    bad = np.nonzero(np.abs(steps - dt) > _DT_RTOL * dt)[0]
    if bad.size:
        raise TrajectoryFormatError(
            f"frame {bad[0] + 1}: non-uniform time step ({steps[bad[0]]!r} fs vs {dt!r} fs)"
        )
    return Trajectory(
        convert_length(np.array(frames), "angstrom", "bohr"),
        convert_time(dt, "fs", "au_time"),
        species,
        convert_time(float(t[0]), "fs", "au_time"),
    )


# ---------------------------------------------------------------------------
# correlation functions
# ---------------------------------------------------------------------------


def collective_phase(traj: Trajectory, q) -> np.ndarray:
    """rho(t_j) = sum_n exp(i Q.R_n(t_j))."""
    q = np.asarray(q, dtype=float).reshape(3)
    return np.exp(1j * (traj.positions @ q)).sum(axis=1)


def intermediate_scattering(
    traj: Trajectory, q, avg_origins: bool = False, max_lag: int | None = None
) -> np.ndarray:
    """F(Q, t_j) for lags j = 0..max_lag.

    Single origin: rho(t_j) conj(rho(0)), all frames by default.
    Averaged: mean over origins s of rho(t_{s+j}) conj(rho(t_s)); the default
    maximum lag is half the trajectory.
    """
    rho = collective_phase(traj, q)
    nf = traj.n_frames
    if avg_origins:
        max_lag = nf // 2 if max_lag is None else max_lag
        if not 0 <= max_lag < nf:
            raise ValueError("max_lag out of range")
        size = 1 << int(math.ceil(math.log2(2 * nf)))
        spec = np.fft.fft(rho, size)
        acf = np.fft.ifft(np.abs(spec) ** 2)[: max_lag + 1]
        return acf / (nf - np.arange(max_lag + 1))
    max_lag = nf - 1 if max_lag is None else max_lag
    if not 0 <= max_lag < nf:
        raise ValueError("max_lag out of range")
    return rho[: max_lag + 1] * np.conj(rho[0])


def window_weights(kind: str, n_lags: int) -> np.ndarray:
    """One-sided taper w_j, j = 0..n_lags-1, with w_0 = 1."""
    if kind not in WINDOWS:
        raise ValueError(f"unknown window {kind!r}; expected one of {WINDOWS}")
    if kind == "rectangular" or n_lags == 1:
        return np.ones(n_lags)
    j = np.arange(n_lags)
    return np.cos(0.5 * math.pi * j / (n_lags - 1)) ** 2


def _transform(f: np.ndarray, w: np.ndarray, dt: float, domega: np.ndarray) -> np.ndarray:
    g = w * f
    t = dt * np.arange(1, g.size)
    out = np.empty(domega.size)
    chunk = max(1, _CHUNK // max(t.size, 1))
    for lo in range(0, domega.size, chunk):
        phase = np.exp(-1j * np.outer(domega[lo : lo + chunk], t))
        out[lo : lo + chunk] = g[0].real + 2.0 * np.real(phase @ g[1:])
    return dt / (2 * math.pi) * out


def _check_nyquist(domega: np.ndarray, dt: float) -> None:
    limit = math.pi / dt
    if np.any(np.abs(domega) > limit * (1 + 1e-12)):
        raise NyquistError(f"|domega| exceeds the Nyquist frequency pi/dt = {limit!r} hartree")


def _bin_width(grid: np.ndarray) -> float:
    return float(np.min(np.diff(grid))) if grid.size > 1 else 0.0


def dynamic_structure_factor(
    traj: Trajectory,
    q,
    omega_grid,
    window: str = "rectangular",
    avg_origins: bool = False,
    max_lag: int | None = None,
) -> SpectralMap:
    """S(Q, domega) on ``omega_grid`` (hartree), per hartree.

    Raises
    ------
    NyquistError
        If the grid extends beyond pi/dt.
    """
    domega = np.asarray(omega_grid, dtype=float)
    _check_nyquist(domega, traj.dt)
    f = intermediate_scattering(traj, q, avg_origins, max_lag)
    w = window_weights(window, f.size)
    s = _transform(f, w, traj.dt, domega)
    two_sided = np.concatenate([w[:0:-1], w])
    norm = {
        "window": window,
        "time_span_au": traj.dt * (f.size - 1),
        "dt_au": traj.dt,
        "bin_width_hartree": _bin_width(domega),
        "coherent_gain": float(two_sided.mean()),
        "sum_rule_factor": 1.0 / w[0],
        "origins": "averaged" if avg_origins else "single",
        "n_lags": int(f.size),
    }
    return SpectralMap((("domega_hartree", domega),), s, norm)


def sqw_scan(
    traj: Trajectory,
    q_direction,
    q_grid,
    omega_grid,
    window: str = "rectangular",
    avg_origins: bool = False,
    threads: int = 1,
) -> SpectralMap:
    """S on a (|Q|, domega) grid with Q along a fixed direction."""
    d = np.asarray(q_direction, dtype=float)
    d = d / np.linalg.norm(d)
    qs = np.asarray(q_grid, dtype=float)

    def one(qm):
        return dynamic_structure_factor(traj, qm * d, omega_grid, window, avg_origins)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, qs))
    else:
        rows = [one(x) for x in qs]
    norm = dict(rows[0].normalization) if rows else {}
    norm["q_direction"] = tuple(float(x) for x in d)
    vals = np.array([r.values for r in rows])
    return SpectralMap((("q_inv_bohr", qs), ("domega_hartree", np.asarray(omega_grid, float))), vals, norm)


def static_sum_rule(s: SpectralMap, traj: Trajectory, q) -> float:
    """|int S d(domega) - F(Q, 0)| / N^2, with the window's sum-rule factor applied.

    F(Q, 0) is |sum_n exp(i Q.R_n(0))|^2 for a single origin and its average
    over origins when S was computed with origin averaging.
    """
    grid = s.axes[0][1]
    integral = np.trapezoid(s.values, grid) * float(s.normalization.get("sum_rule_factor", 1.0))
    rho = collective_phase(traj, q)
    if s.normalization.get("origins") == "averaged":
        f0 = float(np.mean(np.abs(rho) ** 2))
    else:
        f0 = float(abs(rho[0]) ** 2)
    return abs(integral - f0) / traj.n_atoms**2


# ---------------------------------------------------------------------------
# van Hove transforms
# ---------------------------------------------------------------------------


def _uniform(name: str, g: np.ndarray) -> float:
    if g.size < 2:
        raise ValueError(f"axis {name!r} needs at least two points")
    d = np.diff(g)
    if np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
        raise ValueError(f"axis {name!r} must be uniform")
    return float(d[0])


def _conjugate_axis(n: int, step: float) -> np.ndarray:
    """Centered grid conjugate to ``n`` samples of spacing ``step``."""
    return (np.arange(n) - n // 2) * (2 * math.pi / (n * step))


def _edge_fraction(values: np.ndarray, axes: tuple[int, ...]) -> float:
    a = np.abs(values)
    total = a.sum()
    if total == 0:
        return 0.0
    edge = np.zeros(a.shape, dtype=bool)
    for ax in axes:
        idx = [slice(None)] * a.ndim
        idx[ax] = 0
        edge[tuple(idx)] = True
        idx[ax] = -1
        edge[tuple(idx)] = True
    return float(a[edge].sum() / total)


def _dft_axis(values, ax: int, k0: float, dk: float, x: np.ndarray, sign: int) -> np.ndarray:
    """sum_i v_i exp(sign * i * (k0 + i dk) * x_m) along axis ``ax``, x centered."""
    n = values.shape[ax]
    v = np.moveaxis(values, ax, -1)
    # x_m = (m - n//2) * 2 pi / (n dk); with i indexing k
    idx = np.arange(n)
    pre = np.exp(sign * 1j * idx * dk * x[0])  # shift of the output origin
    v = v * pre
    out = np.fft.fft(v, axis=-1) if sign < 0 else np.fft.ifft(v, axis=-1) * n
    out = out * np.exp(sign * 1j * k0 * x)
    return np.moveaxis(out, -1, ax)


def _check_time_aliasing(s_map: SpectralMap, dw: float, n: int) -> None:
    """Warn when the omega sampling cannot hold the lag span of the source F(t)."""
    norm = s_map.normalization
    if "n_lags" not in norm or "dt_au" not in norm:
        return
    span = 2 * (int(norm["n_lags"]) - 1) * float(norm["dt_au"])
    period = 2 * math.pi / dw
    if span >= period * (1 - 1e-12):
        warnings.warn(
            f"omega spacing {dw:g} folds lags beyond |t| = {period / 2:g} a.u. "
            f"(source spans +-{span / 2:g} a.u.); G(R,t) is time-aliased",
            AliasingWarning,
            stacklevel=3,
        )


def van_hove_transform(s_map: SpectralMap, n_atoms: int) -> SpectralMap:
    """G(R, t) from S on a regular (qx, qy, qz, domega) lattice.

    G = 1/((2 pi)^3 N) int d^3Q d(domega) exp(i(domega t - Q.R)) S, evaluated
    as a discrete Fourier sum.  The output grids are the conjugates of the
    input spacings, centered on zero.  Issues :class:`AliasingWarning` when
    S carries more than 1e-3 of its absolute weight on the grid boundary.
    """
    if len(s_map.axes) != 4:
        raise ValueError("expected axes (qx, qy, qz, domega)")
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    grids = [g for _, g in s_map.axes]
    steps = [_uniform(n, g) for n, g in s_map.axes]
    frac = _edge_fraction(s_map.values, (0, 1, 2, 3))
    if frac > _ALIAS_TOL:
        warnings.warn(
            f"S has {frac:.2e} of its weight on the grid boundary; G(R,t) is aliased "
            "at about that relative level",
            AliasingWarning,
            stacklevel=2,
        )
    _check_time_aliasing(s_map, steps[3], grids[3].size)
    out_axes = [_conjugate_axis(g.size, st) for g, st in zip(grids, steps)]
    v = np.asarray(s_map.values, dtype=complex)
    for ax in range(3):
        v = _dft_axis(v, ax, grids[ax][0], steps[ax], out_axes[ax], -1)
    v = _dft_axis(v, 3, grids[3][0], steps[3], out_axes[3], +1)
    v *= np.prod(steps) / ((2 * math.pi) ** 3 * n_atoms)
    norm = dict(s_map.normalization)
    norm.update(
        {
            "n_atoms": int(n_atoms),
            "q_origin": tuple(float(g[0]) for g in grids[:3]),
            "omega_origin": float(grids[3][0]),
            "edge_fraction": frac,
        }
    )
    names = ("rx_bohr", "ry_bohr", "rz_bohr", "t_au")
    return SpectralMap(tuple(zip(names, out_axes)), v, norm)


def scattering_from_van_hove(g_map: SpectralMap, n_atoms: int | None = None) -> SpectralMap:
    """Inverse of :func:`van_hove_transform`: S = N/(2 pi) int d^3R dt exp(-i(w t - Q.R)) G."""
    norm = dict(g_map.normalization)
    n = int(n_atoms if n_atoms is not None else norm["n_atoms"])
    grids = [g for _, g in g_map.axes]
    steps = [_uniform(nm, g) for nm, g in g_map.axes]
    q0 = list(norm.get("q_origin", (0.0, 0.0, 0.0))) + [float(norm.get("omega_origin", 0.0))]
    # output (Q, w) grids start at the recorded origins with the conjugate spacing
    k_steps = [2 * math.pi / (g.size * st) for g, st in zip(grids, steps)]
    k_axes = [q0[i] + k_steps[i] * np.arange(grids[i].size) for i in range(4)]
    v = np.asarray(g_map.values, dtype=complex)
    for ax in range(3):
        v = _dft_axis(v, ax, grids[ax][0], steps[ax], k_axes[ax], +1)
    v = _dft_axis(v, 3, grids[3][0], steps[3], k_axes[3], -1)
    v *= np.prod(steps) * n / (2 * math.pi)
    names = ("qx_inv_bohr", "qy_inv_bohr", "qz_inv_bohr", "domega_hartree")
    return SpectralMap(tuple(zip(names, k_axes)), v, norm)


def van_hove_isotropic(s_map: SpectralMap, n_atoms: int, r_grid) -> SpectralMap:
    """Powder-averaged G(r, t) from S on a (|Q|, domega) grid.

    G(r, t) = 1/(2 pi^2 N) int Q^2 sinc(Q r) I(Q, t) dQ with
    I(Q, t) = int d(domega) exp(i domega t) S(Q, domega).
    """
    if len(s_map.axes) != 2:
        raise ValueError("expected axes (q, domega)")
    (qn, q), (wn, w) = s_map.axes
    dw = _uniform(wn, w)
    frac = _edge_fraction(s_map.values, (0, 1))
    if frac > _ALIAS_TOL:
        warnings.warn(
            f"S has {frac:.2e} of its weight on the grid boundary", AliasingWarning, stacklevel=2
        )
    _check_time_aliasing(s_map, dw, w.size)
    t = _conjugate_axis(w.size, dw)
    i_qt = _dft_axis(np.asarray(s_map.values, dtype=complex), 1, w[0], dw, t, +1) * dw
    r = np.asarray(r_grid, dtype=float)
    kernel = q[None, :] ** 2 * np.sinc(np.outer(r, q) / math.pi)
    g = np.trapezoid(kernel[:, :, None] * i_qt[None, :, :], q, axis=1) / (2 * math.pi**2 * n_atoms)
    norm = dict(s_map.normalization)
    norm.update({"n_atoms": int(n_atoms), "edge_fraction": frac})
    return SpectralMap((("r_bohr", r), ("t_au", t)), g, norm)


def sqw_lattice(
    traj: Trajectory,
    q_axes,
    omega_grid,
    window: str = "rectangular",
    avg_origins: bool = False,
    threads: int = 1,
) -> SpectralMap:
    """S on a regular (qx, qy, qz) lattice times an omega grid, for van Hove transforms."""
    qx, qy, qz = (np.asarray(a, dtype=float) for a in q_axes)
    pts = np.array(np.meshgrid(qx, qy, qz, indexing="ij")).reshape(3, -1).T

    def one(qv):
        return dynamic_structure_factor(traj, qv, omega_grid, window, avg_origins)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            maps = list(ex.map(one, pts))
    else:
        maps = [one(p) for p in pts]
    w = np.asarray(omega_grid, dtype=float)
    vals = np.array([m.values for m in maps]).reshape(qx.size, qy.size, qz.size, w.size)
    axes = (("qx_inv_bohr", qx), ("qy_inv_bohr", qy), ("qz_inv_bohr", qz), ("domega_hartree", w))
    return SpectralMap(axes, vals, maps[0].normalization)


# ---------------------------------------------------------------------------
# double-differential Thomson cross section
# ---------------------------------------------------------------------------


def _f0_callable(atomic_f0):
    if isinstance(atomic_f0, Spectrum):
        q = atomic_f0.axis
        vals = atomic_f0[atomic_f0.labels[0]]

        def f(x):
            if x < q[0] - 1e-12 or x > q[-1] + 1e-12:
                raise ValueError(f"|Q| = {x!r} outside the tabulated form factor")
            return float(np.interp(x, q, vals))

        return f
    if callable(atomic_f0):
        return atomic_f0
    c = float(atomic_f0)
    return lambda x: c


def _ddcs_norm(extra: dict) -> dict:
    out = {"channel": "A2-only"}
    out.update(extra)
    return out


def thomson_ddcs(
    geometry: ScatteringGeometry,
    atomic_f0,
    s_map: SpectralMap,
    omega_f_grid,
    polarization=None,
) -> SpectralMap:
    """d2sigma/(dOmega domega_F) from a fixed-Q S map (bohr^2 / (sr hartree)).

    ``atomic_f0`` is a callable of |Q|, a tabulated form-factor
    :class:`Spectrum`, or a constant.  S is interpolated linearly in
    domega = omega_in - omega_F.  |f0| is evaluated at the inelastic |Q|
    with |k_F| = alpha omega_F.

    Raises
    ------
    ValueError
        If some domega falls outside the S grid.
    """
    wf = np.asarray(omega_f_grid, dtype=float)
    w_in = geometry.incoming.omega
    grid = s_map.axes[0][1]
    dw = w_in - wf
    if np.any(dw < grid[0] - 1e-12) or np.any(dw > grid[-1] + 1e-12):
        raise ValueError("omega_in - omega_F outside the S(Q, domega) grid")
    s = np.interp(dw, grid, s_map.values)
    f0 = _f0_callable(atomic_f0)
    pol = polarization_sum(geometry, polarization)
    qs = [np.linalg.norm(geometry.q_vector(x)) for x in wf]
    ff = np.array([f0(x) for x in qs])
    vals = ALPHA**4 * (wf / w_in) * pol * ff**2 * s
    return SpectralMap((("omega_f_hartree", wf),), vals, _ddcs_norm(dict(s_map.normalization)))


def thomson_ddcs_trajectory(
    geometry: ScatteringGeometry,
    atomic_f0,
    traj: Trajectory,
    omega_f_grid,
    window: str = "rectangular",
    avg_origins: bool = False,
    static_approx: bool = False,
    polarization=None,
    threads: int = 1,
) -> SpectralMap:
    """Like :func:`thomson_ddcs` but with S evaluated at each omega_F's own Q.

    ``static_approx`` uses the elastic Q (|k_F| = |k_in|) for S and f0.
    """
    wf = np.asarray(omega_f_grid, dtype=float)
    w_in = geometry.incoming.omega
    f0 = _f0_callable(atomic_f0)
    pol = polarization_sum(geometry, polarization)

    def one(x):
        qv = geometry.q_vector(None if static_approx else x)
        s = dynamic_structure_factor(traj, qv, [w_in - x], window, avg_origins)
        return ALPHA**4 * (x / w_in) * pol * f0(float(np.linalg.norm(qv))) ** 2 * s.values[0], s

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(one, wf))
    else:
        res = [one(x) for x in wf]
    vals = np.array([r[0] for r in res])
    norm = dict(res[0][1].normalization) if res else {}
    norm["kinematics"] = "elastic-Q" if static_approx else "inelastic-Q"
    return SpectralMap((("omega_f_hartree", wf),), vals, _ddcs_norm(norm))
