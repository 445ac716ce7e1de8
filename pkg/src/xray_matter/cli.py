"""Command-line front end: ``xray-matter {convert,abs,elastic,sqw,rixs}``.

Model input comes from an INI file (``--config``); results are written as
CSV with ``#`` comment lines recording the tool version, the config hash,
model flags and normalization.  Exit codes: 0 success, 1 computation or
input-data failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .elastic import (
    UNPOLARIZED,
    QuadratureError,
    ScatteringGeometry,
    form_factor_curve,
    polarization_sum,
)
from .photoabs import PhotonMode, SubshellSpec, absorption_spectrum
from .radial import (
    ElectronDensity,
    PotentialModel,
    RadialGrid,
    RadialSolverError,
    build_density,
    default_grid,
    parse_shell_label,
    solve_bound,
)
from .rixs import (
    Broadening,
    CIIntermediate,
    LevelOrderingError,
    RIXSLevelModel,
    peak_ridge,
    ridge_slope,
    rixs_map,
)
from .sqw import (
    WINDOWS,
    NyquistError,
    TrajectoryFormatError,
    dynamic_structure_factor,
    load_trajectory,
    sqw_scan,
    static_sum_rule,
    thomson_ddcs_trajectory,
    van_hove_isotropic,
)
from .units import (
    CONSTANTS,
    UnitError,
    convert_cross_section,
    convert_energy,
    convert_length,
    convert_time,
)



def _diag(kind: str, msg: str) -> None:
    print(f"xray-matter: {kind}: {msg}", file=sys.stderr)


def _showwarning(message, category, filename, lineno, file=None, line=None):
    _diag("warning", f"{category.__name__}: {message}")


class ConfigError(Exception):
    """Missing or malformed configuration (exit 2)."""


class ComputeError(Exception):
    """Computation or input-data failure (exit 1)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class Config:
    """Typed access to an INI file; values are read in ``units`` (au or lab)."""

    def __init__(self, path: str | None, units: str):
        self.units = units
        self.path = Path(path) if path else None
        self.parser = configparser.ConfigParser(
            inline_comment_prefixes=("#", ";"), interpolation=None
        )
        self.parser.optionxform = str
        self.raw = b""
        if self.path is not None:
            try:
                self.raw = self.path.read_bytes()
                self.parser.read_string(self.raw.decode("utf-8"), source=str(self.path))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            except (configparser.Error, UnicodeDecodeError) as exc:
                raise ConfigError(f"malformed config: {exc}") from None

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def items(self, section: str) -> list[tuple[str, str]]:
        if not self.parser.has_section(section):
            return []
        return list(self.parser.items(section))

    def sections(self, prefix: str = "") -> list[str]:
        return [s for s in self.parser.sections() if s.startswith(prefix)]

    def get(self, section: str, key: str, default=None) -> str:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if default is None:
            raise ConfigError(f"missing key [{section}] {key}")
        return default

    def get_float(self, section: str, key: str, default=None, kind: str | None = None) -> float:
        raw = self.get(section, key, None if default is None else repr(default))
        return self.to_au(_float(raw, f"[{section}] {key}"), kind)

    def get_int(self, section: str, key: str, default=None) -> int:
        raw = self.get(section, key, None if default is None else str(default))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        if not self.parser.has_option(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def get_vector(self, section: str, key: str, default=None, kind: str | None = None) -> np.ndarray:
        raw = self.get(section, key, None if default is None else ",".join(map(repr, default)))
        v = np.array([_float(x, f"[{section}] {key}") for x in raw.split(",")])
        if v.size != 3:
            raise ConfigError(f"[{section}] {key}: expected three components")
        return self.to_au(v, kind)

    def to_au(self, value, kind: str | None):
        """Convert a config value to atomic units under ``--units lab``."""
        if self.units == "au" or kind is None:
            return value
        if kind == "energy":
            return convert_energy(value, "ev", "hartree")
        if kind == "length":
            return convert_length(value, "angstrom", "bohr")
        if kind == "wavenumber":
            # 1/angstrom -> 1/bohr
            return value * CONSTANTS.bohr_in_angstrom
        if kind == "time":
            return convert_time(value, "fs", "au_time")
        raise ValueError(kind)

    def grid(self, section: str, stem: str, kind: str | None) -> np.ndarray:
        """``<stem> = v1, v2, ...`` or ``<stem>_min``, ``<stem>_max``, ``n_<stem>``."""
        if self.has(section, stem):
            raw = self.get(section, stem)
            g = np.array([_float(x, f"[{section}] {stem}") for x in raw.split(",")])
        else:
            lo = self.get_float(section, f"{stem}_min")
            hi = self.get_float(section, f"{stem}_max")
            n = self.get_int(section, f"n_{stem}")
            if n < 1:
                raise ConfigError(f"[{section}] n_{stem} must be >= 1")
            g = np.linspace(lo, hi, n)
        g = self.to_au(g, kind)
        if g.size == 0 or not np.all(np.isfinite(g)):
            raise ConfigError(f"[{section}] {stem}: grid must be finite and non-empty")
        if g.size > 1 and not np.all(np.diff(g) > 0):
            raise ConfigError(f"[{section}] {stem}: grid must be strictly increasing")
        return g


def _float(raw: str, what: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{what}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{what}: value must be finite")
    return v


def _complex(raw: str, what: str) -> complex:
    try:
        v = complex(raw.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"{what}: expected a complex number, got {raw!r}") from None
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise ConfigError(f"{what}: value must be finite")
    return v


def _pairs(raw: str, what: str) -> dict[str, float]:
    """``name:value, name:value`` -> dict."""
    out = {}
    for item in filter(None, (x.strip() for x in raw.split(","))):
        if ":" not in item:
            raise ConfigError(f"{what}: expected name:value, got {item!r}")
        k, v = item.split(":", 1)
        out[k.strip()] = _float(v, what)
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _flatten(d) -> str:
    parts = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, np.generic):
            v = v.item()
        if isinstance(v, float):
            v = repr(v)
        elif isinstance(v, (tuple, list)):
            v = "(" + " ".join(repr(float(x)) for x in v) + ")"
        parts.append(f"{k}={v}")
    return "; ".join(parts)


def write_csv(path, header: list[str], rows, meta: dict, cfg: Config, command: str) -> None:
    """Validate and write; ``meta`` maps comment keys to dicts or strings."""
    data = np.asarray(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(data)):
        raise ComputeError("refusing to write non-finite values")
    lines = [
        f"# xray-matter {__version__}",
        f"# command: {command}",
        f"# config_sha256: {cfg.sha256}",
        f"# input_units: {cfg.units}",
    ]
    for key, val in meta.items():
        lines.append(f"# {key}: {_flatten(val) if isinstance(val, dict) else val}")
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(x) for x in row) for row in data)
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _warn_zero_columns(header, data, skip: int = 0) -> None:
    data = np.asarray(data, dtype=float).reshape(-1, len(header))
    for j, name in enumerate(header[skip:], start=skip):
        if not np.any(data[:, j]):
            _diag("warning", f"column {name} is identically zero")


# ---------------------------------------------------------------------------
# shared model pieces
# ---------------------------------------------------------------------------


def _radial_grid(cfg: Config) -> RadialGrid:
    if not cfg.has("radial"):
        return default_grid()
    return RadialGrid.exponential(
        cfg.get_float("radial", "r_min", 1e-5, "length"),
        cfg.get_float("radial", "r_max", 250.0, "length"),
        cfg.get_int("radial", "n", 4000),
    )


def _potential(cfg: Config) -> PotentialModel:
    kind = cfg.get("model", "potential", "coulomb").lower()
    z = cfg.get_float("model", "z")
    if kind == "coulomb":
        return PotentialModel.coulomb(z)
    if kind == "screened":
        return PotentialModel.screened(z, _pairs(cfg.get("model", "screening"), "[model] screening"))
    raise ConfigError(f"[model] potential: unknown kind {kind!r}")


def _shells(cfg: Config) -> list[tuple[str, float]]:
    items = cfg.items("shells")
    if not items:
        raise ConfigError("missing [shells] section")
    out = []
    for label, occ in items:
        try:
            parse_shell_label(label)
        except ValueError as exc:
            raise ConfigError(f"[shells] {label}: {exc}") from None
        out.append((label, _float(occ, f"[shells] {label}")))
    return out


def _bound_orbitals(cfg: Config, pot: PotentialModel, grid: RadialGrid):
    out = []
    for label, occ in _shells(cfg):
        n, l = parse_shell_label(label)
        try:
            out.append((label, solve_bound(pot, n, l, grid), occ))
        except KeyError as exc:
            raise ConfigError(f"shell {label}: {exc}") from None
        except RadialSolverError as exc:
            raise ComputeError(f"shell {label}: {exc}") from None
    return out


def _density(cfg: Config) -> ElectronDensity:
    kind = cfg.get("model", "density", "orbitals").lower()
    grid = _radial_grid(cfg)
    if kind == "gaussian":
        return ElectronDensity.gaussian(
            cfg.get_float("model", "sigma", kind="length"),
            cfg.get_float("model", "n_electrons"),
            grid,
        )
    if kind == "orbitals":
        orbs = _bound_orbitals(cfg, _potential(cfg), grid)
        return build_density([(o, occ) for _, o, occ in orbs], grid)
    raise ConfigError(f"[model] density: unknown kind {kind!r}")


_POLARIZATIONS = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0)}


def _polarization(cfg: Config, section: str):
    tag = cfg.get(section, "polarization", "x").lower()
    if tag == UNPOLARIZED:
        return UNPOLARIZED
    if tag not in _POLARIZATIONS:
        raise ConfigError(f"[{section}] polarization: expected x, y or unpolarized")
    return tag


def _geometry(cfg: Config, section: str, omega: float) -> tuple[ScatteringGeometry, object]:
    pol = _polarization(cfg, section)
    vec = _POLARIZATIONS["x" if pol == UNPOLARIZED else pol]
    theta = math.radians(cfg.get_float(section, "theta_deg"))
    phi = math.radians(cfg.get_float(section, "phi_deg", 0.0))
    try:
        geo = ScatteringGeometry.from_angles(omega, theta, phi, vec)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None
    return geo, (UNPOLARIZED if pol == UNPOLARIZED else None)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


_CONVERTERS = {
    "energy": convert_energy,
    "area": convert_cross_section,
    "length": convert_length,
    "time": convert_time,
}


def cmd_convert(args, cfg: Config) -> None:
    rows = []
    for quantity, fn in _CONVERTERS.items():
        value = getattr(args, quantity)
        if value is None:
            continue
        if not math.isfinite(value):
            raise ConfigError("value must be finite")
        try:
            out = fn(value, args.from_unit, args.to_unit)
        except UnitError as exc:
            raise ConfigError(str(exc)) from None
        rows.append(f"{quantity},{_fmt(value)},{args.from_unit},{_fmt(out)},{args.to_unit}")
    text = "\n".join([f"# xray-matter {__version__}", "quantity,value,from,converted,to", *rows]) + "\n"
    if args.output is None:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")


def cmd_abs(args, cfg: Config) -> None:
    grid = _radial_grid(cfg)
    pot = _potential(cfg)
    omega = cfg.grid("grid", "omega", "energy")
    if not omega[0] > 0:
        raise ConfigError("[grid] omega must be positive")
    l_max = cfg.get_int("model", "l_max", 3)
    retard = cfg.get_bool("model", "retardation", True) and not args.dipole
    unpol = _polarization(cfg, "model") == UNPOLARIZED
    pol = _POLARIZATIONS["x" if unpol else _polarization(cfg, "model")]
    mode = PhotonMode.linear(float(omega[0]), (0.0, 0.0, 1.0), pol)
    header = ["omega_hartree", "omega_ev"]
    cols = [omega, convert_energy(omega, "hartree", "ev")]
    total = np.zeros_like(omega)
    for label, orb, occ in _bound_orbitals(cfg, pot, grid):
        try:
            spec = absorption_spectrum(
                [SubshellSpec(orb, occ, label)], omega, pot, mode, l_max, retard, unpol, args.threads
            )
        except ValueError as exc:
            raise ConfigError(f"shell {label}: {exc}") from None
        except RadialSolverError as exc:
            raise ComputeError(f"shell {label}: {exc}") from None
        mb = convert_cross_section(spec[label], "au_area", "megabarn")
        header.append(f"{label}_Mb")
        cols.append(mb)
        total = total + mb
    header.append("total_Mb")
    cols.append(total)
    data = np.column_stack(cols)
    _warn_zero_columns(header, data, skip=2)
    meta = {
        "model": {
            "potential": pot.tag,
            "L_max": l_max,
            "retardation": retard,
            "polarization": "unpolarized" if unpol else "linear",
            "final_state": "mean-field unity overlap",
        },
        "normalization": "cross sections in megabarn per atom",
    }
    write_csv(args.output, header, data, meta, cfg, "abs")


def cmd_elastic(args, cfg: Config) -> None:
    density = _density(cfg)
    q = cfg.grid("grid", "q", "wavenumber")
    omega = cfg.get_float("geometry", "omega", kind="energy")
    if not omega > 0:
        raise ConfigError("[geometry] omega must be positive")
    kmax = 2.0 * CONSTANTS.alpha * omega
    if q[0] < 0 or q[-1] > kmax * (1 + 1e-14):
        raise ConfigError(f"[grid] q must lie in [0, 2 alpha omega] = [0, {kmax!r}] inverse bohr")
    pol = _polarization(cfg, "geometry")
    vec = _POLARIZATIONS["x" if pol == UNPOLARIZED else pol]
    phi = math.radians(cfg.get_float("geometry", "phi_deg", 0.0))
    try:
        f0 = form_factor_curve(density, q, args.threads)["f0"]
    except QuadratureError as exc:
        raise ComputeError(str(exc)) from None
    dcs = []
    for qm, f in zip(q, f0):
        geo = ScatteringGeometry.from_q(omega, min(float(qm), kmax), phi, vec)
        p = polarization_sum(geo, UNPOLARIZED if pol == UNPOLARIZED else None)
        dcs.append(CONSTANTS.alpha**4 * p * f * f)
    dcs = convert_cross_section(np.array(dcs), "au_area", "barn")
    header = ["q_inv_bohr", "f0", "dcs_barn_per_sr"]
    data = np.column_stack([q, f0, dcs])
    meta = {
        "model": {
            "channel": "A2-only",
            "density": cfg.get("model", "density", "orbitals"),
            "n_electrons": density.n_electrons,
            "omega_hartree": omega,
            "phi_deg": math.degrees(phi),
            "polarization": pol,
        },
        "normalization": "dcs in barn per steradian; f0 in electrons",
    }
    write_csv(args.output, header, data, meta, cfg, "elastic")


def _trajectory(args, cfg: Config):
    path = args.trajectory or cfg.get("trajectory", "path")
    p = Path(path)
    if not p.is_absolute() and cfg.path is not None and args.trajectory is None:
        p = cfg.path.parent / p
    try:
        return load_trajectory(p)
    except OSError as exc:
        raise ComputeError(f"cannot read trajectory: {exc}") from None
    except TrajectoryFormatError as exc:
        raise ComputeError(str(exc)) from None


def cmd_sqw(args, cfg: Config) -> None:
    traj = _trajectory(args, cfg)
    out = cfg.get("sqw", "output", "s").lower()
    window = cfg.get("sqw", "window", "rectangular").lower()
    if window not in WINDOWS:
        raise ConfigError(f"[sqw] window: expected one of {sorted(WINDOWS)}")
    avg = args.avg_origins or cfg.get_bool("sqw", "avg_origins", False)
    meta: dict = {"model": {"nuclei": "classical", "origins": "averaged" if avg else "single"}}
    try:
        if out == "s":
            q = cfg.get_vector("sqw", "q_vector", kind="wavenumber")
            dw = cfg.grid("sqw", "domega", "energy")
            s = dynamic_structure_factor(traj, q, dw, window, avg)
            meta["normalization"] = dict(s.normalization)
            meta["sum_rule_residual"] = repr(float(static_sum_rule(s, traj, q)))
            header, data = ["domega_hartree", "S"], np.column_stack([dw, s.values])
        elif out == "map":
            d = cfg.get_vector("sqw", "q_direction", (0.0, 0.0, 1.0))
            q = cfg.grid("sqw", "q", "wavenumber")
            dw = cfg.grid("sqw", "domega", "energy")
            s = sqw_scan(traj, d, q, dw, window, avg, args.threads)
            meta["normalization"] = dict(s.normalization)
            qq, ww = np.meshgrid(q, dw, indexing="ij")
            header, data = ["q", "domega", "S"], np.column_stack([qq.ravel(), ww.ravel(), s.values.ravel()])
        elif out == "ddcs":
            omega = cfg.get_float("geometry", "omega", kind="energy")
            geo, pol = _geometry(cfg, "geometry", omega)
            wf = cfg.grid("sqw", "omega_f", "energy")
            f0 = cfg.get_float("sqw", "f0", 1.0)
            static = args.static_approx or cfg.get_bool("sqw", "static_approx", False)
            m = thomson_ddcs_trajectory(geo, f0, traj, wf, window, avg, static, pol, args.threads)
            meta["normalization"] = dict(m.normalization)
            vals = convert_cross_section(np.asarray(m.values), "au_area", "barn")
            header = ["omega_f_hartree", "ddcs_barn_per_sr_per_hartree"]
            data = np.column_stack([wf, vals])
        elif out == "vanhove":
            d = cfg.get_vector("sqw", "q_direction", (0.0, 0.0, 1.0))
            q = cfg.grid("sqw", "q", "wavenumber")
            dw = cfg.grid("sqw", "domega", "energy")
            r = cfg.grid("sqw", "r", "length")
            s = sqw_scan(traj, d, q, dw, window, avg, args.threads)
            g = van_hove_isotropic(s, traj.n_atoms, r)
            meta["normalization"] = dict(g.normalization)
            meta["imag_max_abs"] = repr(float(np.max(np.abs(np.imag(g.values)))))
            rr, tt = np.meshgrid(g.axes[0][1], g.axes[1][1], indexing="ij")
            header = ["r", "t", "G"]
            data = np.column_stack([rr.ravel(), tt.ravel(), np.real(g.values).ravel()])
        else:
            raise ConfigError("[sqw] output: expected s, map, ddcs or vanhove")
    except NyquistError as exc:
        raise ConfigError(str(exc)) from None
    _warn_zero_columns(header, data, skip=len(header) - 1)
    write_csv(args.output, header, data, meta, cfg, "sqw")


def _rixs_model(cfg: Config, check: bool) -> RIXSLevelModel:
    levels = {}
    for key in ("unoccupied", "valence"):
        pairs = _pairs(cfg.get("levels", key), f"[levels] {key}")
        levels[key] = {k: cfg.to_au(v, "energy") for k, v in pairs.items()}
    unocc, val = levels["unoccupied"], levels["valence"]
    m_abs, m_em = {}, {}
    for key, raw in cfg.items("matrix_elements"):
        kind, _, orb = key.partition(".")
        target = {"abs": m_abs, "em": m_em}.get(kind)
        if target is None or not orb:
            raise ConfigError(f"[matrix_elements] {key}: expected abs.<orbital> or em.<orbital>")
        target[orb] = _complex(raw, f"[matrix_elements] {key}")
    try:
        return RIXSLevelModel(
            cfg.get_float("levels", "core", kind="energy"),
            unocc,
            val,
            m_abs,
            m_em,
            cfg.get_float("levels", "gamma", kind="energy"),
            check_ordering=check,
            core_label=cfg.get("levels", "core_label", "i"),
        )
    except LevelOrderingError as exc:
        raise ComputeError(str(exc)) from None
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"[levels]: {exc}") from None


def _intermediates(cfg: Config) -> list[CIIntermediate] | None:
    secs = cfg.sections("ci.")
    if not secs:
        return None
    out = []
    for sec in secs:
        singles, doubles = {}, {}
        energy, m0 = None, 0j
        for key, raw in cfg.items(sec):
            if key == "energy":
                energy = cfg.to_au(_float(raw, f"[{sec}] energy"), "energy")
            elif key == "m0":
                m0 = _complex(raw, f"[{sec}] m0")
            elif ">" in key:
                hole, particle = (x.strip() for x in key.split(">", 1))
                singles[(hole, particle)] = _complex(raw, f"[{sec}] {key}")
            elif key.startswith("d."):
                doubles[key[2:]] = _complex(raw, f"[{sec}] {key}")
            else:
                raise ConfigError(f"[{sec}] {key}: expected energy, m0, <hole>><particle> or d.<name>")
        if energy is None:
            raise ConfigError(f"[{sec}] missing energy (E_M - E_0)")
        try:
            out.append(CIIntermediate(sec[3:], energy, singles, m0, doubles))
        except ValueError as exc:
            raise ConfigError(f"[{sec}]: {exc}") from None
    return out


def cmd_rixs(args, cfg: Config) -> None:
    if args.output is None:
        raise ConfigError("rixs needs --output (the ridge file is written next to it)")
    check = cfg.get_bool("levels", "check_ordering", True) and not args.allow_any_ordering
    model = _rixs_model(cfg, check)
    inters = _intermediates(cfg)
    w_in = cfg.grid("grid", "omega_in", "energy")
    wf = cfg.grid("grid", "omega_f", "energy")
    if not (w_in[0] > 0 and wf[0] > 0):
        raise ConfigError("[grid] photon energies must be positive")
    try:
        br = Broadening(
            cfg.get_float("broadening", "width", kind="energy"),
            cfg.get("broadening", "shape", "gaussian").lower(),
        )
    except ValueError as exc:
        raise ConfigError(f"[broadening]: {exc}") from None
    if cfg.has("finals", "list"):
        finals = []
        for item in filter(None, (x.strip() for x in cfg.get("finals", "list").split(","))):
            a, _, b = item.partition("/")
            if a not in model.unoccupied or b not in model.valence:
                raise ConfigError(f"[finals] {item!r}: expected <unoccupied>/<valence>")
            finals.append((a, b))
    else:
        finals = [(a, b) for a in model.unoccupied for b in model.valence]
    smap = rixs_map(model, w_in, wf, finals, br, args.threads, inters)
    meta = {"model": dict(smap.normalization), "normalization": "ddcs in bohr^2 per steradian per hartree"}
    ii, ff = np.meshgrid(w_in, wf, indexing="ij")
    header = ["omega_in_hartree", "omega_f_hartree", "ddcs"]
    data = np.column_stack([ii.ravel(), ff.ravel(), np.asarray(smap.values).ravel()])
    _warn_zero_columns(header, data, skip=2)
    write_csv(args.output, header, data, meta, cfg, "rixs")
    ridge = peak_ridge(smap)
    rmeta = dict(meta)
    rmeta["ridge_slope"] = repr(ridge_slope(ridge)) if len(ridge) >= 2 else "undefined"
    out = Path(args.output)
    write_csv(
        out.with_name(out.stem + ".ridge" + (out.suffix or ".csv")),
        ["omega_in_hartree", "omega_f_peak_hartree"],
        ridge,
        rmeta,
        cfg,
        "rixs",
    )


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI model file")
    common.add_argument("--output", help="CSV path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid scans")
    common.add_argument(
        "--units", choices=("au", "lab"), default="au",
        help="units of config values: au, or lab (eV, angstrom, 1/angstrom)",
    )
    p = argparse.ArgumentParser(prog="xray-matter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", parents=[common], help="unit conversions")
    for q in _CONVERTERS:
        c.add_argument(f"--{q}", type=float)
    c.add_argument("--from", dest="from_unit", required=True)
    c.add_argument("--to", dest="to_unit", required=True)

    a = sub.add_parser("abs", parents=[common], help="photoionization cross sections")
    a.add_argument("--dipole", action="store_true", help="drop retardation (k = 0)")

    sub.add_parser("elastic", parents=[common], help="form factor and elastic dcs")

    s = sub.add_parser("sqw", parents=[common], help="dynamic structure factor from a trajectory")
    s.add_argument("--trajectory", help="extended-XYZ file (overrides [trajectory] path)")
    s.add_argument("--avg-origins", action="store_true")
    s.add_argument("--static-approx", action="store_true")

    r = sub.add_parser("rixs", parents=[common], help="RIXS map and dispersion ridge")
    r.add_argument("--allow-any-ordering", action="store_true", help="skip the e_i < e_b < e_a check")
    return p


_COMMANDS = {
    "convert": cmd_convert,
    "abs": cmd_abs,
    "elastic": cmd_elastic,
    "sqw": cmd_sqw,
    "rixs": cmd_rixs,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "convert":
            if all(getattr(args, q) is None for q in _CONVERTERS):
                parser.error("convert needs one of --energy, --area, --length, --time")
            cfg = Config(None, args.units)
        else:
            if args.config is None:
                raise ConfigError(f"{args.command} needs --config")
            cfg = Config(args.config, args.units)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _showwarning
            _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _diag("error", str(exc))
        return 2
    except (ComputeError, RadialSolverError, ArithmeticError) as exc:
        _diag("error", str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
