"""Plain-text run configuration.

Format: bracketed section headers over ``key = value`` lines, matrices
as row-major flat lists, '#' comments.  Every field has a default, so a
minimal file only states what it changes.  Parsing collects *all*
problems it can find before raising, and semantic messages always name
the offending ``section.key``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .grid import BoundaryKind, Grid1D
from .model import (
    ExchangeMatrix,
    MixtureParams,
    ModelVariant,
    PolytropicLaw,
    TabulatedLaw,
    ViscosityMatrices,
    validate_viscosity,
)
from .scenarios import PROFILE_NAMES, profile_field
from .solver import MixtureState, SolverConfig

__all__ = [
    "ConfigError",
    "ProfileSpec",
    "RunConfig",
    "parse_config",
    "render_config",
    "with_override",
    "build_grid",
    "build_params",
    "build_state",
    "build_solver_config",
]


class ConfigError(ValueError):
    """Carries the full list of problems found in a config text."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ProfileSpec:
    """Named initial profile with numeric parameters."""

    name: str
    args: tuple

    def render(self) -> str:
        return " ".join([self.name] + [_fmt_float(a) for a in self.args])


def _fmt_float(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description (plain values only)."""

    variant: str = "modified"
    n_constituents: int = 1
    mu: tuple = (1.0,)
    lam: tuple = (0.0,)
    pressure_kind: str = "polytropic"
    pressure_k: tuple = (1.0,)
    pressure_gamma: tuple = (2.0,)
    table_rho: tuple = ()
    table_p: tuple = ()
    exchange: tuple | None = None
    grid_length: float = 1.0
    grid_cells: int = 128
    bc: str = "periodic"
    dt_init: float = 1e-3
    cfl: float = 0.45
    t_end: float = 1.0
    density_floor: float | None = None
    steady_tol: float = 1e-10
    max_steps: int = 100_000
    viscous_solve_tol: float = 1e-9
    rho_profiles: tuple = (ProfileSpec("uniform", (1.0,)),)
    u_profiles: tuple = (ProfileSpec("uniform", (0.0,)),)
    cadence: int = 10
    directory: str = "out"
    warnings: tuple = field(default=(), compare=False)


# section -> key -> RunConfig attribute; None marks per-constituent families
_SCHEMA = {
    "model": {"variant": "variant", "n": "n_constituents"},
    "viscosity": {"mu": "mu", "lambda": "lam"},
    "pressure": {
        "kind": "pressure_kind",
        "k": "pressure_k",
        "gamma": "pressure_gamma",
        "rho": "table_rho",
        "p": "table_p",
    },
    "exchange": {"a": "exchange"},
    "grid": {"length": "grid_length", "n_cells": "grid_cells", "bc": "bc"},
    "time": {
        "dt_init": "dt_init",
        "cfl": "cfl",
        "t_end": "t_end",
        "density_floor": "density_floor",
        "steady_tol": "steady_tol",
        "max_steps": "max_steps",
        "viscous_solve_tol": "viscous_solve_tol",
    },
    "initial": None,
    "output": {"cadence": "cadence", "directory": "directory"},
}


def _read_raw(text: str):
    """Syntax pass: section/key/value strings, or a syntax-error list."""
    cp = configparser.ConfigParser(
        delimiters=("=",), inline_comment_prefixes=("#",), strict=True,
        interpolation=None,
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    if not cp.sections():
        raise ConfigError(["syntax: configuration is empty"])
    raw = {}
    for section in cp.sections():
        raw[section] = dict(cp.items(section))
    return raw


def _parse_floats(value):
    return tuple(float(tok) for tok in value.split())


def _parse_profile(value):
    toks = value.split()
    if not toks:
        raise ValueError("empty profile")
    name = toks[0]
    if name not in PROFILE_NAMES:
        raise ValueError(f"unknown profile '{name}'")
    args = tuple(float(t) for t in toks[1:])
    if len(args) != PROFILE_NAMES[name]:
        raise ValueError(
            f"profile '{name}' takes {PROFILE_NAMES[name]} parameters, got {len(args)}"
        )
    return ProfileSpec(name, args)


def _validate(raw) -> RunConfig:
    errors = []
    warn = []
    values = {}

    def fail(section, key, message):
        errors.append(f"{section}.{key}: {message}")

    for section, items in raw.items():
        if section not in _SCHEMA:
            errors.append(f"{section}: unknown section")
            continue
        schema = _SCHEMA[section]
        for key, value in items.items():
            if section == "initial":
                kind, _, index = key.partition("_")
                if kind not in ("rho", "u") or not index.isdigit():
                    fail(section, key, "expected rho_<i> or u_<i>")
                    continue
                try:
                    values.setdefault(section, {})[key] = _parse_profile(value)
                except ValueError as exc:
                    fail(section, key, str(exc))
                continue
            if key not in schema:
                fail(section, key, "unknown key")
                continue
            attr = schema[key]
            try:
                values[attr] = _convert(attr, value)
            except ValueError as exc:
                fail(section, key, str(exc))

    if errors:
        raise ConfigError(errors)

    # semantic pass on a draft built over the defaults
    n = values.get("n_constituents", RunConfig.n_constituents)
    if n < 1:
        errors.append("model.n: must be a positive integer")
        raise ConfigError(errors)

    variant = values.get("variant", RunConfig.variant)
    if variant not in ("modified", "original"):
        errors.append("model.variant: must be 'modified' or 'original'")

    mu = values.get("mu", None)
    lam = values.get("lam", None)
    if mu is None:
        mu = tuple(np.eye(n).ravel())
    if lam is None:
        lam = tuple(np.zeros(n * n))
    for name, mat in (("mu", mu), ("lambda", lam)):
        if len(mat) != n * n:
            errors.append(
                f"viscosity.{name}: expected {n * n} row-major entries for n={n}, "
                f"got {len(mat)}"
            )
    if not errors:
        visc = ViscosityMatrices(
            np.array(mu).reshape(n, n), np.array(lam).reshape(n, n)
        )
        report = validate_viscosity(visc)
        if not report.admissible:
            errors.append(
                "viscosity.mu: inadmissible matrices "
                f"(min eig sym(mu) = {report.min_eig_sym_mu:.6g}, "
                f"min eig sym(h) = {report.min_eig_sym_h:.6g})"
            )

    kind = values.get("pressure_kind", RunConfig.pressure_kind)
    if kind not in ("polytropic", "tabulated"):
        errors.append("pressure.kind: must be 'polytropic' or 'tabulated'")
    elif kind == "polytropic":
        ks = values.get("pressure_k", RunConfig.pressure_k)
        gammas = values.get("pressure_gamma", RunConfig.pressure_gamma)
        if len(ks) not in (1, n):
            errors.append(f"pressure.k: expected 1 or {n} values, got {len(ks)}")
        if len(gammas) not in (1, n):
            errors.append(f"pressure.gamma: expected 1 or {n} values, got {len(gammas)}")
        for K in ks:
            if not K > 0.0:
                errors.append("pressure.k: K must be positive")
        for gamma in gammas:
            if not gamma > 1.0:
                errors.append("pressure.gamma: gamma must exceed 1")
            elif gamma <= 1.5:
                warn.append(
                    f"pressure.gamma: gamma = {gamma:g} is at or below 3/2, outside "
                    "the range covered by the barotropic existence theory"
                )
    else:
        tr = values.get("table_rho", ())
        tp = values.get("table_p", ())
        try:
            TabulatedLaw(np.array(tr), np.array(tp))
        except ValueError as exc:
            errors.append(f"pressure.rho: {exc}")

    exchange = values.get("exchange", None)
    if exchange is not None:
        if len(exchange) != n * n:
            errors.append(
                f"exchange.a: expected {n * n} row-major entries, got {len(exchange)}"
            )
        else:
            a = np.array(exchange).reshape(n, n)
            if np.any(a < 0.0):
                errors.append("exchange.a: intensities must be nonnegative")
            off = a - np.diag(np.diag(a))
            if variant == "modified" and np.any(off):
                errors.append(
                    "exchange.a: the modified variant admits no momentum exchange"
                )

    if values.get("grid_length", RunConfig.grid_length) <= 0.0:
        errors.append("grid.length: must be positive")
    if values.get("grid_cells", RunConfig.grid_cells) < 3:
        errors.append("grid.n_cells: need at least 3 cells")
    if values.get("bc", RunConfig.bc) not in ("periodic", "noslip"):
        errors.append("grid.bc: must be 'periodic' or 'noslip'")

    if values.get("dt_init", RunConfig.dt_init) <= 0.0:
        errors.append("time.dt_init: must be positive")
    cfl = values.get("cfl", RunConfig.cfl)
    if not 0.0 < cfl <= 0.9:
        errors.append("time.cfl: must lie in (0, 0.9]")
    if values.get("t_end", RunConfig.t_end) < 0.0:
        errors.append("time.t_end: must be nonnegative")
    floor = values.get("density_floor", None)
    if floor is not None and floor < 0.0:
        errors.append("time.density_floor: must be nonnegative")
    if values.get("steady_tol", RunConfig.steady_tol) <= 0.0:
        errors.append("time.steady_tol: must be positive")
    if values.get("max_steps", RunConfig.max_steps) < 1:
        errors.append("time.max_steps: must be positive")
    if values.get("viscous_solve_tol", RunConfig.viscous_solve_tol) <= 0.0:
        errors.append("time.viscous_solve_tol: must be positive")
    if values.get("cadence", RunConfig.cadence) < 1:
        errors.append("output.cadence: must be a positive integer")

    rho_profiles = [ProfileSpec("uniform", (1.0,))] * n
    u_profiles = [ProfileSpec("uniform", (0.0,))] * n
    for key, spec in values.pop("initial", {}).items():
        kind_, _, index = key.partition("_")
        i = int(index)
        if not 1 <= i <= n:
            errors.append(f"initial.{key}: constituent index out of range 1..{n}")
            continue
        (rho_profiles if kind_ == "rho" else u_profiles)[i - 1] = spec

    if errors:
        raise ConfigError(errors)

    values["rho_profiles"] = tuple(rho_profiles)
    values["u_profiles"] = tuple(u_profiles)
    values["mu"] = tuple(float(x) for x in mu)
    values["lam"] = tuple(float(x) for x in lam)
    values["warnings"] = tuple(warn)
    return RunConfig(**values)


_INT_ATTRS = {"n_constituents", "grid_cells", "max_steps", "cadence"}
_FLOAT_ATTRS = {
    "grid_length", "dt_init", "cfl", "t_end", "steady_tol", "viscous_solve_tol",
}
_LIST_ATTRS = {"mu", "lam", "pressure_k", "pressure_gamma", "table_rho", "table_p",
               "exchange"}
_STR_ATTRS = {"variant", "pressure_kind", "bc", "directory"}


def _convert(attr, value):
    value = value.strip()
    if attr in _INT_ATTRS:
        return int(value)
    if attr in _FLOAT_ATTRS:
        return float(value)
    if attr in _LIST_ATTRS:
        return _parse_floats(value)
    if attr == "density_floor":
        return None if value == "auto" else float(value)
    if attr in _STR_ATTRS:
        return value
    raise ValueError(f"no converter for {attr}")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a config text.

    Raises ConfigError carrying every problem found (syntax errors with
    the offending line, semantic errors naming section.key).
    """
    return _validate(_read_raw(text))


def render_config(cfg: RunConfig) -> str:
    """Canonical text for a RunConfig; parse(render(cfg)) == cfg."""
    lines = []

    def sec(name):
        if lines:
            lines.append("")
        lines.append(f"[{name}]")

    def kv(key, value):
        lines.append(f"{key} = {value}")

    def flist(xs):
        return " ".join(_fmt_float(x) for x in xs)

    sec("model")
    kv("variant", cfg.variant)
    kv("n", cfg.n_constituents)
    sec("viscosity")
    kv("mu", flist(cfg.mu))
    kv("lambda", flist(cfg.lam))
    sec("pressure")
    kv("kind", cfg.pressure_kind)
    if cfg.pressure_kind == "polytropic":
        kv("k", flist(cfg.pressure_k))
        kv("gamma", flist(cfg.pressure_gamma))
    else:
        kv("rho", flist(cfg.table_rho))
        kv("p", flist(cfg.table_p))
    if cfg.exchange is not None:
        sec("exchange")
        kv("a", flist(cfg.exchange))
    sec("grid")
    kv("length", _fmt_float(cfg.grid_length))
    kv("n_cells", cfg.grid_cells)
    kv("bc", cfg.bc)
    sec("time")
    kv("dt_init", _fmt_float(cfg.dt_init))
    kv("cfl", _fmt_float(cfg.cfl))
    kv("t_end", _fmt_float(cfg.t_end))
    kv("density_floor",
       "auto" if cfg.density_floor is None else _fmt_float(cfg.density_floor))
    kv("steady_tol", _fmt_float(cfg.steady_tol))
    kv("max_steps", cfg.max_steps)
    kv("viscous_solve_tol", _fmt_float(cfg.viscous_solve_tol))
    sec("initial")
    for i, spec in enumerate(cfg.rho_profiles):
        kv(f"rho_{i + 1}", spec.render())
    for i, spec in enumerate(cfg.u_profiles):
        kv(f"u_{i + 1}", spec.render())
    sec("output")
    kv("cadence", cfg.cadence)
    kv("directory", cfg.directory)
    return "\n".join(lines) + "\n"


def with_override(text: str, path: str, value: str) -> RunConfig:
    """Re-validate a config text with one ``section.key`` replaced."""
    raw = _read_raw(text)
    section, _, key = path.partition(".")
    if section not in _SCHEMA or not key:
        raise ConfigError([f"{path}: unknown parameter path"])
    schema = _SCHEMA[section]
    if schema is not None and key not in schema:
        raise ConfigError([f"{path}: unknown parameter path"])
    raw.setdefault(section, {})[key] = value
    return _validate(raw)


def build_grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg.grid_length, cfg.grid_cells, BoundaryKind(cfg.bc))


def _build_laws(cfg: RunConfig):
    if cfg.pressure_kind == "tabulated":
        return TabulatedLaw(np.array(cfg.table_rho), np.array(cfg.table_p))
    n = cfg.n_constituents
    ks = cfg.pressure_k if len(cfg.pressure_k) == n else cfg.pressure_k * n
    gs = cfg.pressure_gamma if len(cfg.pressure_gamma) == n else cfg.pressure_gamma * n
    laws = tuple(PolytropicLaw(K, g) for K, g in zip(ks, gs))
    return laws[0] if len(set(zip(ks, gs))) == 1 and cfg.variant == "modified" else laws


def build_params(cfg: RunConfig, body_force=None) -> MixtureParams:
    n = cfg.n_constituents
    visc = ViscosityMatrices(
        np.array(cfg.mu).reshape(n, n), np.array(cfg.lam).reshape(n, n)
    )
    laws = _build_laws(cfg)
    if cfg.variant == "modified" and isinstance(laws, tuple):
        laws = laws[0]
    exchange = None
    if cfg.exchange is not None:
        exchange = ExchangeMatrix(np.array(cfg.exchange).reshape(n, n))
    return MixtureParams(
        variant=ModelVariant(cfg.variant),
        visc=visc,
        pressure=laws,
        exchange=exchange,
        body_force=body_force,
    )


def build_state(cfg: RunConfig) -> MixtureState:
    grid = build_grid(cfg)
    rho = np.stack([profile_field(s.name, s.args, grid) for s in cfg.rho_profiles])
    u = np.stack([profile_field(s.name, s.args, grid) for s in cfg.u_profiles])
    return MixtureState(grid, rho, u, ModelVariant(cfg.variant))


def build_solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(
        dt_init=cfg.dt_init,
        cfl_target=cfg.cfl,
        t_end=cfg.t_end,
        density_floor=cfg.density_floor,
        steady_tol=cfg.steady_tol,
        max_steps=cfg.max_steps,
        viscous_solve_tol=cfg.viscous_solve_tol,
        snapshot_every=cfg.cadence,
    )
