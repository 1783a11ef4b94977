"""Study configuration: a small line-oriented grammar with full validation.

Sections in brackets, ``key = value`` pairs, arrays in brackets, decimal
numbers; ``#`` starts a comment.  Every parse error names the offending line.
Top-level keys (before any section) apply to the whole study::

    seed = 0

    [system]
    name = rotation
    cost = y1
    inner_radius = 0.5
    outer_radius = 1.5

    [grid]
    state_resolution = [5, 64]
    control_resolution = 9

    [basis]
    degree = 4

    [program]
    variants = [ergodic, nonergodic, discounted, perturbed]
    y0 = [1.0, 0.0]
    discount_rates = [0.005]
    epsilons = [0.1, 0.01, 0.001, 0.0]

    [simulate]
    policy = steer_hold:1.0:3.14159265358979:0.0
    horizons = [25.0, 50.0, 100.0, 200.0]

    [output]
    dir = out
    formats = [json, csv-dir]

``occlp --print-defaults`` prints the full default configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .simulate import (ConstantPolicy, Policy, SchedulePolicy, SteerThenHoldPolicy,
                       rotation_delta_family)
from .system import (ControlRegion, StateRegion, SystemSpec, make_frozen,
                     make_rotation, make_scalar_drift, validate_bounds)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# ---------------------------------------------------------------------------
# schema


@dataclass
class SystemConfig:
    name: str = "rotation"
    cost: str = "y1"
    inner_radius: float = 0.5
    outer_radius: float = 1.5
    lower: tuple[float, ...] = (-1.0, -1.0)
    upper: tuple[float, ...] = (1.0, 1.0)
    region: str = ""  # for custom systems: box | annulus
    dynamics: tuple[str, ...] = ()
    first_integrals: tuple[str, ...] = ()
    control_lower: tuple[float, ...] = (-1.0,)
    control_upper: tuple[float, ...] = (1.0,)
    bound_f: float | None = None
    bound_k: float | None = None


@dataclass
class GridConfig:
    state_resolution: tuple[int, ...] = (5, 64)
    control_resolution: int = 9


@dataclass
class BasisConfig:
    degree: int = 4


@dataclass
class ProgramConfig:
    variants: tuple[str, ...] = ("ergodic", "nonergodic")
    y0: tuple[float, ...] = (1.0, 0.0)
    discount_rates: tuple[float, ...] = (0.005,)
    epsilons: tuple[float, ...] = (0.1, 0.01, 0.001, 0.0)
    xi_mass_cap: float = 1e6


@dataclass
class SimulateConfig:
    policy: str = ""
    horizons: tuple[float, ...] = (25.0, 50.0, 100.0, 200.0)
    dt: float = 1e-3
    abel_rates: tuple[float, ...] = ()
    abel_horizon: float = 1200.0
    abel_dt: float = 1e-2
    periodic_deltas: tuple[float, ...] = ()
    periodic_dt: float = 1e-2


@dataclass
class OutputConfig:
    dir: str = "out"
    formats: tuple[str, ...] = ("json",)


@dataclass
class StudyConfig:
    seed: int = 0
    system: SystemConfig = field(default_factory=SystemConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    program: ProgramConfig = field(default_factory=ProgramConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def resolved_dict(self) -> dict:
        return asdict(self)


_KNOWN_VARIANTS = ("ergodic", "nonergodic", "discounted", "perturbed")


# ---------------------------------------------------------------------------
# tokenising


def _parse_scalar(raw: str, line: int):
    raw = raw.strip()
    if not raw:
        raise ConfigError("empty value", line)
    try:
        return float(raw)
    except ValueError:
        return raw


def _parse_value(raw: str, line: int):
    raw = raw.strip()
    if not raw:
        return ""
    if raw.startswith("["):
        if not raw.endswith("]"):
            raise ConfigError("unterminated array (missing ']')", line)
        inner = raw[1:-1].strip()
        if not inner:
            return ()
        return tuple(_parse_scalar(part, line) for part in inner.split(","))
    return _parse_scalar(raw, line)


def _read_items(text: str) -> dict[str, dict[str, tuple[object, int]]]:
    """Section -> key -> (value, line).  Top-level keys live in section ''."""
    sections: dict[str, dict[str, tuple[object, int]]] = {"": {}}
    current = ""
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", lineno)
            current = line[1:-1].strip()
            if not current:
                raise ConfigError("empty section name", lineno)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw_value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        sections[current][key] = (_parse_value(raw_value, lineno), lineno)
    return sections


# ---------------------------------------------------------------------------
# coercion helpers


def _want_float(value, line: int, key: str) -> float:
    if isinstance(value, float):
        return value
    raise ConfigError(f"{key} must be a number, got {value!r}", line)


def _want_int(value, line: int, key: str) -> int:
    if isinstance(value, float) and float(value).is_integer():
        return int(value)
    raise ConfigError(f"{key} must be an integer, got {value!r}", line)


def _want_str(value, line: int, key: str) -> str:
    if isinstance(value, str):
        return value
    raise ConfigError(f"{key} must be a name, got {value!r}", line)


def _want_expr(value, line: int, key: str) -> str:
    # expressions may be bare numbers, which the tokeniser reads as floats
    if isinstance(value, float):
        return repr(value)
    return _want_str(value, line, key)


def _want_float_tuple(value, line: int, key: str) -> tuple[float, ...]:
    if isinstance(value, float):
        return (value,)
    if isinstance(value, tuple) and all(isinstance(v, float) for v in value):
        return value
    raise ConfigError(f"{key} must be a numeric array, got {value!r}", line)


def _want_int_tuple(value, line: int, key: str) -> tuple[int, ...]:
    floats = _want_float_tuple(value, line, key)
    if not all(float(v).is_integer() for v in floats):
        raise ConfigError(f"{key} must contain integers, got {value!r}", line)
    return tuple(int(v) for v in floats)


def _want_str_tuple(value, line: int, key: str) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    if isinstance(value, tuple) and all(isinstance(v, str) for v in value):
        return value
    raise ConfigError(f"{key} must be an array of names, got {value!r}", line)


_SECTION_KEYS = {
    "": {"seed"},
    "system": {"name", "cost", "inner_radius", "outer_radius", "lower", "upper",
               "region", "dynamics", "first_integrals", "control_lower",
               "control_upper", "bound_f", "bound_k"},
    "grid": {"state_resolution", "control_resolution"},
    "basis": {"degree"},
    "program": {"variants", "y0", "discount_rates", "epsilons", "xi_mass_cap"},
    "simulate": {"policy", "horizons", "dt", "abel_rates", "abel_horizon",
                 "abel_dt", "periodic_deltas", "periodic_dt"},
    "output": {"dir", "formats"},
}


def parse_config(text: str) -> StudyConfig:
    """Parse and fully validate a study configuration."""
    sections = _read_items(text)
    for section, items in sections.items():
        if section not in _SECTION_KEYS:
            line = min(line for _, line in items.values()) if items else None
            raise ConfigError(f"unknown section [{section}]", line)
        for key, (_value, line) in items.items():
            if key not in _SECTION_KEYS[section]:
                where = f"[{section}]" if section else "top level"
                raise ConfigError(f"unknown key {key!r} in {where}", line)

    cfg = StudyConfig()

    top = sections.get("", {})
    if "seed" in top:
        cfg.seed = _want_int(*top["seed"], key="seed")

    sys_items = sections.get("system", {})

    def get(section_items, key, coerce, default):
        if key not in section_items:
            return default
        value, line = section_items[key]
        return coerce(value, line, key)

    cfg.system = SystemConfig(
        name=get(sys_items, "name", _want_str, "rotation"),
        cost=get(sys_items, "cost", _want_expr, "y1"),
        inner_radius=get(sys_items, "inner_radius", _want_float, 0.5),
        outer_radius=get(sys_items, "outer_radius", _want_float, 1.5),
        lower=get(sys_items, "lower", _want_float_tuple, (-1.0, -1.0)),
        upper=get(sys_items, "upper", _want_float_tuple, (1.0, 1.0)),
        region=get(sys_items, "region", _want_str, ""),
        dynamics=get(sys_items, "dynamics", _want_str_tuple, ()),
        first_integrals=get(sys_items, "first_integrals", _want_str_tuple, ()),
        control_lower=get(sys_items, "control_lower", _want_float_tuple, (-1.0,)),
        control_upper=get(sys_items, "control_upper", _want_float_tuple, (1.0,)),
        bound_f=get(sys_items, "bound_f", _want_float, None),
        bound_k=get(sys_items, "bound_k", _want_float, None),
    )

    grid_items = sections.get("grid", {})
    state_res = get(grid_items, "state_resolution", _want_int_tuple, (5, 64))
    cfg.grid = GridConfig(
        state_resolution=state_res,
        control_resolution=get(grid_items, "control_resolution", _want_int, 9),
    )

    basis_items = sections.get("basis", {})
    cfg.basis = BasisConfig(degree=get(basis_items, "degree", _want_int, 4))
    if cfg.basis.degree < 1:
        line = basis_items["degree"][1] if "degree" in basis_items else None
        raise ConfigError("max_degree must be >= 1", line)

    prog_items = sections.get("program", {})
    cfg.program = ProgramConfig(
        variants=get(prog_items, "variants", _want_str_tuple, ("ergodic", "nonergodic")),
        y0=get(prog_items, "y0", _want_float_tuple, (1.0, 0.0)),
        discount_rates=get(prog_items, "discount_rates", _want_float_tuple, (0.005,)),
        epsilons=get(prog_items, "epsilons", _want_float_tuple, (0.1, 0.01, 0.001, 0.0)),
        xi_mass_cap=get(prog_items, "xi_mass_cap", _want_float, 1e6),
    )
    for variant in cfg.program.variants:
        if variant not in _KNOWN_VARIANTS:
            line = prog_items["variants"][1] if "variants" in prog_items else None
            raise ConfigError(f"unknown program variant {variant!r}", line)
    for rate in cfg.program.discount_rates:
        if rate <= 0:
            raise ConfigError("discount_rates must be positive",
                              prog_items.get("discount_rates", (None, None))[1])
    for eps in cfg.program.epsilons:
        if eps < 0:
            raise ConfigError("epsilons must be nonnegative",
                              prog_items.get("epsilons", (None, None))[1])
    if cfg.program.xi_mass_cap <= 0:
        raise ConfigError("xi_mass_cap must be positive",
                          prog_items.get("xi_mass_cap", (None, None))[1])

    sim_items = sections.get("simulate", {})
    cfg.simulate = SimulateConfig(
        policy=get(sim_items, "policy", _want_str, ""),
        horizons=get(sim_items, "horizons", _want_float_tuple, (25.0, 50.0, 100.0, 200.0)),
        dt=get(sim_items, "dt", _want_float, 1e-3),
        abel_rates=get(sim_items, "abel_rates", _want_float_tuple, ()),
        abel_horizon=get(sim_items, "abel_horizon", _want_float, 1200.0),
        abel_dt=get(sim_items, "abel_dt", _want_float, 1e-2),
        periodic_deltas=get(sim_items, "periodic_deltas", _want_float_tuple, ()),
        periodic_dt=get(sim_items, "periodic_dt", _want_float, 1e-2),
    )
    for key in ("dt", "abel_dt", "periodic_dt", "abel_horizon"):
        if getattr(cfg.simulate, key) <= 0:
            raise ConfigError(f"{key} must be positive", sim_items.get(key, (None, None))[1])

    out_items = sections.get("output", {})
    cfg.output = OutputConfig(
        dir=get(out_items, "dir", _want_str, "out"),
        formats=get(out_items, "formats", _want_str_tuple, ("json",)),
    )
    for fmt in cfg.output.formats:
        if fmt not in ("json", "csv-dir"):
            raise ConfigError(f"unknown output format {fmt!r}",
                              out_items.get("formats", (None, None))[1])

    # cross-block validation: the system must build and y0 must be inside it
    spec = build_system(cfg.system)
    y0 = np.asarray(cfg.program.y0, dtype=float)
    if y0.shape != (spec.dim_state,):
        raise ConfigError(f"y0 has dimension {y0.shape[0]}, system expects {spec.dim_state}",
                          prog_items.get("y0", (None, None))[1])
    if not spec.region.contains(y0):
        raise ConfigError(f"y0 {cfg.program.y0} lies outside the state region",
                          prog_items.get("y0", (None, None))[1])
    return cfg


# ---------------------------------------------------------------------------
# building runtime objects from configuration


def build_system(cfg: SystemConfig) -> SystemSpec:
    if cfg.name == "rotation":
        if not 0 < cfg.inner_radius <= cfg.outer_radius:
            raise ConfigError("rotation needs 0 < inner_radius <= outer_radius")
        return make_rotation(cfg.inner_radius, cfg.outer_radius, cost_id=cfg.cost,
                             bound_k=cfg.bound_k)
    if cfg.name == "frozen":
        return make_frozen(cfg.lower, cfg.upper, cost_id=cfg.cost, bound_k=cfg.bound_k)
    if cfg.name == "scalar-drift":
        return make_scalar_drift(cost_id=cfg.cost, bound_k=cfg.bound_k)
    if cfg.name == "custom":
        return _build_custom_system(cfg)
    raise ConfigError(f"unknown system name {cfg.name!r}")


def _build_custom_system(cfg: SystemConfig) -> SystemSpec:
    if not cfg.dynamics:
        raise ConfigError("custom systems need a dynamics array of expressions")
    if cfg.region == "annulus":
        region = StateRegion(kind="annulus", inner=cfg.inner_radius, outer=cfg.outer_radius)
    elif cfg.region == "box":
        region = StateRegion(kind="box", lower=cfg.lower, upper=cfg.upper)
    else:
        raise ConfigError("custom systems need region = box or region = annulus")
    control = ControlRegion(kind="box", lower=cfg.control_lower, upper=cfg.control_upper)
    dynamics_id = ";".join(cfg.dynamics)
    probe = SystemSpec(name="custom", dynamics_id=dynamics_id, cost_id=cfg.cost,
                       region=region, control=control,
                       first_integrals=tuple(cfg.first_integrals),
                       bound_f=math.inf, bound_k=math.inf)
    bound_f, bound_k = cfg.bound_f, cfg.bound_k
    if bound_f is None or bound_k is None:
        report = validate_bounds(probe)
        # sampled maxima with headroom; declared bounds are preferred
        if bound_f is None:
            bound_f = 1.1 * report.max_dynamics_norm
        if bound_k is None:
            bound_k = 1.1 * report.max_cost_abs
    return SystemSpec(name="custom", dynamics_id=dynamics_id, cost_id=cfg.cost,
                      region=region, control=control,
                      first_integrals=tuple(cfg.first_integrals),
                      bound_f=bound_f, bound_k=bound_k)


def build_policy(text: str, spec: SystemSpec, y0) -> Policy:
    """Policy mini-syntax: ``constant:<u..>``, ``steer_hold:<u>:<t>:<u>``,
    ``schedule:t0:u0,t1:u1,...`` (optionally ``@period``), ``rotation_delta:<d>``."""
    if not text:
        raise ConfigError("no policy configured")
    kind, _, rest = text.partition(":")
    try:
        if kind == "constant":
            return ConstantPolicy([float(v) for v in rest.split(":")])
        if kind == "steer_hold":
            u1, t_switch, u2 = rest.split(":")
            return SteerThenHoldPolicy(ConstantPolicy(float(u1)), float(t_switch),
                                       ConstantPolicy(float(u2)))
        if kind == "schedule":
            body, _, period = rest.partition("@")
            times, values = [], []
            for piece in body.split(","):
                t_text, u_text = piece.split(":")
                times.append(float(t_text))
                values.append(float(u_text))
            return SchedulePolicy(times, values,
                                  period=float(period) if period else None)
        if kind == "rotation_delta":
            candidates = rotation_delta_family(spec, y0, [float(rest)])
            return candidates[0].policy
    except (ValueError, IndexError) as err:
        raise ConfigError(f"malformed policy {text!r}: {err}") from err
    raise ConfigError(f"unknown policy kind {kind!r}")


def default_config_text() -> str:
    """The fully resolved default configuration (what --print-defaults shows)."""
    return """\
seed = 0

[system]
name = rotation            # rotation | frozen | scalar-drift | custom
cost = y1
inner_radius = 0.5
outer_radius = 1.5

[grid]
state_resolution = [5, 64] # box: one entry per axis; annulus: [radial, angular]
control_resolution = 9

[basis]
degree = 4

[program]
variants = [ergodic, nonergodic]
y0 = [1.0, 0.0]
discount_rates = [0.005]
epsilons = [0.1, 0.01, 0.001, 0.0]
xi_mass_cap = 1000000.0

[simulate]
policy =                   # constant:<u> | steer_hold:<u>:<t>:<u> | schedule:... | rotation_delta:<d>
horizons = [25.0, 50.0, 100.0, 200.0]
dt = 0.001
abel_rates = []
abel_horizon = 1200.0
abel_dt = 0.01
periodic_deltas = []
periodic_dt = 0.01

[output]
dir = out
formats = [json]
"""
