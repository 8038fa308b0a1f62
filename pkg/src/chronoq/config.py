"""Run configuration, loaded from YAML with line-accurate error messages.

Example file::

    grid:
      center_frequency_hz: 1.94e14   # 1545 nm
      sigma_c_hz: 2.0e11             # sigma_c / 2 pi
      n_points: 128
      span_in_sigma: 16
    scan: {xi_min: -4, xi_max: 4, n_xi: 41, t_min: -4, t_max: 4, n_t: 41}
    noise: {scale: 1.0e6, background_level: 0, seed: 0}
    qpg: {ideal: true, pm_width_hz: 6.0e10}
    mle: {max_iters: 2000, tol: 1.0e-10, dilution: 1.0, support_tol: 1.0e-5}
    workers: 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .core import FrequencyGrid, PhaseSpaceGrid, make_grid, make_scan
from .forward import QpgModel

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    def __init__(self, message, source="<config>", line=None, field_name=None):
        self.source = source
        self.line = line
        self.field_name = field_name
        where = source if line is None else f"{source}:{line}"
        what = f"{field_name}: " if field_name else ""
        super().__init__(f"{where}: {what}{message}")


def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


def _at_least(n):
    return lambda x: x >= n


@dataclass(frozen=True)
class GridConfig:
    center_frequency_hz: float = 1.94e14
    sigma_c_hz: float = 2.0e11
    n_points: int = 128
    span_in_sigma: float = 16.0


@dataclass(frozen=True)
class ScanConfig:
    xi_min: float = -4.0
    xi_max: float = 4.0
    n_xi: int = 41
    t_min: float = -4.0
    t_max: float = 4.0
    n_t: int = 41


@dataclass(frozen=True)
class NoiseConfig:
    scale: float = 1.0e6
    background_level: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class QpgConfig:
    ideal: bool = True
    pm_width_hz: float = 6.0e10


@dataclass(frozen=True)
class MleConfig:
    max_iters: int = 2000
    tol: float = 1e-10
    dilution: float = 1.0
    support_tol: float = 1e-5


# (type, check, description) per field; checks run after type coercion
_RULES = {
    "grid.center_frequency_hz": (float, _non_negative, "must be >= 0"),
    "grid.sigma_c_hz": (float, _positive, "must be > 0"),
    "grid.n_points": (int, _at_least(8), "must be an integer >= 8"),
    "grid.span_in_sigma": (float, _at_least(6), "must be >= 6"),
    "scan.xi_min": (float, None, ""),
    "scan.xi_max": (float, None, ""),
    "scan.n_xi": (int, _at_least(1), "must be an integer >= 1"),
    "scan.t_min": (float, None, ""),
    "scan.t_max": (float, None, ""),
    "scan.n_t": (int, _at_least(1), "must be an integer >= 1"),
    "noise.scale": (float, _positive, "must be > 0"),
    "noise.background_level": (float, _non_negative, "must be >= 0"),
    "noise.seed": (int, _non_negative, "must be a non-negative integer"),
    "qpg.ideal": (bool, None, ""),
    "qpg.pm_width_hz": (float, _positive, "must be > 0"),
    "mle.max_iters": (int, _non_negative, "must be a non-negative integer"),
    "mle.tol": (float, _non_negative, "must be >= 0"),
    "mle.dilution": (float, _positive, "must be > 0"),
    "mle.support_tol": (float, lambda x: 0 < x < 1, "must be in (0, 1)"),
    "workers": (int, _at_least(1), "must be an integer >= 1"),
}


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    qpg: QpgConfig = field(default_factory=QpgConfig)
    mle: MleConfig = field(default_factory=MleConfig)
    workers: int = 1

    def frequency_grid(self) -> FrequencyGrid:
        g = self.grid
        return make_grid(
            2 * math.pi * g.center_frequency_hz,
            g.span_in_sigma,
            g.n_points,
            2 * math.pi * g.sigma_c_hz,
        )

    def phase_space_grid(self) -> PhaseSpaceGrid:
        s = self.scan
        return make_scan((s.xi_min, s.xi_max), s.n_xi, (s.t_min, s.t_max), s.n_t)

    def qpg_model(self) -> QpgModel:
        if self.qpg.ideal:
            return QpgModel()
        return QpgModel(ideal=False, pm_width=2 * math.pi * self.qpg.pm_width_hz)

    def with_overrides(self, **dotted) -> "RunConfig":
        """Replace fields by dotted name, e.g. ``{"mle.tol": 1e-8}``; ``None`` is ignored."""
        cfg = self
        for key, value in dotted.items():
            if value is None:
                continue
            cfg = _set(cfg, key, _coerce(key, value, "<command line>", None))
        return cfg


def _set(cfg: RunConfig, dotted: str, value) -> RunConfig:
    if "." not in dotted:
        return replace(cfg, **{dotted: value})
    section, name = dotted.split(".", 1)
    return replace(cfg, **{section: replace(getattr(cfg, section), **{name: value})})


def _coerce(key, value, source, line):
    kind, check, msg = _RULES[key]
    if kind in (int, float) and isinstance(value, str):
        # YAML 1.1 reads 1.2e11 (no exponent sign) as a string
        try:
            value = float(value)
        except ValueError:
            pass
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", source, line, key)
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", source, line, key)
        value = int(value)
    else:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", source, line, key)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError("must be finite", source, line, key)
    if check is not None and not check(value):
        raise ConfigError(f"{msg}, got {value!r}", source, line, key)
    return value


def _node_value(node):
    return yaml.safe_load(yaml.serialize(node))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML ({getattr(exc, 'problem', exc)})", source, line) from None
    cfg = RunConfig()
    if root is None:
        return cfg
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", source, root.start_mark.line + 1)

    sections = {f.name for f in fields(RunConfig)}
    for key_node, value_node in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key not in sections:
            raise ConfigError(f"unknown section (expected one of {sorted(sections)})", source, line, key)
        if key == "workers":
            cfg = _set(cfg, key, _coerce(key, _node_value(value_node), source, line))
            continue
        if not isinstance(value_node, yaml.MappingNode):
            raise ConfigError("expected a mapping", source, value_node.start_mark.line + 1, key)
        known = {f.name for f in fields(getattr(cfg, key))}
        for sub_key, sub_value in value_node.value:
            dotted = f"{key}.{sub_key.value}"
            sub_line = sub_key.start_mark.line + 1
            if sub_key.value not in known:
                raise ConfigError(f"unknown field (expected one of {sorted(known)})", source, sub_line, dotted)
            value = _coerce(dotted, _node_value(sub_value), source, sub_line)
            cfg = _set(cfg, dotted, value)

    s = cfg.scan
    if s.xi_max <= s.xi_min and s.n_xi > 1:
        raise ConfigError("xi_max must exceed xi_min", source, None, "scan.xi_max")
    if s.t_max <= s.t_min and s.n_t > 1:
        raise ConfigError("t_max must exceed t_min", source, None, "scan.t_max")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", str(path)) from None
    return parse_config(text, str(path))
