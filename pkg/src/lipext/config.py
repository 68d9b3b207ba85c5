"""Flat TOML experiment configuration.

Every key is optional; unknown keys are rejected. `delta_grid` accepts the
string "inf" for an unbounded radius cap. The schema is documented in the
README and mirrored by `DEFAULTS` below.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, fields

import numpy as np

from .geometry import GeometryError, named_domain
from .partition import MODES


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str = "square-subgraph"
    dim: int = 2
    l: int = 1
    p_values: tuple = (1.0, 2.0)
    quadrature_order: int = 16
    partition_mode: str = "composition"
    weight_lambdas: tuple = (0.0, 1.0, 2.0)
    delta_grid: tuple = (0.1, 0.5, 1.0, 2.0, 10.0)
    seed: int = 0
    center_count: int = 32
    samples_per_ball: int = 128
    functions: tuple = ("monomials", "gaussian", "trig", "singular")
    fd_step: float = 1e-3
    out_dir: str = "reports"
    plots: bool = False
    debug_A: float = None

    def __post_init__(self):
        if not 1 <= self.dim <= 3:
            raise ConfigError(f"dim must be 1..3, got {self.dim}")
        if not 0 <= self.l <= 3:
            raise ConfigError(f"l must be 0..3, got {self.l}")
        if self.quadrature_order < 4:
            raise ConfigError("quadrature_order must be at least 4")
        if self.partition_mode not in MODES:
            raise ConfigError(f"partition_mode must be one of {MODES}")
        if any(p < 1 for p in self.p_values):
            raise ConfigError("p values must be at least 1")
        if any(not d > 0 for d in self.delta_grid):
            raise ConfigError("delta grid values must be positive (or inf)")
        try:
            named_domain(self.domain, self.dim)
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc

    def make_domain(self):
        return named_domain(self.domain, self.dim)


_TUPLE_KEYS = {"p_values", "weight_lambdas", "delta_grid", "functions"}


def _coerce(key, value):
    if key == "delta_grid":
        out = []
        for v in value:
            if isinstance(v, str):
                if v.lower() not in ("inf", "infinity"):
                    raise ConfigError(f"bad delta value {v!r}")
                out.append(np.inf)
            else:
                out.append(float(v))
        return tuple(out)
    if key in _TUPLE_KEYS:
        return tuple(value)
    return value


def load_config(path=None, overrides=None):
    """Read a TOML file (optional) and apply CLI overrides on top."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
