"""Experiment configuration: defaults, key=value files and overrides.

File format: one ``key = value`` per line; ``#`` starts a comment; blank
lines are ignored. Unknown keys are an error. Example::

    preset = e1
    R = 1000
    epsilon = 0.05   # 0 disables mollification
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from .presets import PRESETS

__all__ = ["ExperimentConfig", "load_config", "parse_assignments"]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "e1"
    alpha: float = 0.8
    x0: float = 0.5
    T: float = 1.0
    N: int = 1000
    m: int = 199
    R: int = 1000
    epsilon: float = 0.0
    sigma: float = 0.0
    master_seed: int = 20240601
    output_dir: str = "out"
    workers: int = 1
    n_modes: int = 1
    tol: float = 1e-10
    max_iter: int = 200
    chunk: int = 500
    figures: bool = False
    g1_file: str = ""
    g2_file: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.preset not in PRESETS and self.preset != "custom":
            raise ConfigError(f"preset must be one of {', '.join(PRESETS)} or custom, got {self.preset!r}")
        if self.preset == "custom" and not (self.g1_file and self.g2_file):
            raise ConfigError("custom preset needs g1_file and g2_file")
        if not 0.5 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (1/2, 1), got {self.alpha}")
        if not 0.0 < self.x0 < 1.0:
            raise ConfigError(f"x0 must lie in (0, 1), got {self.x0}")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.N < 2:
            raise ConfigError("N must be at least 2")
        if self.m < 3:
            raise ConfigError("m must be at least 3")
        if self.R < 2:
            raise ConfigError(f"R must be at least 2 (variance needs two paths), got {self.R}")
        if self.epsilon < 0 or (self.epsilon > 0 and self.epsilon >= self.T):
            raise ConfigError(f"epsilon must be 0 (off) or in (0, T), got {self.epsilon}")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be nonnegative")
        if self.workers < 1 or self.chunk < 1 or self.n_modes < 1 or self.max_iter < 1:
            raise ConfigError("workers, chunk, n_modes and max_iter must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, overrides: dict[str, str | object]) -> "ExperimentConfig":
        """Apply string or typed overrides, coercing to the field types."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in overrides.items():
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            changes[key] = _coerce(key, types[key], raw)
        return self.replace(**changes)

    def items(self) -> list[tuple[str, object]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def _coerce(key: str, typ: str, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ == "int":
            return int(float(text)) if "e" in text.lower() else int(text)
        if typ == "float":
            return float(text)
        if typ == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"cannot read {key}={raw!r} as {typ}") from None
    return text


def parse_assignments(lines) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text().splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        cfg = cfg.with_overrides(parse_assignments(text))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg
