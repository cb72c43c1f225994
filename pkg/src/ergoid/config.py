"""TOML experiment configuration with strict key checking."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import STRATEGIES
from .exceptions import ConfigError

SCREENS = ("range", "circle")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every field has a default; see README for the schema."""

    nmax: int = 15
    sparsity: Tuple[int, ...] = (3,)
    sample_counts: Tuple[int, ...] = (1024,)
    noise: Tuple[float, ...] = (0.05,)
    trials: int = 10
    burn_in: int = 1000
    strategy: str = "consecutive"
    stride: int = 1
    lambda_constant: float = 4.0
    enforce_admissible: bool = True
    # used instead of the lambda rule when sigma == 0 (the rule gives 0 there)
    noiseless_lambda: float = 1e-8
    lambda_override: Optional[float] = None
    c2: float = 1.0
    seed: int = 0
    out: str = "results"
    dc: float = 0.5
    budget: float = 0.49
    density_length: int = 100_000
    density_bins: int = 64
    screen: str = "range"
    xi_threshold: float = 0.05
    max_retries: int = 50
    tolerance: float = 1e-10
    max_iterations: int = 100_000
    path_points_per_decade: int = 5
    support_tol: float = 1e-6
    symmetrize: bool = True
    record_timing: bool = False

    def __post_init__(self):
        for name in ("sparsity", "sample_counts", "noise"):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        self.validate()

    def validate(self):
        def positive_int(name, v):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")

        positive_int("nmax", self.nmax)
        positive_int("trials", self.trials)
        positive_int("density_bins", self.density_bins)
        positive_int("density_length", self.density_length)
        positive_int("max_retries", self.max_retries)
        positive_int("max_iterations", self.max_iterations)
        positive_int("stride", self.stride)
        if not self.sparsity or not self.sample_counts or not self.noise:
            raise ConfigError("sparsity, sample_counts and noise must be non-empty")
        for s in self.sparsity:
            positive_int("sparsity", s)
        for M in self.sample_counts:
            positive_int("sample_counts", M)
        for sigma in self.noise:
            if not isinstance(sigma, (int, float)) or isinstance(sigma, bool) or sigma < 0:
                raise ConfigError(f"noise levels must be non-negative numbers, got {sigma!r}")
        if isinstance(self.burn_in, bool) or not isinstance(self.burn_in, int) or self.burn_in < 0:
            raise ConfigError("burn_in must be a non-negative integer")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.screen not in SCREENS:
            raise ConfigError(f"screen must be one of {SCREENS}")
        if self.enforce_admissible and not self.lambda_constant > 2 * math.sqrt(2):
            raise ConfigError(f"lambda_constant must exceed 2*sqrt(2), got {self.lambda_constant}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data)
