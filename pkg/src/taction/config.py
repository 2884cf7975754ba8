"""Run configuration: documented defaults for every tunable constant.

A single JSON document can override any field; CLI flags override the file.
The canonical serialized form is hashed into every output so reports from
mismatched configurations are never merged silently.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class FitConfig:
    """Levenberg-Marquardt constants."""

    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e12
    max_iterations: int = 200
    cost_tol: float = 1e-10        # relative cost change on accepted steps
    step_tol: float = 1e-10        # parameter step norm
    jacobian_step: float = 1e-6    # relative central-difference step


@dataclass(frozen=True)
class ExtractConfig:
    """Segmentation and descriptor constants for the three extractors."""

    contact_threshold_n: float = 0.1    # normal-force contact level
    contact_debounce_s: float = 0.05    # threshold must hold this long
    plateau_fraction: float = 0.99      # of max force: hold-phase boundary
    smooth_window_s: float = 0.5        # thermal moving-average window
    onset_run_s: float = 0.5            # sustained negative-derivative run
    recovery_window_s: float = 30.0     # heat-flux segment-2 extent
    recovery_origin: str = "onset"      # "onset" or "start"
    recovery_min_s: float = 5.0         # shorter segment 2 gets flagged
    mad_window: int = 25                # samples, temperature moving MAD
    min_normal_force_n: float = 0.05    # sliding friction validity floor
    band_lo_hz: float = 20.0
    band_hi_hz: float = 1000.0
    hysteresis_grid: int = 50           # force-grid points for the gap mean


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    min_leaf: int = 1
    max_depth: int = 0                  # 0 = unlimited


@dataclass(frozen=True)
class ModelConfig:
    forest: ForestConfig = field(default_factory=ForestConfig)
    knn_k: int = 5
    nb_var_floor: float = 1e-9
    logistic_l2: float = 1.0
    logistic_grad_tol: float = 1e-6


@dataclass(frozen=True)
class ProtocolConfig:
    train_fraction: float = 0.8
    repeats: int = 100
    stratified: bool = True
    base_seed: int = 0
    surface_holdout: bool = False       # stricter split: surfaces never span sets

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    fit: FitConfig = field(default_factory=FitConfig)
    extract: ExtractConfig = field(default_factory=ExtractConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    workers: int = 0                    # 0 = use all processors

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def semantic_dict(self) -> dict:
        """The result-determining configuration: everything but workers.

        Worker count is execution infrastructure; results are identical for
        any value, so it belongs in neither the hash nor output metadata.
        """
        return {k: v for k, v in self.to_dict().items() if k != "workers"}

    def config_hash(self) -> str:
        return sha256_of(self.semantic_dict())


_SECTION_TYPES = {
    "fit": FitConfig,
    "extract": ExtractConfig,
    "models": ModelConfig,
    "protocol": ProtocolConfig,
}


class ConfigError(ValueError):
    pass


def _build_section(cls, data: dict, path: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown config key: {path}{key}")
        if key == "forest" and isinstance(value, dict):
            value = _build_section(ForestConfig, value, f"{path}forest.")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config section {path!r}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) dict, rejecting unknown keys."""
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, f"{key}.")
        elif key == "workers":
            kwargs[key] = int(value)
        else:
            raise ConfigError(f"unknown config key: {key}")
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return config_from_dict(data)


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_of(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
