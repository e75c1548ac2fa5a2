"""Run configuration: nested dataclasses loaded from strict JSON."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .association import AssociationConfig
from .geometry import BevGrid
from .kalman import KfNoiseConfig
from .metrics import EvalConfig
from .pillars import FusionConfig
from .simulator import ScenarioConfig
from .tracker import TrackerConfig


class ConfigError(ValueError):
    """Unreadable or invalid configuration."""


class Experiment(str, Enum):
    SINGLE = "single"
    ABLATE_THRESHOLD = "ablate_threshold"
    ABLATE_WEIGHTS = "ablate_weights"
    ABLATE_TRADEOFF = "ablate_tradeoff"
    ABLATE_VELNOISE = "ablate_velnoise"


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    grid: BevGrid = field(default_factory=BevGrid)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    output_dir: str = "out"
    experiment: Experiment = Experiment.SINGLE
    n_scenes: int = 4
    ablation_seeds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        if self.n_scenes < 1 or self.ablation_seeds < 1:
            raise ValueError("n_scenes and ablation_seeds must be >= 1")
        if self.grid.range_m != self.scenario.range_m:
            raise ValueError("grid.range_m and scenario.range_m must agree")


# nested dataclass fields, by parent type
_NESTED = {
    RunConfig: {
        "scenario": ScenarioConfig,
        "tracker": TrackerConfig,
        "eval": EvalConfig,
        "grid": BevGrid,
        "fusion": FusionConfig,
    },
    TrackerConfig: {"association": AssociationConfig, "kf_noise": KfNoiseConfig},
}


def build(cls, data, where: str = "config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get(cls, {}).get(key)
        if sub is not None:
            kwargs[key] = build(sub, value, f"{where}.{key}")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [to_dict(v) for v in obj]
    return obj


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return build(RunConfig, data, str(path))


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of everything that affects results (the output location does not)."""
    d = to_dict(cfg)
    d.pop("output_dir")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=seed))
