"""Experiment configuration: a YAML tree mirroring nested dataclasses.

An empty file yields the full default configuration (stock agent
hyperparameters, edge-collab scenario, desk-scale episodes). Unknown keys
and out-of-range values are load errors naming the offending key path, and
a dumped config reloads to an equal value.
"""

from __future__ import annotations

import dataclasses
import os
import types
import typing
from dataclasses import dataclass, field

import yaml

from .allocator import AffinityWeights, ControlModule, EdgeResource
from .boiler import BoilerConfig
from .pid import DEFAULT_LEVEL_GAINS, DEFAULT_PRESSURE_GAINS, PidGains

ENV_OUT_VAR = "EDGELOOP_OUT"
DESK_PRESET_STEPS = 500
DAY_PRESET_STEPS = 17280  # one simulated day of 5 s periods

SCENARIOS = ("edge-collab", "cloud-only")
CONTROLLERS = ("drl", "pid")
EPISODE_PRESETS = {"desk": DESK_PRESET_STEPS, "day": DAY_PRESET_STEPS}

# one-way link delays and per-decision compute time, milliseconds
LATENCY_PRESETS = {
    "default": {
        "cloud_uplink_ms": 700,
        "cloud_downlink_ms": 700,
        "edge_uplink_ms": 100,
        "edge_downlink_ms": 100,
        "inter_edge_ms": 100,
        "compute_ms": 100,
    },
    "slow-cloud": {
        "cloud_uplink_ms": 29950,
        "cloud_downlink_ms": 29950,
        "edge_uplink_ms": 100,
        "edge_downlink_ms": 100,
        "inter_edge_ms": 100,
        "compute_ms": 100,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class AgentConfig:
    """Q-learner settings; stock defaults, sized for desk-scale runs."""

    hidden_layers: list[int] = field(default_factory=lambda: [64, 64])
    learning_rate: float = 0.01
    gamma: float = 0.95
    target_update_freq: int = 100
    batch_size: int = 16
    buffer_capacity: int = 5000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.3  # of total training action steps
    warmup: int = 1000  # buffered transitions required before updates begin
    # harness default bounds per-sample TD errors in the gradient: the plant's
    # fixed failure penalty (-500) dwarfs dense rewards and unbounded errors
    # blow up plain SGD at the stock learning rate; None turns it off
    td_error_clip: float | None = 10.0

    def __post_init__(self):
        if not all(isinstance(h, int) and h >= 1 for h in self.hidden_layers):
            raise ConfigError("hidden_layers entries must be positive integers")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError(f"gamma must be in (0,1), got {self.gamma}")
        if self.target_update_freq < 1:
            raise ConfigError("target_update_freq must be >= 1")
        if self.batch_size < 1 or self.batch_size > self.buffer_capacity:
            raise ConfigError("batch_size must be >= 1 and <= buffer_capacity")
        for name in ("epsilon_start", "epsilon_end"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0,1], got {v}")
        if not (0.0 < self.epsilon_decay_fraction <= 1.0):
            raise ConfigError(
                f"epsilon_decay_fraction must be in (0,1], got {self.epsilon_decay_fraction}"
            )
        if self.warmup < self.batch_size:
            raise ConfigError("warmup must be >= batch_size")
        if self.td_error_clip is not None and self.td_error_clip <= 0:
            raise ConfigError("td_error_clip must be positive when set")


@dataclass(frozen=True)
class PidConfig:
    level: PidGains = field(default_factory=lambda: DEFAULT_LEVEL_GAINS)
    pressure: PidGains = field(default_factory=lambda: DEFAULT_PRESSURE_GAINS)


@dataclass(frozen=True)
class LatencyConfig:
    """Link delays; unset values fall back to the named preset."""

    preset: str = "default"
    jitter: float = 0.0
    cloud_uplink_ms: int | None = None
    cloud_downlink_ms: int | None = None
    edge_uplink_ms: int | None = None
    edge_downlink_ms: int | None = None
    inter_edge_ms: int | None = None
    compute_ms: int | None = None

    def __post_init__(self):
        if self.preset not in LATENCY_PRESETS:
            raise ConfigError(
                f"preset must be one of {sorted(LATENCY_PRESETS)}, got {self.preset!r}"
            )
        if not (0.0 <= self.jitter < 1.0):
            raise ConfigError(f"jitter must be in [0,1), got {self.jitter}")
        for name in (
            "cloud_uplink_ms",
            "cloud_downlink_ms",
            "edge_uplink_ms",
            "edge_downlink_ms",
            "inter_edge_ms",
            "compute_ms",
        ):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1 ms, got {v}")

    def resolved(self) -> dict[str, int]:
        """Concrete delays with preset defaults filled in.

        The edge-to-cloud leg is derived so that a reading forwarded from
        an edge reaches the cloud in exactly the direct sensor-to-cloud
        time; the split requires the cloud legs to exceed the edge legs.
        """
        values = dict(LATENCY_PRESETS[self.preset])
        for name in values:
            override = getattr(self, name)
            if override is not None:
                values[name] = override
        if values["cloud_uplink_ms"] <= values["edge_uplink_ms"]:
            raise ConfigError("cloud_uplink_ms must exceed edge_uplink_ms")
        if values["cloud_downlink_ms"] <= values["edge_downlink_ms"]:
            raise ConfigError("cloud_downlink_ms must exceed edge_downlink_ms")
        values["edge_cloud_up_ms"] = values["cloud_uplink_ms"] - values["edge_uplink_ms"]
        values["edge_cloud_down_ms"] = (
            values["cloud_downlink_ms"] - values["edge_downlink_ms"]
        )
        return values


def _default_edges() -> list[EdgeResource]:
    return [
        EdgeResource("edge-0", capacity=6.0, current_load=0.5, bandwidth_mbps=100.0, compute_rating=1.0),
        EdgeResource("edge-1", capacity=6.0, current_load=0.5, bandwidth_mbps=80.0, compute_rating=0.8),
    ]


def _default_background_modules() -> list[ControlModule]:
    return [
        ControlModule("bg-analytics", load=2.0, intensity=0.4),
        ControlModule("bg-telemetry", load=1.5, intensity=0.6),
    ]


@dataclass(frozen=True)
class AllocatorRunConfig:
    """Resource pool, module set, and rebalancing cadence for a run."""

    mode: str = "exact"  # exact (greedy fallback past the guard) or greedy
    weights: AffinityWeights = field(default_factory=AffinityWeights)
    edges: list[EdgeResource] = field(default_factory=_default_edges)
    background_modules: list[ControlModule] = field(default_factory=_default_background_modules)
    control_module_load: float = 1.0
    control_module_intensity: float = 1.0
    rebalance_interval_steps: int = 100
    load_drift: float = 0.25  # std of per-interval background-load walk
    load_max: float = 2.0  # background load stays in [0, load_max]

    def __post_init__(self):
        if self.mode not in ("exact", "greedy"):
            raise ConfigError(f"mode must be 'exact' or 'greedy', got {self.mode!r}")
        if not self.edges:
            raise ConfigError("at least one edge resource is required")
        if self.control_module_load <= 0:
            raise ConfigError("control_module_load must be positive")
        if not (0.0 < self.control_module_intensity <= 1.0):
            raise ConfigError("control_module_intensity must be in (0,1]")
        if self.rebalance_interval_steps < 1:
            raise ConfigError("rebalance_interval_steps must be >= 1")
        if self.load_drift < 0:
            raise ConfigError("load_drift must be >= 0")
        if self.load_max < 0:
            raise ConfigError("load_max must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "edge-collab"
    controller: str = "drl"
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    episodes: int = 300
    episode_preset: str = "desk"
    max_steps: int | None = None  # overrides the preset when set
    eval_episodes: int = 20
    accuracy_sample_every: int = 10
    out_dir: str | None = None
    trace_file: str | None = None
    trace_sensor: str | None = None
    trace_disturbance_scale: float = 0.0  # degrees C per unit trace deviation
    plant: BoilerConfig = field(default_factory=BoilerConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    allocator: AllocatorRunConfig = field(default_factory=AllocatorRunConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.controller not in CONTROLLERS:
            raise ConfigError(
                f"controller must be one of {CONTROLLERS}, got {self.controller!r}"
            )
        if not self.seeds:
            raise ConfigError("seeds must contain at least one seed")
        if self.episodes < 0:
            raise ConfigError(f"episodes must be >= 0, got {self.episodes}")
        if self.episode_preset not in EPISODE_PRESETS:
            raise ConfigError(
                f"episode_preset must be one of {sorted(EPISODE_PRESETS)}, "
                f"got {self.episode_preset!r}"
            )
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eval_episodes < 0:
            raise ConfigError("eval_episodes must be >= 0")
        if self.accuracy_sample_every < 1:
            raise ConfigError("accuracy_sample_every must be >= 1")
        if self.trace_disturbance_scale < 0:
            raise ConfigError("trace_disturbance_scale must be >= 0")

    @property
    def steps_per_episode(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return EPISODE_PRESETS[self.episode_preset]


def _convert(hint, raw, path: str):
    origin = typing.get_origin(hint)
    if origin is typing.Union or origin is types.UnionType:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw is None:
            return None
        return _convert(args[0], raw, path)
    if origin is list:
        if not isinstance(raw, list):
            raise ConfigError(f"{path}: expected a list")
        (item_type,) = typing.get_args(hint)
        return [_convert(item_type, item, f"{path}[{i}]") for i, item in enumerate(raw)]
    if dataclasses.is_dataclass(hint):
        return _build(hint, raw, path)
    if hint is bool:
        if not isinstance(raw, bool):
            raise ConfigError(f"{path}: expected a boolean, got {raw!r}")
        return raw
    if hint is int:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"{path}: expected an integer, got {raw!r}")
        return raw
    if hint is float:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {raw!r}")
        return float(raw)
    if hint is str:
        if not isinstance(raw, str):
            raise ConfigError(f"{path}: expected a string, got {raw!r}")
        return raw
    raise ConfigError(f"{path}: unsupported config field type {hint!r}")


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in data.items():
        if key not in names:
            raise ConfigError(f"unknown key {path}.{key}" if path else f"unknown key {key}")
        child = f"{path}.{key}" if path else key
        kwargs[key] = _convert(hints[key], raw, child)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def config_from_dict(data: dict | None) -> RunConfig:
    return _build(RunConfig, data or {}, "")


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def load_config(path) -> RunConfig:
    """Load and validate a YAML config; an empty file or no path means defaults."""
    if path is None:
        data = {}
    else:
        with open(path) as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    config = config_from_dict(data)
    if config.trace_file is not None and not os.path.exists(config.trace_file):
        raise ConfigError(f"trace_file does not exist: {config.trace_file}")
    # surface preset/override inconsistencies at load time
    config.latency.resolved()
    return config


def save_config(config: RunConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)


def resolve_out_dir(cli_value: str | None, config: RunConfig) -> str:
    """Output directory precedence: CLI flag, config key, environment, ./out."""
    if cli_value:
        return cli_value
    if config.out_dir:
        return config.out_dir
    env = os.environ.get(ENV_OUT_VAR)
    if env:
        return env
    return "out"
