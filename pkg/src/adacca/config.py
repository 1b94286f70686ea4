"""Experiment configuration: JSON documents, presets, validation.

A single JSON object describes a full experiment: the stream source, the
engine parameters, the metric cadence, and (optionally) the detection
setup.  Presets capture the two reference experiment shapes; any field
can be overridden by a user config file or command-line flags.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field

from .adaptive import LineSearchConfig, StepConfig
from .batch import BrockettWeights, default_weights

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class GenerateStream:
    kind: str = "generate"
    n: int = 36
    m: int = 34
    p_true: int = 30
    T: int = 2000
    noise_sigma: float = 0.05
    change_points: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "change_points", tuple(self.change_points))
        if self.kind != "generate":
            raise ConfigError(f"bad stream kind {self.kind!r}")


@dataclass(frozen=True)
class CsvStream:
    path: str
    x_columns: tuple[int, ...]
    y_columns: tuple[int, ...]
    kind: str = "csv"
    header: bool = True
    labels: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "x_columns", tuple(self.x_columns))
        object.__setattr__(self, "y_columns", tuple(self.y_columns))
        if self.kind != "csv":
            raise ConfigError(f"bad stream kind {self.kind!r}")
        if not self.path:
            raise ConfigError("csv stream needs a path")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "window"
    length: int = 100
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("window", "random"):
            raise ConfigError(f"unknown init kind {self.kind!r}")
        if self.length < 1:
            raise ConfigError("window length must be >= 1")
        if self.scale <= 0:
            raise ConfigError("init scale must be positive")


@dataclass(frozen=True)
class EngineConfig:
    p: int = 4
    beta: float = 0.98
    weight_scheme: str = "linear"
    metric_steps: int = 1
    cost_steps: int = 1
    line_search: LineSearchConfig = LineSearchConfig()
    inv_refresh_period: int = 500
    mean_mode: str = "paper"
    init: InitSpec = InitSpec()

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError("rank p must be >= 1")
        if not 0 < self.beta <= 1:
            raise ConfigError("forgetting factor must lie in (0, 1]")
        if self.weight_scheme != "linear":
            raise ConfigError(f"unknown weight scheme {self.weight_scheme!r}")

    def weights(self) -> BrockettWeights:
        return default_weights(self.p)

    def step_config(self) -> StepConfig:
        return StepConfig(
            weights=self.weights(),
            line_search=self.line_search,
            metric_steps=self.metric_steps,
            cost_steps=self.cost_steps,
            inv_refresh_period=self.inv_refresh_period,
            mean_mode=self.mean_mode,
        )


@dataclass(frozen=True)
class DetectSettings:
    tau: float | None = None
    debounce: int = 5
    eval_window: int = 5
    train_runs: int = 1

    def __post_init__(self):
        if self.debounce < 1 or self.eval_window < 1:
            raise ConfigError("debounce and eval_window must be >= 1")
        if self.train_runs < 1:
            raise ConfigError("need at least one training run")


@dataclass(frozen=True)
class ExperimentConfig:
    stream: GenerateStream | CsvStream = field(default_factory=GenerateStream)
    engine: EngineConfig = EngineConfig()
    metrics_every: int = 10
    detect: DetectSettings | None = None
    out_dir: str = "out"
    trials: int = 1
    base_seed: int = 0
    jobs: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.metrics_every < 1:
            raise ConfigError("metric cadence must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema_version}")
        if isinstance(self.stream, GenerateStream):
            if self.engine.p > min(self.stream.n, self.stream.m):
                raise ConfigError("rank p exceeds the stream dimensions")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("change_points", "x_columns", "y_columns"):
            if key in d["stream"]:
                d["stream"][key] = list(d["stream"][key])
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return data


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        return _config_from_dict(data)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _config_from_dict(data: dict) -> ExperimentConfig:
    data = copy.deepcopy(data)
    _build(ExperimentConfig, data, "config")
    stream_data = data.pop("stream", {})
    kind = stream_data.get("kind", "generate")
    if kind == "generate":
        stream = GenerateStream(**_build(GenerateStream, stream_data, "stream"))
    elif kind == "csv":
        stream = CsvStream(**_build(CsvStream, stream_data, "stream"))
    else:
        raise ConfigError(f"unknown stream kind {kind!r}")
    engine_data = data.pop("engine", {})
    _build(EngineConfig, engine_data, "engine")
    ls = LineSearchConfig(**_build(LineSearchConfig, engine_data.pop("line_search", {}),
                                   "engine.line_search"))
    init = InitSpec(**_build(InitSpec, engine_data.pop("init", {}), "engine.init"))
    engine = EngineConfig(line_search=ls, init=init, **engine_data)
    detect_data = data.pop("detect", None)
    detect = (DetectSettings(**_build(DetectSettings, detect_data, "detect"))
              if detect_data is not None else None)
    return ExperimentConfig(stream=stream, engine=engine, detect=detect, **data)


def config_from_json(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_json(fh.read())


PRESETS: dict[str, dict] = {
    # Stationary tracking of a wide correlated subspace, long horizon.
    "toy-5.1": {
        "stream": {"kind": "generate", "n": 36, "m": 34, "p_true": 34,
                   "T": 2000, "noise_sigma": 0.05, "change_points": []},
        "engine": {"p": 30, "beta": 0.99,
                   "init": {"kind": "random", "scale": 1.0}},
        "metrics_every": 10,
        "trials": 50,
    },
    # Low-rank detection setup: warm start on 100 samples, three abrupt
    # subspace switches, thresholded residual criterion.
    "bci-5.2": {
        "stream": {"kind": "generate", "n": 36, "m": 36, "p_true": 8,
                   "T": 2000, "noise_sigma": 0.05,
                   "change_points": [600, 1100, 1600]},
        "engine": {"p": 4, "beta": 0.98,
                   "init": {"kind": "window", "length": 100}},
        "metrics_every": 10,
        "detect": {"tau": None, "debounce": 5, "eval_window": 5, "train_runs": 1},
        "trials": 1,
    },
}


def _deep_update(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(preset: str | None = None, config_data: dict | None = None,
                   **overrides) -> ExperimentConfig:
    """Merge preset < config file < explicit flag overrides."""
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        data = _deep_update(data, PRESETS[preset])
    if config_data is not None:
        data = _deep_update(data, config_data)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return config_from_dict(data)
