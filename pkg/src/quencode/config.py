"""Experiment configuration: schema, defaults and TOML loading."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .encoders import EncodingMethod
from .errors import ConfigError
from .model import DEFAULT_LAYERS, parse_layers
from .noise import DDPolicy, NoiseConfig, preset
from .train import TrainConfig


class Scenario(str, enum.Enum):
    PURE = "pure"
    NOISY = "noisy"
    NOISY_DD = "noisy_dd"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {"puresim": "pure", "noisysim": "noisy", "noisysimdd": "noisy_dd"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown scenario {value!r}; choose from {[s.value for s in cls]}") from None


DEFAULT_CONFIG_TEXT = """\
# quencode experiment configuration
seed = 0
encoding = "rotation"        # basis | rotation | amplitude
scenario = "pure"            # pure | noisy | noisy_dd
noise_preset = "torino_like" # torino_like | legacy_like | coherent_idle | none
output_dir = "runs/default"
record_wall_time = false     # true writes measured seconds into metrics.csv (not byte-reproducible)
workers = 1

[train]
learning_rate = 0.01
epochs_per_class = 5
batch_size = 1
gradient_method = "parameter_shift"

[model]
layers = "dual,entangle:cz,single"

[data]
mnist_dir = "data/mnist36"
digits = [3, 6]
n_train = 812
n_test = 187
pca_solver = "jacobi"
rotation_range = 3.141592653589793

[noise]
# any NoiseConfig field set here overrides the preset, e.g.
# p_depol_2q = 0.02

[dd]
sequence = ["X", "X"]
min_idle_duration = 1.0

[grid]
encodings = ["basis", "rotation", "amplitude"]
scenarios = ["pure", "noisy", "noisy_dd"]
repeats = 1
"""


@dataclass(frozen=True)
class DataConfig:
    mnist_dir: Optional[str] = "data/mnist36"
    digits: Tuple[int, int] = (3, 6)
    n_train: int = 812
    n_test: int = 187
    pca_solver: str = "jacobi"
    rotation_range: float = math.pi
    synthetic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if len(self.digits) != 2:
            raise ConfigError(f"exactly two digits are classified, got {self.digits}")
        if self.n_train < 2 or self.n_test < 1:
            raise ConfigError(f"need n_train >= 2 and n_test >= 1, got {self.n_train}/{self.n_test}")
        if not 0 < self.rotation_range <= 2 * math.pi:
            raise ConfigError(f"rotation_range must lie in (0, 2*pi], got {self.rotation_range}")


@dataclass(frozen=True)
class ExperimentConfig:
    encoding: EncodingMethod = EncodingMethod.ROTATION
    scenario: Scenario = Scenario.PURE
    noise_preset: str = "torino_like"
    noise_overrides: Dict[str, float] = field(default_factory=dict)
    dd: DDPolicy = field(default_factory=DDPolicy)
    train: TrainConfig = field(default_factory=TrainConfig)
    layers: Tuple = DEFAULT_LAYERS
    data: DataConfig = field(default_factory=DataConfig)
    output_dir: str = "runs/default"
    seed: int = 0
    record_wall_time: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "encoding", EncodingMethod.parse(self.encoding))
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        object.__setattr__(self, "layers", parse_layers(self.layers))
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.noise_config()

    def noise_config(self) -> NoiseConfig:
        return preset(self.noise_preset, **self.noise_overrides)

    def backend(self):
        from .model import PURE
        from .noise import NoisyBackend

        if self.scenario is Scenario.PURE:
            return PURE
        dd = replace(self.dd, enabled=self.scenario is Scenario.NOISY_DD)
        return NoisyBackend(self.noise_config(), dd)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    @property
    def cell_name(self) -> str:
        name = f"{self.encoding.value}_{self.scenario.value}"
        if self.scenario is not Scenario.PURE:
            name += f"_{self.noise_preset}"
        return f"{name}_seed{self.seed}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "encoding": self.encoding.value,
            "scenario": self.scenario.value,
            "noise_preset": self.noise_preset,
            "noise": asdict(self.noise_config()),
            "dd": {"sequence": list(self.dd.sequence), "min_idle_duration": self.dd.min_idle_duration},
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs_per_class": self.train.epochs_per_class,
                "batch_size": self.train.batch_size,
                "gradient_method": self.train.gradient_method.value,
            },
            "model": {"layers": ",".join(str(layer) for layer in self.layers)},
            "data": {**asdict(self.data), "digits": list(self.data.digits)},
            "output_dir": self.output_dir,
            "record_wall_time": self.record_wall_time,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class GridSpec:
    encodings: Tuple[EncodingMethod, ...] = tuple(EncodingMethod)
    scenarios: Tuple[Scenario, ...] = tuple(Scenario)
    repeats: int = 1

    def __post_init__(self):
        object.__setattr__(self, "encodings", tuple(EncodingMethod.parse(e) for e in self.encodings))
        object.__setattr__(self, "scenarios", tuple(Scenario.parse(s) for s in self.scenarios))
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")


_TOP_KEYS = {"seed", "encoding", "scenario", "noise_preset", "output_dir", "record_wall_time", "workers"}
_SECTIONS = {"train", "model", "data", "noise", "dd", "grid"}


def parse_config(doc: Dict[str, Any], base_dir: Optional[Path] = None) -> Tuple[ExperimentConfig, GridSpec]:
    unknown = set(doc) - _TOP_KEYS - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        top = {k: doc[k] for k in _TOP_KEYS if k in doc}
        data = dict(doc.get("data", {}))
        if base_dir is not None and data.get("mnist_dir") and not Path(data["mnist_dir"]).is_absolute():
            data["mnist_dir"] = str(base_dir / data["mnist_dir"])
        dd = dict(doc.get("dd", {}))
        if "sequence" in dd:
            dd["sequence"] = tuple(dd["sequence"])
        cfg = ExperimentConfig(
            train=TrainConfig(**doc.get("train", {})),
            layers=doc.get("model", {}).get("layers", DEFAULT_LAYERS),
            data=DataConfig(**data),
            noise_overrides=dict(doc.get("noise", {})),
            dd=DDPolicy(**dd),
            **top,
        )
        grid = GridSpec(**doc.get("grid", {}))
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from None
    return cfg, grid


def load_config(path=None) -> Tuple[ExperimentConfig, GridSpec]:
    """Read a TOML config; relative data paths resolve against the file's directory."""
    if path is None:
        return parse_config(tomllib.loads(DEFAULT_CONFIG_TEXT))
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent)
