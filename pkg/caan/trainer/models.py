import json
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from dataclasses import replace
from enum import StrEnum
from typing import Any

import numpy as np

from caan.exceptions import ConfigError
from caan.network.models import DEFAULT_KERNEL_SIZE
from caan.network.models import DEFAULT_WIDTHS
from caan.network.models import DEVICE_WIDTHS
from caan.network.models import LAYERS
from caan.network.models import DeviceNet
from caan.network.models import SceneNet
from caan.network.models import TopologyKind
from caan.poolheads.models import HeadKind


class StrategyKind(StrEnum):
    SINGLE_DEVICE = "single_device"
    JOINT = "joint"
    TEACHER_FORCING = "teacher_forcing"
    MULTI_TASK = "multi_task"

    @property
    def conditional(self) -> bool:
        return self in {StrategyKind.TEACHER_FORCING, StrategyKind.MULTI_TASK}

    @property
    def uses_device_net(self) -> bool:
        return self is StrategyKind.MULTI_TASK


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    condition_layer: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind.conditional and self.condition_layer is None:
            msg = f"strategy '{self.kind}' needs a condition layer"
            raise ConfigError(msg)
        if not self.kind.conditional and self.condition_layer is not None:
            msg = f"strategy '{self.kind}' does not condition on the device, drop condition_layer"
            raise ConfigError(msg)
        if self.condition_layer is not None and not 1 <= self.condition_layer <= LAYERS:
            msg = f"condition layer must be in 1..{LAYERS}, got {self.condition_layer}"
            raise ConfigError(msg)


def _enum(enum_cls: type[StrEnum], value: Any, key: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError as exc:
        msg = f"{key} must be one of {[member.value for member in enum_cls]}, got '{value}'"
        raise ConfigError(msg) from exc


@dataclass(frozen=True)
class TrainConfig:
    """One training run. Defaults follow the published schedule, cut to desk scale."""

    strategy: StrategyKind = StrategyKind.JOINT
    condition_layer: int | None = None
    topology: TopologyKind = TopologyKind.ATROUS
    head: HeadKind = HeadKind.ATT
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    device_widths: tuple[int, ...] = DEVICE_WIDTHS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    learning_rate: float = 0.001
    lr_decay: float = 0.9
    lr_period: int = 200
    max_iterations: int = 2000
    batch_size: int = 16
    seed: int = 0
    lambda_high: float = 1.0
    lambda_low: float = 0.0001
    lambda_threshold: float = 0.98
    eval_interval: int = 100
    device: int | None = None
    validation_fraction: float = 0.1
    prefetch: int = 2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", _enum(StrategyKind, self.strategy, "strategy"))
        object.__setattr__(self, "topology", _enum(TopologyKind, self.topology, "topology"))
        object.__setattr__(self, "head", _enum(HeadKind, self.head, "head"))
        object.__setattr__(self, "widths", tuple(self.widths))
        object.__setattr__(self, "device_widths", tuple(self.device_widths))
        Strategy(self.strategy, self.condition_layer)
        for key in ("learning_rate", "lr_decay", "lambda_high", "lambda_low", "adam_epsilon"):
            if getattr(self, key) <= 0:
                msg = f"{key} must be positive, got {getattr(self, key)}"
                raise ConfigError(msg)
        for key in ("lr_period", "max_iterations", "batch_size", "eval_interval"):
            if getattr(self, key) < 1:
                msg = f"{key} must be at least 1, got {getattr(self, key)}"
                raise ConfigError(msg)
        if not 0 < self.lambda_threshold <= 1:
            msg = f"lambda_threshold must be in (0, 1], got {self.lambda_threshold}"
            raise ConfigError(msg)
        if not 0 <= self.validation_fraction < 1:
            msg = f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            raise ConfigError(msg)
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            msg = "Adam betas must be in [0, 1)"
            raise ConfigError(msg)
        if self.prefetch < 0:
            msg = f"prefetch must be non-negative, got {self.prefetch}"
            raise ConfigError(msg)
        if self.device is not None and self.strategy is not StrategyKind.SINGLE_DEVICE:
            msg = "device only applies to the single_device strategy"
            raise ConfigError(msg)

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def override(self, **values: Any) -> "TrainConfig":
        """Copy with the given non-``None`` values replaced."""
        unknown = set(values) - set(self.keys())
        if unknown:
            msg = f"unknown configuration keys {sorted(unknown)}"
            raise ConfigError(msg)
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key in ("strategy", "topology", "head"):
            data[key] = str(data[key])
        data["widths"] = list(self.widths)
        data["device_widths"] = list(self.device_widths)
        return data


@dataclass
class TrainReport:
    """
    Traces of one run.

    ``scene_loss`` through ``device_accuracy`` hold one entry per iteration;
    ``validation_accuracy`` holds one entry per evaluation, taken at ``eval_iterations``.
    """

    scene_loss: list[float] = field(default_factory=list)
    device_loss: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    scene_accuracy: list[float] = field(default_factory=list)
    device_accuracy: list[float] = field(default_factory=list)
    eval_iterations: list[int] = field(default_factory=list)
    validation_accuracy: dict[str, list[float]] = field(default_factory=dict)
    lambda_switch_iteration: int | None = None
    wall_clock: float = 0.0

    def __len__(self) -> int:
        return len(self.loss)

    def record(  # noqa: PLR0913
        self,
        scene_loss: float,
        device_loss: float,
        loss: float,
        learning_rate: float,
        lam: float,
        scene_accuracy: float,
        device_accuracy: float,
    ) -> None:
        self.scene_loss.append(scene_loss)
        self.device_loss.append(device_loss)
        self.loss.append(loss)
        self.learning_rate.append(learning_rate)
        self.lam.append(lam)
        self.scene_accuracy.append(scene_accuracy)
        self.device_accuracy.append(device_accuracy)

    def record_evaluation(self, iteration: int, accuracies: dict[str, float]) -> None:
        self.eval_iterations.append(iteration)
        for name, value in accuracies.items():
            self.validation_accuracy.setdefault(name, []).append(value)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainReport":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Normalizer:
    """Global mean/variance standardisation fitted on the training split."""

    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, arrays: list[np.ndarray]) -> "Normalizer":
        stacked = np.stack([np.asarray(a, dtype=np.float64) for a in arrays])
        # float32 so the statistics survive a round trip through the model file
        mean, std = float(np.float32(stacked.mean())), float(np.float32(stacked.std()))
        return cls(mean, std if std > 0 else 1.0)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return ((np.asarray(values, dtype=np.float64) - self.mean) / self.std).astype(np.float32)

    def records(self) -> dict[str, np.ndarray]:
        return {"input.norm.mean": np.array([self.mean]), "input.norm.std": np.array([self.std])}

    @classmethod
    def from_records(cls, records: dict[str, np.ndarray]) -> "Normalizer":
        if "input.norm.mean" not in records:
            return cls()
        return cls(float(records["input.norm.mean"][0]), float(records["input.norm.std"][0]))


@dataclass
class TrainResult:
    config: TrainConfig
    scene: SceneNet
    device: DeviceNet | None
    report: TrainReport
    normalizer: Normalizer
    scene_names: tuple[str, ...] = ()
    device_names: tuple[str, ...] = ()
