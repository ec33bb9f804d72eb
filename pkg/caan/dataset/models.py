from collections import Counter
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import StrEnum
from pathlib import Path

import numpy as np

from caan.exceptions import ValidationError

DEFAULT_SCENE_NAMES = (
    "airport",
    "shopping_mall",
    "metro_station",
    "street_pedestrian",
    "public_square",
    "street_traffic",
    "tram",
    "bus",
    "metro",
    "park",
)
DEFAULT_DEVICE_NAMES = ("A", "B", "C")


class Split(StrEnum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    scene: int
    device: int
    path: Path

    @property
    def cell(self) -> tuple[int, int]:
        return self.scene, self.device


@dataclass
class DatasetManifest:
    records: list[ClipRecord]
    scene_names: tuple[str, ...] = DEFAULT_SCENE_NAMES
    device_names: tuple[str, ...] = DEFAULT_DEVICE_NAMES
    split: Split = Split.TRAIN
    root: Path | None = None

    def __post_init__(self) -> None:
        self.split = Split(self.split)
        self.scene_names = tuple(self.scene_names)
        self.device_names = tuple(self.device_names)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def classes(self) -> int:
        return len(self.scene_names)

    @property
    def devices(self) -> int:
        return len(self.device_names)

    def validate(self) -> None:
        if not self.records:
            msg = f"{self.split} manifest has no records"
            raise ValidationError(msg)
        seen: set[str] = set()
        for record in self.records:
            if not 0 <= record.scene < self.classes:
                msg = f"clip '{record.clip_id}': scene {record.scene} out of range 0..{self.classes - 1}"
                raise ValidationError(msg)
            if not 0 <= record.device < self.devices:
                msg = f"clip '{record.clip_id}': device {record.device} out of range 0..{self.devices - 1}"
                raise ValidationError(msg)
            if record.clip_id in seen:
                msg = f"duplicate clip id '{record.clip_id}'"
                raise ValidationError(msg)
            seen.add(record.clip_id)

    def cell_counts(self) -> Counter[tuple[int, int]]:
        return Counter(record.cell for record in self.records)

    def missing_cells(self) -> list[tuple[int, int]]:
        counts = self.cell_counts()
        return [(k, n) for k in range(self.classes) for n in range(self.devices) if not counts[(k, n)]]

    def filter(self, *, device: int | None = None, scene: int | None = None) -> "DatasetManifest":
        records = [
            r
            for r in self.records
            if (device is None or r.device == device) and (scene is None or r.scene == scene)
        ]
        return replace(self, records=records)

    def with_records(self, records: list[ClipRecord], split: Split | str) -> "DatasetManifest":
        return replace(self, records=list(records), split=Split(split))


@dataclass(frozen=True, eq=False)
class DeviceProfile:
    """Recording-chain distortion applied in the power domain of a log-mel clip."""

    name: str
    gain: float = 1.0
    tilt: np.ndarray = field(default_factory=lambda: np.ones(64))
    noise_floor: np.ndarray = field(default_factory=lambda: np.zeros(64))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gain <= 0:
            msg = f"device '{self.name}': gain must be positive, got {self.gain}"
            raise ValidationError(msg)
        tilt = np.asarray(self.tilt, dtype=np.float64)
        floor = np.asarray(self.noise_floor, dtype=np.float64)
        if np.any(tilt <= 0):
            msg = f"device '{self.name}': tilt must be strictly positive"
            raise ValidationError(msg)
        if np.any(floor < 0):
            msg = f"device '{self.name}': noise floor cannot be negative"
            raise ValidationError(msg)
        object.__setattr__(self, "tilt", tilt)
        object.__setattr__(self, "noise_floor", floor)

    @property
    def is_identity(self) -> bool:
        return self.gain == 1.0 and bool(np.all(self.tilt == 1.0)) and not np.any(self.noise_floor)


@dataclass(frozen=True, eq=False)
class SceneProto:
    """Log-mel template of one scene: raised bands, their modulation and a tonal line."""

    scene: int
    active_bands: tuple[int, ...]
    modulation_cycles: int
    modulation_phase: float
    modulation_depth: float
    tonal_mix: float
    template: np.ndarray

    def __post_init__(self) -> None:
        if not self.active_bands:
            msg = f"scene {self.scene} template has no active band"
            raise ValidationError(msg)
