import csv
import io
import json
from dataclasses import dataclass
from dataclasses import field
from typing import Any

import numpy as np

from caan.exceptions import ContractError
from caan.exceptions import ShapeError


@dataclass(frozen=True)
class Prediction:
    clip_id: str
    true_class: int
    predicted_class: int
    device: int
    predicted_device: int | None = None

    @property
    def correct(self) -> bool:
        return self.true_class == self.predicted_class


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows as true classes and columns as predicted classes."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:  # noqa: PLR2004
            msg = f"confusion matrix must be square, got {counts.shape}"
            raise ShapeError(msg)
        if counts.shape[0] != len(self.class_names):
            msg = f"{len(self.class_names)} class names for a {counts.shape[0]}-class matrix"
            raise ShapeError(msg)
        if np.any(counts < 0):
            msg = "confusion counts cannot be negative"
            raise ContractError(msg)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def classes(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["true\\predicted", *self.class_names])
        for name, row in zip(self.class_names, self.counts, strict=True):
            writer.writerow([name, *row.tolist()])
        return buffer.getvalue()


@dataclass
class Metrics:
    """
    Unweighted class-wise accuracies.

    ``classwise`` maps device name to class name to accuracy; classes without clips on
    a device are absent there and listed in ``skipped``.
    """

    classwise: dict[str, dict[str, float]]
    device_average: dict[str, float]
    overall: float
    correct: dict[str, int] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, list[str]] = field(default_factory=dict)
    device_branch_accuracy: float | None = None

    def to_dict(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            device: {"classes": classes, "average": self.device_average[device]}
            for device, classes in self.classwise.items()
        }
        document["overall"] = self.overall
        document["correct"] = self.correct
        document["counts"] = self.counts
        if any(self.skipped.values()):
            document["skipped"] = {k: v for k, v in self.skipped.items() if v}
        if self.device_branch_accuracy is not None:
            document["device_branch_accuracy"] = self.device_branch_accuracy
        return document

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def lines(self) -> list[str]:
        out = [f"{device}: {average:.4f}" for device, average in self.device_average.items()]
        out.append(f"average: {self.overall:.4f}")
        if self.device_branch_accuracy is not None:
            out.append(f"CNN-d accuracy: {self.device_branch_accuracy:.4f}")
        return out


@dataclass(frozen=True, eq=False)
class HeatMap:
    values: np.ndarray
    clip_id: str
    class_index: int
    class_name: str = ""
    scene: int | None = None
    device: int | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:  # noqa: PLR2004
            msg = f"heat map must be a matrix, got {values.shape}"
            raise ShapeError(msg)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            msg = "heat map values must be finite and non-negative"
            raise ContractError(msg)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def pixels(self) -> np.ndarray:
        peak = self.values.max()
        if peak <= 0:
            return np.zeros(self.shape, dtype=np.uint8)
        return np.rint(255 * self.values / peak).astype(np.uint8)


@dataclass(frozen=True)
class RFReport:
    """Receptive field of the centre unit of one layer, in input pixels (height, width)."""

    topology: str
    layer: int
    kernel_size: int
    claimed: int
    standard: int
    perturbation: tuple[int, int]
    gradient: tuple[int, int]

    @property
    def empirical(self) -> tuple[int, int]:
        return self.perturbation

    @property
    def probes_agree(self) -> bool:
        return self.perturbation == self.gradient

    def discrepancies(self) -> list[str]:
        notes = []
        height, width = self.perturbation
        if (height, width) != (self.claimed, self.claimed):
            notes.append(f"claimed {self.claimed}x{self.claimed}, measured {height}x{width}")
        if (height, width) != (self.standard, self.standard):
            notes.append(f"stacking theory gives {self.standard}x{self.standard}, measured {height}x{width}")
        if not self.probes_agree:
            notes.append(f"gradient probe measured {self.gradient[0]}x{self.gradient[1]}")
        return notes

    def lines(self) -> list[str]:
        out = [
            f"topology {self.topology}, layer {self.layer}, kernel {self.kernel_size}x{self.kernel_size}",
            f"  claimed (fixed r, doubling per pooled layer): {self.claimed}x{self.claimed}",
            f"  standard stacking theory: {self.standard}x{self.standard}",
            f"  empirical (perturbation): {self.perturbation[0]}x{self.perturbation[1]}",
            f"  empirical (gradient): {self.gradient[0]}x{self.gradient[1]}",
        ]
        out.extend(f"  discrepancy: {note}" for note in self.discrepancies())
        return out
