from dataclasses import dataclass

import numpy as np

from caan.exceptions import ContractError
from caan.exceptions import ShapeError

SAMPLE_RATE = 44_100
WINDOW = 2048
OVERLAP = 672
HOP = WINDOW - OVERLAP
MEL_BINS = 64
LOG_FLOOR = 1e-10
CLIP_FRAMES = 320


@dataclass(frozen=True, eq=False)
class WaveClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            msg = f"clip must be a non-empty mono signal, got shape {samples.shape}"
            raise ContractError(msg)
        if not np.all(np.isfinite(samples)):
            msg = "clip contains non-finite samples"
            raise ContractError(msg)
        if self.sample_rate <= 0:
            msg = f"sample rate must be positive, got {self.sample_rate}"
            raise ContractError(msg)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    """Triangular mel filters, one row per band over the ``nfft/2 + 1`` DFT bins."""

    weights: np.ndarray
    sample_rate: int
    nfft: int
    centers: np.ndarray

    @property
    def bands(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Log-mel energies, ``F`` bands by ``T`` frames, stored as float32."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] != MEL_BINS or values.shape[1] == 0:  # noqa: PLR2004
            msg = f"spectrogram must be {MEL_BINS}xT, got shape {values.shape}"
            raise ShapeError(msg)
        if not np.all(np.isfinite(values)):
            msg = "spectrogram contains non-finite values"
            raise ContractError(msg)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def frames(self) -> int:
        return self.values.shape[1]
