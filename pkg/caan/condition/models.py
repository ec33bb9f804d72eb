from dataclasses import dataclass

import numpy as np

from caan.exceptions import ContractError
from caan.exceptions import ShapeError
from caan.tensor.models import Tensor


@dataclass(frozen=True, eq=False)
class DeviceOneHot:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 1 or values.size == 0:
            msg = f"one-hot must be a non-empty vector, got shape {values.shape}"
            raise ContractError(msg)
        if not np.all((values == 0) | (values == 1)) or values.sum() != 1:
            msg = f"malformed one-hot {values.tolist()}"
            raise ContractError(msg)

    @classmethod
    def for_device(cls, device: int, devices: int) -> "DeviceOneHot":
        if not 0 <= device < devices:
            msg = f"device {device} out of range for {devices} devices"
            raise ContractError(msg)
        values = np.zeros(devices)
        values[device] = 1.0
        return cls(values)

    @property
    def device(self) -> int:
        return int(np.argmax(self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class DeviceOneHotMask:
    """``N×U_w×U_l`` planes, all ones for the active device and zeros elsewhere."""

    tensor: Tensor

    @property
    def devices(self) -> int:
        return self.tensor.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.tensor.shape[1], self.tensor.shape[2]


@dataclass
class InjectionWeights:
    """1×1 transformation of the device mask into the conditioned layer's channels."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self) -> None:
        if self.weight.ndim != 4 or self.weight.shape[2:] != (1, 1):  # noqa: PLR2004
            msg = f"injector kernel must be C×N×1×1, got {self.weight.shape}"
            raise ShapeError(msg)
        if self.bias.shape != (self.weight.shape[0],):
            msg = f"injector bias {self.bias.shape} does not match {self.weight.shape[0]} channels"
            raise ShapeError(msg)

    @property
    def channels(self) -> int:
        return self.weight.shape[0]

    @property
    def devices(self) -> int:
        return self.weight.shape[1]
