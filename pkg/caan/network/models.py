from dataclasses import dataclass
from dataclasses import field
from enum import StrEnum

from caan.condition.models import InjectionWeights
from caan.exceptions import ConfigError
from caan.poolheads.models import AffineHead
from caan.poolheads.models import Head
from caan.tensor.models import Tensor

LAYERS = 4
DEFAULT_WIDTHS = (64, 128, 256, 512)
DEVICE_WIDTHS = (64, 128)
DEFAULT_KERNEL_SIZE = 3
ATROUS_DILATIONS = (1, 2, 4, 8)
INPUT_SHAPE = (64, 320)
SCENE_CLASSES = 10
DEVICES = 3


class TopologyKind(StrEnum):
    WITH_POOL = "with_pool"
    NO_POOL = "no_pool"
    ATROUS = "atrous"


@dataclass(frozen=True)
class Topology:
    """
    Four-layer scene branch layout.

    The layer count and the atrous dilation schedule are fixed; channel widths and
    kernel size are configurable.
    """

    kind: TopologyKind
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    kernel_size: int = DEFAULT_KERNEL_SIZE

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", TopologyKind(self.kind))
        except ValueError as exc:
            msg = f"unknown topology '{self.kind}', expected one of {[k.value for k in TopologyKind]}"
            raise ConfigError(msg) from exc
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) != LAYERS or any(w <= 0 for w in self.widths):
            msg = f"scene branch needs {LAYERS} positive channel widths, got {list(self.widths)}"
            raise ConfigError(msg)
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            msg = f"kernel size must be a positive odd number, got {self.kernel_size}"
            raise ConfigError(msg)

    @property
    def dilations(self) -> tuple[int, ...]:
        return ATROUS_DILATIONS if self.kind is TopologyKind.ATROUS else (1,) * LAYERS

    @property
    def pools(self) -> tuple[bool, ...]:
        return (self.kind is TopologyKind.WITH_POOL,) * LAYERS

    def conv_shapes(self, input_shape: tuple[int, int] = INPUT_SHAPE) -> list[tuple[int, int, int]]:
        """Shape at each convolution output, before that layer's local pooling."""
        rows, cols = input_shape
        shapes = []
        for width, pool in zip(self.widths, self.pools, strict=True):
            shapes.append((width, rows, cols))
            if pool:
                rows, cols = rows // 2, cols // 2
        return shapes

    def feature_shapes(self, input_shape: tuple[int, int] = INPUT_SHAPE) -> list[tuple[int, int, int]]:
        """Shape of each layer's output feature map, after pooling."""
        return [
            (width, rows // 2, cols // 2) if pool else (width, rows, cols)
            for (width, rows, cols), pool in zip(self.conv_shapes(input_shape), self.pools, strict=True)
        ]

    def final_shape(self, input_shape: tuple[int, int] = INPUT_SHAPE) -> tuple[int, int, int]:
        return self.feature_shapes(input_shape)[-1]


@dataclass
class ConvLayer:
    weight: Tensor
    bias: Tensor
    dilation: int = 1
    pool: bool = False


@dataclass
class SceneNet:
    topology: Topology
    layers: list[ConvLayer]
    head: Head
    classes: int
    input_shape: tuple[int, int] = INPUT_SHAPE
    condition_layer: int | None = None
    injector: InjectionWeights | None = None

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for index, layer in enumerate(self.layers, start=1):
            params[f"scene.conv{index}.weight"] = layer.weight
            params[f"scene.conv{index}.bias"] = layer.bias
        if self.injector is not None:
            params["scene.inject.weight"] = self.injector.weight
            params["scene.inject.bias"] = self.injector.bias
        params.update({f"scene.head.{name}": tensor for name, tensor in self.head.parameters().items()})
        return params

    @property
    def conditioned(self) -> bool:
        return self.injector is not None

    @property
    def dilations(self) -> list[int]:
        return [layer.dilation for layer in self.layers]


@dataclass
class DeviceNet:
    """CNN-d: two pooled conv layers, global max pooling and an affine map to device logits."""

    layers: list[ConvLayer]
    fc: AffineHead
    devices: int
    input_shape: tuple[int, int] = INPUT_SHAPE

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for index, layer in enumerate(self.layers, start=1):
            params[f"device.conv{index}.weight"] = layer.weight
            params[f"device.conv{index}.bias"] = layer.bias
        params["device.fc.weight"] = self.fc.weight
        params["device.fc.bias"] = self.fc.bias
        return params


@dataclass
class SceneOutput:
    scores: Tensor
    attention: Tensor | None = None
    feature_shapes: list[tuple[int, ...]] = field(default_factory=list)


def parameter_count(params: dict[str, Tensor]) -> int:
    return sum(tensor.size for tensor in params.values())
