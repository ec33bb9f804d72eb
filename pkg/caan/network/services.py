import logging
from typing import Any

import numpy as np

from caan.condition.models import DeviceOneHot
from caan.condition.models import DeviceOneHotMask
from caan.condition.services import build_injector
from caan.condition.services import expand_onehot
from caan.condition.services import inject
from caan.exceptions import ConfigError
from caan.exceptions import ContractError
from caan.exceptions import ShapeError
from caan.network.models import DEVICE_WIDTHS
from caan.network.models import DEVICES
from caan.network.models import INPUT_SHAPE
from caan.network.models import LAYERS
from caan.network.models import SCENE_CLASSES
from caan.network.models import ConvLayer
from caan.network.models import DeviceNet
from caan.network.models import SceneNet
from caan.network.models import SceneOutput
from caan.network.models import Topology
from caan.poolheads.models import AffineHead
from caan.poolheads.models import HeadKind
from caan.poolheads.services import apply_head
from caan.poolheads.services import build_head
from caan.tensor import ops
from caan.tensor.init import glorot_uniform
from caan.tensor.init import layer_rng
from caan.tensor.init import zero_bias
from caan.tensor.models import Tensor

logger = logging.getLogger(__name__)


def _conv_layer(  # noqa: PLR0913
    name: str,
    c_in: int,
    c_out: int,
    kernel_size: int,
    seed: int,
    dilation: int,
    *,
    pool: bool,
) -> ConvLayer:
    return ConvLayer(
        weight=glorot_uniform(
            layer_rng(seed, f"{name}.weight"),
            (c_out, c_in, kernel_size, kernel_size),
            name=f"{name}.weight",
        ),
        bias=zero_bias(c_out, name=f"{name}.bias"),
        dilation=dilation,
        pool=pool,
    )


def build_scene_net(  # noqa: PLR0913
    topology: Topology,
    head_kind: HeadKind | str,
    condition_layer: int | None = None,
    classes: int = SCENE_CLASSES,
    seed: int = 0,
    *,
    devices: int = DEVICES,
    input_shape: tuple[int, int] = INPUT_SHAPE,
) -> SceneNet:
    if condition_layer is not None and not 1 <= condition_layer <= LAYERS:
        msg = f"condition layer must be in 1..{LAYERS}, got {condition_layer}"
        raise ConfigError(msg)
    if topology.pools[0] and any(size % 2**LAYERS for size in input_shape):
        msg = f"input {input_shape[0]}x{input_shape[1]} cannot be halved {LAYERS} times"
        raise ConfigError(msg)

    layers = []
    channels_in = 1
    for index, (width, dilation, pool) in enumerate(
        zip(topology.widths, topology.dilations, topology.pools, strict=True),
        start=1,
    ):
        name = f"scene.conv{index}"
        layers.append(_conv_layer(name, channels_in, width, topology.kernel_size, seed, dilation, pool=pool))
        channels_in = width

    head = build_head(head_kind, topology.final_shape(input_shape), classes, seed)
    injector = None
    if condition_layer is not None:
        injector = build_injector(topology.widths[condition_layer - 1], devices, seed)
    net = SceneNet(
        topology=topology,
        layers=layers,
        head=head,
        classes=classes,
        input_shape=tuple(input_shape),
        condition_layer=condition_layer,
        injector=injector,
    )
    logger.debug(
        f"Built {topology.kind} scene net with {head.kind} head, widths {list(topology.widths)}, "
        f"condition layer {condition_layer}",
    )
    return net


def build_device_net(
    devices: int = DEVICES,
    seed: int = 0,
    *,
    widths: tuple[int, ...] = DEVICE_WIDTHS,
    kernel_size: int = 3,
    input_shape: tuple[int, int] = INPUT_SHAPE,
) -> DeviceNet:
    if len(widths) != 2:  # noqa: PLR2004
        msg = f"device branch needs 2 channel widths, got {list(widths)}"
        raise ConfigError(msg)
    layers = []
    channels_in = 1
    for index, width in enumerate(widths, start=1):
        layers.append(_conv_layer(f"device.conv{index}", channels_in, width, kernel_size, seed, 1, pool=True))
        channels_in = width
    fc = AffineHead(
        weight=glorot_uniform(layer_rng(seed, "device.fc.weight"), (devices, channels_in), name="device.fc.weight"),
        bias=zero_bias(devices, name="device.fc.bias"),
    )
    return DeviceNet(layers=layers, fc=fc, devices=devices, input_shape=tuple(input_shape))


def as_input(spec: Any, input_shape: tuple[int, int]) -> Tensor:
    """Turn a spectrogram (or its ``F×T`` values) into a ``1×F×T`` input map."""
    values = getattr(spec, "values", spec)
    if isinstance(values, Tensor):
        tensor = values if values.ndim == 3 else ops.reshape(values, (1, *values.shape))  # noqa: PLR2004
    else:
        array = np.asarray(values)
        tensor = Tensor(array if array.ndim == 3 else array[None])  # noqa: PLR2004
    if tensor.shape != (1, *input_shape):
        msg = f"network expects a {input_shape[0]}x{input_shape[1]} spectrogram, got {tensor.shape[1:]}"
        raise ShapeError(msg)
    return tensor


def mask_for(net: SceneNet, onehot: DeviceOneHot) -> DeviceOneHotMask:
    """Expand a one-hot to the spatial size of the conditioned layer's convolution output."""
    if net.condition_layer is None:
        msg = "network has no conditioning injector"
        raise ContractError(msg)
    _, rows, cols = net.topology.conv_shapes(net.input_shape)[net.condition_layer - 1]
    return expand_onehot(onehot, rows, cols)


def forward_scene(net: SceneNet, spec: Any, mask: DeviceOneHotMask | None = None) -> SceneOutput:
    if (mask is None) != (net.injector is None):
        msg = (
            "conditioned network needs a device mask"
            if mask is None
            else "network has no conditioning injector, refusing a device mask"
        )
        raise ContractError(msg)
    x = as_input(spec, net.input_shape)
    shapes: list[tuple[int, ...]] = []
    for index, layer in enumerate(net.layers, start=1):
        if index == net.condition_layer:
            x = inject(x, mask, layer.weight, layer.bias, net.injector, dilation=layer.dilation)
        else:
            x = ops.relu(ops.conv2d(x, layer.weight, layer.bias, dilation=layer.dilation))
        if layer.pool:
            x = ops.local_max_pool2d(x)
        shapes.append(x.shape)
    out = apply_head(net.head, x)
    return SceneOutput(scores=out.scores, attention=out.attention, feature_shapes=shapes)


def device_features(net: DeviceNet, spec: Any) -> list[Tensor]:
    x = as_input(spec, net.input_shape)
    maps = []
    for layer in net.layers:
        x = ops.local_max_pool2d(ops.relu(ops.conv2d(x, layer.weight, layer.bias, dilation=layer.dilation)))
        maps.append(x)
    return maps


def forward_device(net: DeviceNet, spec: Any) -> Tensor:
    """Device logits; the softmax is applied by the loss."""
    final = device_features(net, spec)[-1]
    return ops.affine(ops.spatial_max(final), net.fc.weight, net.fc.bias)
