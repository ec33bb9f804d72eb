import logging

import numpy as np

from caan.condition.models import DeviceOneHot
from caan.condition.models import DeviceOneHotMask
from caan.condition.models import InjectionWeights
from caan.exceptions import ContractError
from caan.exceptions import ShapeError
from caan.tensor import ops
from caan.tensor.init import glorot_uniform
from caan.tensor.init import layer_rng
from caan.tensor.init import zero_bias
from caan.tensor.models import Tensor

logger = logging.getLogger(__name__)


def expand_onehot(onehot: DeviceOneHot, width: int, length: int) -> DeviceOneHotMask:
    if width <= 0 or length <= 0:
        msg = f"mask size must be positive, got {width}x{length}"
        raise ContractError(msg)
    values = np.broadcast_to(np.asarray(onehot.values)[:, None, None], (len(onehot), width, length))
    return DeviceOneHotMask(Tensor(values))


def inject(
    features: Tensor,
    mask: DeviceOneHotMask,
    kernel: Tensor,
    bias: Tensor | None,
    injector: InjectionWeights,
    *,
    dilation: int = 1,
) -> Tensor:
    """``relu(W * M + V * E)``: the device term is added before the activation."""
    convolved = ops.conv2d(features, kernel, bias, dilation=dilation)
    if mask.spatial_shape != convolved.shape[1:]:
        msg = f"mask of size {mask.spatial_shape} does not match feature maps {convolved.shape[1:]}"
        raise ShapeError(msg)
    if mask.devices != injector.devices or injector.channels != convolved.shape[0]:
        msg = (
            f"injector {injector.weight.shape} incompatible with {mask.devices} devices "
            f"and {convolved.shape[0]} channels"
        )
        raise ShapeError(msg)
    return ops.relu(convolved + ops.conv2d(mask.tensor, injector.weight, injector.bias))


def predicted_onehot(device_logits: Tensor | np.ndarray) -> DeviceOneHot:
    """Hard decision on the device; nothing differentiable survives the conversion."""
    logits = device_logits.data if isinstance(device_logits, Tensor) else np.asarray(device_logits)
    if logits.ndim != 1 or not np.all(np.isfinite(logits)):
        msg = f"device logits must be a finite vector, got {logits}"
        raise ContractError(msg)
    # np.argmax returns the first maximum, so ties go to the lowest index
    return DeviceOneHot.for_device(int(np.argmax(logits)), logits.shape[0])


def build_injector(channels: int, devices: int, seed: int, prefix: str = "scene.inject") -> InjectionWeights:
    return InjectionWeights(
        weight=glorot_uniform(layer_rng(seed, f"{prefix}.weight"), (channels, devices, 1, 1), name=f"{prefix}.weight"),
        bias=zero_bias(channels, name=f"{prefix}.bias"),
    )
