import zlib

import numpy as np

from caan.tensor.models import Tensor
from caan.tensor.models import default_dtype


def layer_rng(seed: int, name: str) -> np.random.Generator:
    """Generator owned by one named layer, independent of how many other layers exist."""
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], *, name: str | None = None) -> Tensor:
    """Uniform in ±sqrt(6 / (fan_in + fan_out)); conv kernels count their spatial taps."""
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1  # noqa: PLR2004
    fan_out, fan_in = shape[0] * receptive, shape[1] * receptive
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    values = rng.uniform(-limit, limit, size=shape).astype(default_dtype())
    return Tensor(values, requires_grad=True, name=name)


def zero_bias(size: int, *, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(size), requires_grad=True, name=name)
