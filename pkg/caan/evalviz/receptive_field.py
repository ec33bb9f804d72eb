"""
Empirical receptive fields of the scene-branch topologies.

The probe network has one channel per layer, every kernel tap 0.01 and zero biases,
so with an all-ones input no ReLU ever masks influence. The field of a layer is the
bounding box of input pixels that move the centre unit of that layer's convolution
output (taken before its pooling). It is measured twice: by perturbing every input
pixel, and by back-propagating from the centre unit.
"""

import logging

import numpy as np

from caan.evalviz.models import RFReport
from caan.exceptions import ConfigError
from caan.network.models import LAYERS
from caan.network.models import Topology
from caan.network.models import TopologyKind
from caan.tensor import ops
from caan.tensor.models import Tensor
from caan.tensor.models import precision

logger = logging.getLogger(__name__)

PROBE_WEIGHT = 0.01
PROBE_SIZE = 64
PERTURBATION = 1.0
CHUNK = 256


def claimed_size(kind: TopologyKind | str, layer: int, kernel_size: int = 3) -> int:
    """Size stated for the designs: fixed ``r`` without pooling, doubling per pooled layer."""
    kind = TopologyKind(kind)
    if kind is TopologyKind.WITH_POOL:
        return 2 ** (layer - 1) * kernel_size
    if kind is TopologyKind.ATROUS and layer > 1:
        return 2 ** (layer - 1) * kernel_size - 1
    return kernel_size


def standard_size(kind: TopologyKind | str, layer: int, kernel_size: int = 3) -> int:
    """Stacking theory: each layer adds ``(k-1)·d`` times the current input stride."""
    topology = Topology(kind, (1,) * LAYERS, kernel_size)
    size, jump = 1, 1
    for index, (dilation, pool) in enumerate(zip(topology.dilations, topology.pools, strict=True), start=1):
        size += (kernel_size - 1) * dilation * jump
        if index == layer:
            break
        if pool:
            size += jump
            jump *= 2
    return size


def _conv_batch(x: np.ndarray, kernel_size: int, dilation: int) -> np.ndarray:
    pad = ops.same_padding(kernel_size, dilation)
    rows, cols = x.shape[1:]
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out = np.zeros_like(x)
    for i in range(kernel_size):
        for j in range(kernel_size):
            out += PROBE_WEIGHT * padded[:, i * dilation : i * dilation + rows, j * dilation : j * dilation + cols]
    return out


def _forward_batch(x: np.ndarray, topology: Topology, layer: int) -> np.ndarray:
    for index, (dilation, pool) in enumerate(zip(topology.dilations, topology.pools, strict=True), start=1):
        x = _conv_batch(x, topology.kernel_size, dilation)
        if index == layer:
            return x
        x = np.maximum(x, 0)
        if pool:
            batch, rows, cols = x.shape
            x = x.reshape(batch, rows // 2, 2, cols // 2, 2).max(axis=(2, 4))
    return x


def _centre(topology: Topology, layer: int, size: int) -> tuple[int, int]:
    _, rows, cols = topology.conv_shapes((size, size))[layer - 1]
    return rows // 2, cols // 2


def _bounding_box(mask: np.ndarray) -> tuple[int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return 0, 0
    return int(rows[-1] - rows[0] + 1), int(cols[-1] - cols[0] + 1)


def perturbation_probe(topology: Topology, layer: int, size: int = PROBE_SIZE) -> tuple[int, int]:
    r, c = _centre(topology, layer, size)
    base = _forward_batch(np.ones((1, size, size)), topology, layer)[0, r, c]
    influence = np.zeros(size * size, dtype=bool)
    for start in range(0, size * size, CHUNK):
        pixels = np.arange(start, min(start + CHUNK, size * size))
        batch = np.ones((pixels.size, size, size))
        batch[np.arange(pixels.size), pixels // size, pixels % size] += PERTURBATION
        influence[pixels] = _forward_batch(batch, topology, layer)[:, r, c] != base
    return _bounding_box(influence.reshape(size, size))


def gradient_probe(topology: Topology, layer: int, size: int = PROBE_SIZE) -> tuple[int, int]:
    r, c = _centre(topology, layer, size)
    shape = (1, 1, topology.kernel_size, topology.kernel_size)
    with precision(np.float64):
        x = Tensor(np.ones((1, size, size)), requires_grad=True)
        h = x
        for index, (dilation, pool) in enumerate(zip(topology.dilations, topology.pools, strict=True), start=1):
            h = ops.conv2d(h, Tensor(np.full(shape, PROBE_WEIGHT)), dilation=dilation)
            if index == layer:
                break
            h = ops.relu(h)
            if pool:
                h = ops.local_max_pool2d(h)
        ops.backward(ops.take(ops.flatten(h), r * h.shape[2] + c))
    return _bounding_box(x.grad[0] != 0)


def probe_receptive_field(
    kind: TopologyKind | str,
    kernel_size: int = 3,
    layer: int = LAYERS,
    size: int = PROBE_SIZE,
) -> RFReport:
    if not 1 <= layer <= LAYERS:
        msg = f"layer must be in 1..{LAYERS}, got {layer}"
        raise ConfigError(msg)
    topology = Topology(kind, (1,) * LAYERS, kernel_size)
    if topology.pools[0] and size % 2**LAYERS:
        msg = f"probe size {size} cannot be halved {LAYERS} times"
        raise ConfigError(msg)
    report = RFReport(
        topology=str(topology.kind),
        layer=layer,
        kernel_size=kernel_size,
        claimed=claimed_size(topology.kind, layer, kernel_size),
        standard=standard_size(topology.kind, layer, kernel_size),
        perturbation=perturbation_probe(topology, layer, size),
        gradient=gradient_probe(topology, layer, size),
    )
    for note in report.discrepancies():
        logger.info(f"{topology.kind} layer {layer}: {note}")
    return report
