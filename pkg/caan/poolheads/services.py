"""
Global summarisation of a final ``H×P×Q`` feature map into class scores.

``max``/``avg`` reduce each map to a scalar, ``roi`` keeps the maxima of 16×16
blocks, ``flatten`` keeps everything; all four finish with ``softmax(W·R + b)``.
The attention heads skip the affine map: per-bin class probabilities ``C`` are
weighted by the normalised attention ``A'`` and summed over the map.
"""

import logging

from caan.exceptions import ConfigError
from caan.exceptions import ShapeError
from caan.poolheads.models import AffineHead
from caan.poolheads.models import AttentionHead
from caan.poolheads.models import Head
from caan.poolheads.models import HeadKind
from caan.poolheads.models import HeadOutput
from caan.poolheads.models import PooledVector
from caan.poolheads.models import ROIGrid
from caan.tensor import ops
from caan.tensor.init import glorot_uniform
from caan.tensor.init import layer_rng
from caan.tensor.init import zero_bias
from caan.tensor.models import Tensor

logger = logging.getLogger(__name__)

# affine inputs above this are reported as memory-hostile
FLATTEN_WARNING_SIZE = 1_000_000


def _check_map(m: Tensor) -> None:
    if m.ndim != 3:  # noqa: PLR2004
        msg = f"pooling expects an H×P×Q map, got {m.shape}"
        raise ShapeError(msg)


def global_max(m: Tensor) -> PooledVector:
    _check_map(m)
    return PooledVector(ops.spatial_max(m))


def global_avg(m: Tensor) -> PooledVector:
    _check_map(m)
    return PooledVector(ops.mean(m, axis=(1, 2)))


def roi_pool(m: Tensor) -> Tensor:
    _check_map(m)
    grid = ROIGrid.for_map(m.shape)
    return ops.block_max(m, grid.block)


def attention_pool(m: Tensor, head: AttentionHead) -> tuple[Tensor, Tensor]:
    """Return the class scores ``Y`` (``K``) and the normalised attention ``A'`` (``K×P×Q``)."""
    _check_map(m)
    classes = ops.softmax(ops.conv2d(m, head.cls_weight, head.cls_bias), axis=0)
    attention = ops.sigmoid(ops.conv2d(m, head.att_weight, head.att_bias))
    normalised = attention / ops.sum(attention, axis=(1, 2), keepdims=True)
    scores = ops.sum(normalised * classes, axis=(1, 2))
    return scores, normalised


def classify_from_pooled(pooled: PooledVector | Tensor, affine: AffineHead) -> Tensor:
    values = pooled.values if isinstance(pooled, PooledVector) else ops.flatten(pooled)
    if values.shape[0] != affine.input_size:
        msg = f"affine head expects {affine.input_size} inputs, got {values.shape[0]}"
        raise ShapeError(msg)
    return ops.softmax(ops.affine(values, affine.weight, affine.bias))


def pooled_size(kind: HeadKind, final_shape: tuple[int, int, int]) -> int:
    channels, rows, cols = final_shape
    match kind:
        case HeadKind.MAX | HeadKind.AVG:
            return channels
        case HeadKind.FLATTEN:
            return channels * rows * cols
        case HeadKind.ROI:
            grid = ROIGrid.for_map(final_shape)
            return grid.channels * grid.rows * grid.cols
    msg = f"head '{kind}' has no affine layer"
    raise ConfigError(msg)


def build_head(
    kind: HeadKind | str,
    final_shape: tuple[int, int, int],
    classes: int,
    seed: int,
    prefix: str = "scene.head",
) -> Head:
    """
    Build a head for final maps of ``final_shape``.

    ROI heads need both spatial sizes divisible by 16, which rules them out on the
    pooled topology (4×20 final maps for a 64×320 input).
    """
    try:
        kind = HeadKind(kind)
    except ValueError as exc:
        msg = f"unknown head kind '{kind}', expected one of {[k.value for k in HeadKind]}"
        raise ConfigError(msg) from exc
    if classes < 1:
        msg = f"need at least one class, got {classes}"
        raise ConfigError(msg)
    if kind.uses_roi:
        try:
            ROIGrid.for_map(final_shape)
        except ShapeError as exc:
            msg = f"head '{kind}' cannot be used here: {exc}"
            raise ConfigError(msg) from exc

    if kind.uses_attention:
        channels = final_shape[0]
        shape = (classes, channels, 1, 1)
        attention = AttentionHead(
            cls_weight=glorot_uniform(layer_rng(seed, f"{prefix}.cls.weight"), shape, name=f"{prefix}.cls.weight"),
            cls_bias=zero_bias(classes, name=f"{prefix}.cls.bias"),
            att_weight=glorot_uniform(layer_rng(seed, f"{prefix}.att.weight"), shape, name=f"{prefix}.att.weight"),
            att_bias=zero_bias(classes, name=f"{prefix}.att.bias"),
        )
        return Head(kind, attention=attention)

    size = pooled_size(kind, final_shape)
    if size > FLATTEN_WARNING_SIZE:
        logger.warning(
            f"Head '{kind}' feeds {size} values into a {classes}-way affine layer "
            f"({size * classes} weights); expect heavy memory use",
        )
    affine = AffineHead(
        weight=glorot_uniform(layer_rng(seed, f"{prefix}.fc.weight"), (classes, size), name=f"{prefix}.fc.weight"),
        bias=zero_bias(classes, name=f"{prefix}.fc.bias"),
    )
    return Head(kind, affine=affine)


def apply_head(head: Head, m: Tensor) -> HeadOutput:
    match head.kind:
        case HeadKind.MAX:
            return HeadOutput(classify_from_pooled(global_max(m), head.affine))
        case HeadKind.AVG:
            return HeadOutput(classify_from_pooled(global_avg(m), head.affine))
        case HeadKind.FLATTEN:
            return HeadOutput(classify_from_pooled(m, head.affine))
        case HeadKind.ROI:
            return HeadOutput(classify_from_pooled(roi_pool(m), head.affine))
        case HeadKind.ATT:
            scores, attention = attention_pool(m, head.attention)
            return HeadOutput(scores, attention)
        case HeadKind.ROI_ATT:
            scores, attention = attention_pool(roi_pool(m), head.attention)
            return HeadOutput(scores, attention)
    msg = f"unsupported head kind {head.kind}"
    raise ConfigError(msg)
