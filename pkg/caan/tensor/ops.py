"""
Numerical primitives with local gradient rules.

Every function takes and returns :class:`~caan.tensor.models.Tensor` objects. Feature
maps are rank-3 ``C×P×Q`` arrays; convolutions are cross-correlations with stride 1.
"""

from __future__ import annotations

import logging
from enum import StrEnum
from typing import Any

import numpy as np
from scipy import special

from caan.exceptions import ContractError
from caan.exceptions import ShapeError
from caan.tensor.models import Tape
from caan.tensor.models import Tensor
from caan.tensor.models import default_dtype

logger = logging.getLogger(__name__)

Axis = int | tuple[int, ...] | None


class Padding(StrEnum):
    SAME = "same"
    VALID = "valid"


class ActivationKind(StrEnum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _lift_pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(a, dtype=b.dtype), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normalise_axes(axis: Axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else axis
    return tuple(sorted(a % ndim for a in axes))


# -- elementwise arithmetic ----------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = _lift_pair(a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), rule, "add")


def sub(a: Any, b: Any) -> Tensor:
    a, b = _lift_pair(a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), rule, "sub")


def mul(a: Any, b: Any) -> Tensor:
    a, b = _lift_pair(a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), rule, "mul")


def div(a: Any, b: Any) -> Tensor:
    a, b = _lift_pair(a, b)
    out = a.data / b.data

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return Tensor.from_op(out, (a, b), rule, "div")


def neg(x: Tensor) -> Tensor:
    return Tensor.from_op(-x.data, (x,), lambda g: (-g,), "neg")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    return Tensor.from_op(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """``max(x, floor)``; no gradient flows where the floor is active."""
    active = x.data >= floor
    out = np.where(active, x.data, np.asarray(floor, dtype=x.dtype))
    return Tensor.from_op(out, (x,), lambda g: (g * active,), "clamp_min")


# -- reductions and shape ------------------------------------------------------------


def sum(x: Tensor, axis: Axis = None, *, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalise_axes(axis, x.ndim)
    out = np.sum(x.data, axis=axes, keepdims=keepdims)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(np.asarray(out, dtype=x.dtype), (x,), rule, "sum")


def mean(x: Tensor, axis: Axis = None, *, keepdims: bool = False) -> Tensor:
    axes = _normalise_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    return div(sum(x, axis=axes, keepdims=keepdims), float(count))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.data.reshape(shape)
    return Tensor.from_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.size,))


def take(x: Tensor, index: int) -> Tensor:
    """Select one element of a vector as a scalar tensor."""
    if x.ndim != 1:
        msg = f"take expects a vector, got shape {x.shape}"
        raise ShapeError(msg)
    if not 0 <= index < x.shape[0]:
        msg = f"index {index} out of range for length {x.shape[0]}"
        raise ContractError(msg)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(x.data)
        grad[index] = g
        return (grad,)

    return Tensor.from_op(np.asarray(x.data[index]), (x,), rule, "take")


def stack_scalars(values: list[Tensor]) -> Tensor:
    """Stack scalar tensors into a vector."""
    out = np.array([v.data for v in values], dtype=values[0].dtype)

    def rule(g: np.ndarray) -> list[np.ndarray]:
        return [np.asarray(g[i]) for i in range(len(values))]

    return Tensor.from_op(out, values, rule, "stack")


# -- activations ---------------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    # subgradient at 0 is 0
    positive = x.data > 0
    out = np.where(positive, x.data, np.zeros((), dtype=x.dtype))
    return Tensor.from_op(out, (x,), lambda g: (g * positive,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    out = special.expit(x.data)
    # keep values strictly inside (0, 1) even where expit saturates
    upper = np.nextafter(np.ones((), dtype=x.dtype), np.zeros((), dtype=x.dtype))
    out = np.clip(out, np.finfo(x.dtype).tiny, upper).astype(x.dtype)
    return Tensor.from_op(out, (x,), lambda g: (g * out * (1 - out),), "sigmoid")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        msg = f"softmax axis {axis} invalid for rank {x.ndim}"
        raise ContractError(msg)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), rule, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), rule, "log_softmax")


def activation(x: Tensor, kind: ActivationKind | str, axis: int = 0) -> Tensor:
    match ActivationKind(kind):
        case ActivationKind.RELU:
            return relu(x)
        case ActivationKind.SIGMOID:
            return sigmoid(x)
        case ActivationKind.SOFTMAX:
            return softmax(x, axis=axis)


# -- affine and convolution ----------------------------------------------------------


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``weight @ x + bias`` for a vector ``x``."""
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:  # noqa: PLR2004
        msg = f"affine input of shape {x.shape} does not match weight {weight.shape}"
        raise ShapeError(msg)
    out = weight.data @ x.data + bias.data

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return weight.data.T @ g, np.outer(g, x.data), g

    return Tensor.from_op(out, (x, weight, bias), rule, "affine")


def same_padding(kernel_size: int, dilation: int) -> int:
    return dilation * (kernel_size - 1) // 2


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    *,
    dilation: int = 1,
    padding: Padding | str = Padding.SAME,
) -> Tensor:
    """
    Dilated 2-D cross-correlation of a ``C_in×P×Q`` map with a
    ``C_out×C_in×k_h×k_w`` kernel, stride 1, zero padding.

    ``same`` padding pads ``dilation·(k−1)/2`` per side and keeps ``P×Q``;
    ``valid`` shrinks each side by ``dilation·(k−1)``.
    """
    if x.ndim != 3 or kernel.ndim != 4:  # noqa: PLR2004
        msg = f"conv2d expects a rank-3 input and rank-4 kernel, got {x.shape} and {kernel.shape}"
        raise ShapeError(msg)
    c_out, c_in, k_h, k_w = kernel.shape
    if x.shape[0] != c_in:
        msg = f"input has {x.shape[0]} channels but kernel expects {c_in}"
        raise ShapeError(msg)
    if dilation < 1:
        msg = f"dilation must be >= 1, got {dilation}"
        raise ContractError(msg)
    padding = Padding(padding)
    if padding is Padding.SAME:
        if k_h % 2 == 0 or k_w % 2 == 0:
            msg = f"same padding needs odd kernel sizes, got {k_h}x{k_w}"
            raise ContractError(msg)
        pad_h, pad_w = same_padding(k_h, dilation), same_padding(k_w, dilation)
    else:
        pad_h = pad_w = 0
    padded = np.pad(x.data, ((0, 0), (pad_h, pad_h), (pad_w, pad_w)))
    out_h = padded.shape[1] - dilation * (k_h - 1)
    out_w = padded.shape[2] - dilation * (k_w - 1)
    if out_h <= 0 or out_w <= 0:
        msg = f"valid convolution of {x.shape[1:]} with dilated kernel {k_h}x{k_w}/{dilation} is empty"
        raise ShapeError(msg)

    w = kernel.data
    out = np.zeros((c_out, out_h, out_w), dtype=x.dtype)
    for i in range(k_h):
        for j in range(k_w):
            patch = padded[:, i * dilation : i * dilation + out_h, j * dilation : j * dilation + out_w]
            out += np.tensordot(w[:, :, i, j], patch, axes=(1, 0))
    if bias is not None:
        out += bias.data[:, None, None]

    def rule(g: np.ndarray) -> tuple[np.ndarray, ...]:
        grad_padded = np.zeros_like(padded)
        grad_kernel = np.zeros_like(w)
        for i in range(k_h):
            for j in range(k_w):
                rows = slice(i * dilation, i * dilation + out_h)
                cols = slice(j * dilation, j * dilation + out_w)
                grad_kernel[:, :, i, j] = np.tensordot(g, padded[:, rows, cols], axes=([1, 2], [1, 2]))
                grad_padded[:, rows, cols] += np.tensordot(w[:, :, i, j].T, g, axes=(1, 0))
        grad_x = grad_padded[:, pad_h : pad_h + x.shape[1], pad_w : pad_w + x.shape[2]]
        if bias is None:
            return grad_x, grad_kernel
        return grad_x, grad_kernel, g.sum(axis=(1, 2))

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(out, inputs, rule, "conv2d")


def upsample_kernel(kernel: np.ndarray, dilation: int) -> np.ndarray:
    """Insert ``dilation − 1`` zero holes between kernel taps."""
    c_out, c_in, k_h, k_w = kernel.shape
    holes = np.zeros(
        (c_out, c_in, (k_h - 1) * dilation + 1, (k_w - 1) * dilation + 1),
        dtype=kernel.dtype,
    )
    holes[:, :, ::dilation, ::dilation] = kernel
    return holes


# -- max pooling ---------------------------------------------------------------------


def block_max(x: Tensor, size: int) -> Tensor:
    """Max over non-overlapping ``size×size`` blocks of a rank-3 map."""
    if x.ndim != 3:  # noqa: PLR2004
        msg = f"block_max expects a rank-3 map, got {x.shape}"
        raise ShapeError(msg)
    channels, rows, cols = x.shape
    if rows % size or cols % size:
        msg = f"spatial size {rows}x{cols} is not divisible by {size}"
        raise ShapeError(msg)
    out_rows, out_cols = rows // size, cols // size
    blocks = (
        x.data.reshape(channels, out_rows, size, out_cols, size)
        .transpose(0, 1, 3, 2, 4)
        .reshape(channels, out_rows, out_cols, size * size)
    )
    # ties go to the first maximum
    winners = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, winners, axis=-1)[..., 0]

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(blocks)
        np.put_along_axis(grad, winners, g[..., None], axis=-1)
        grad = grad.reshape(channels, out_rows, out_cols, size, size).transpose(0, 1, 3, 2, 4)
        return (grad.reshape(channels, rows, cols),)

    return Tensor.from_op(out, (x,), rule, "block_max")


def local_max_pool2d(x: Tensor) -> Tensor:
    """2×2 max pooling with stride 2; spatial dimensions must be even."""
    if x.ndim == 3 and (x.shape[1] % 2 or x.shape[2] % 2):  # noqa: PLR2004
        msg = f"local max pooling needs even spatial dimensions, got {x.shape[1]}x{x.shape[2]}"
        raise ShapeError(msg)
    return block_max(x, 2)


def spatial_max(x: Tensor) -> Tensor:
    """Max over all ``(p, q)`` of each channel of a rank-3 map."""
    if x.ndim != 3:  # noqa: PLR2004
        msg = f"spatial_max expects a rank-3 map, got {x.shape}"
        raise ShapeError(msg)
    flat = x.data.reshape(x.shape[0], -1)
    winners = flat.argmax(axis=1)
    out = flat[np.arange(x.shape[0]), winners]

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(flat)
        grad[np.arange(x.shape[0]), winners] = g
        return (grad.reshape(x.shape),)

    return Tensor.from_op(out, (x,), rule, "spatial_max")


# -- differentiation -----------------------------------------------------------------


def backward(loss: Tensor) -> Tape:
    """
    Populate ``grad`` on every leaf tensor with ``requires_grad`` reachable from ``loss``.

    Gradients accumulate into existing ``grad`` arrays; clear them between steps.
    """
    if loss.shape != ():
        msg = f"backward needs a scalar loss, got shape {loss.shape}"
        raise ContractError(msg)
    if not loss.requires_grad:
        msg = "loss does not depend on any tensor that requires a gradient"
        raise ContractError(msg)
    tape = Tape.from_output(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for record in reversed(tape.records):
        grad = pending.pop(id(record.output), None)
        if grad is None:
            continue
        for tensor, local in zip(record.inputs, record.rule(grad), strict=True):
            if local is None or not tensor.requires_grad:
                continue
            local = np.asarray(local, dtype=tensor.dtype)
            if tensor.is_leaf:
                tensor.grad = local.copy() if tensor.grad is None else tensor.grad + local
            elif id(tensor) in pending:
                pending[id(tensor)] = pending[id(tensor)] + local
            else:
                pending[id(tensor)] = local
    return tape


def zeros(shape: tuple[int, ...], *, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()), requires_grad=requires_grad, name=name)
