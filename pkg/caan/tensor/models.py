"""
Dense tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Operations in :mod:`caan.tensor.ops` build
new tensors that remember their inputs and a local gradient rule whenever one of
the inputs requires a gradient; :class:`Tape` orders those records so
:func:`caan.tensor.ops.backward` can replay them.
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from dataclasses import field
from typing import Any

import numpy as np

from caan.exceptions import ShapeError

GradRule = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_DEFAULT_DTYPE: contextvars.ContextVar[np.dtype] = contextvars.ContextVar(
    "caan_default_dtype",
    default=np.dtype(np.float32),
)
_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "caan_grad_enabled",
    default=True,
)


def default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE.get()


@contextmanager
def precision(dtype: Any) -> Iterator[np.dtype]:
    """
    Switch the element type of newly created tensors.

    Training runs in float32; gradient checks wrap model construction and the
    forward passes in ``precision(np.float64)``.
    """
    token = _DEFAULT_DTYPE.set(np.dtype(dtype))
    try:
        yield _DEFAULT_DTYPE.get()
    finally:
        _DEFAULT_DTYPE.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Build no tape records inside the block (evaluation, hard decisions)."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


class Tensor:
    """Dense row-major array of reals, optionally taking part in differentiation."""

    __slots__ = ("_inputs", "_rule", "data", "grad", "name", "op", "requires_grad")

    def __init__(
        self,
        data: Any,
        *,
        requires_grad: bool = False,
        name: str | None = None,
        dtype: Any = None,
    ) -> None:
        array = np.array(data, dtype=dtype if dtype is not None else default_dtype())
        if any(dim <= 0 for dim in array.shape):
            msg = f"Tensor dimensions must be positive, got {array.shape}"
            raise ShapeError(msg)
        self.data: np.ndarray = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = "leaf"
        self._inputs: tuple[Tensor, ...] = ()
        self._rule: GradRule | None = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        inputs: Sequence[Tensor],
        rule: GradRule,
        op: str,
    ) -> Tensor:
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.op = op
        out.requires_grad = grad_enabled() and any(t.requires_grad for t in inputs)
        out._inputs = tuple(inputs) if out.requires_grad else ()
        out._rule = rule if out.requires_grad else None
        return out

    # -- introspection -------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._rule is None

    @property
    def inputs(self) -> tuple[Tensor, ...]:
        return self._inputs

    @property
    def rule(self) -> GradRule | None:
        return self._rule

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        from caan.tensor.ops import backward  # noqa: PLC0415

        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op!r}{label})"

    # -- arithmetic ----------------------------------------------------------------

    def __add__(self, other: Any) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.div(self, other)

    def __neg__(self) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.neg(self)

    def sum(self, axis: int | tuple[int, ...] | None = None, *, keepdims: bool = False) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, *, keepdims: bool = False) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        from caan.tensor import ops  # noqa: PLC0415

        return ops.reshape(self, shape)


@dataclass(frozen=True)
class TapeRecord:
    output: Tensor
    inputs: tuple[Tensor, ...]
    rule: GradRule
    op: str


@dataclass
class Tape:
    """Recorded operations in topological order (inputs always precede their users)."""

    records: list[TapeRecord] = field(default_factory=list)

    @classmethod
    def from_output(cls, root: Tensor) -> Tape:
        records: list[TapeRecord] = []
        visited: set[int] = set()
        # iterative post-order walk; deep graphs would overflow the recursion limit
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                records.append(TapeRecord(node, node.inputs, node.rule, node.op))  # type: ignore[arg-type]
                continue
            if id(node) in visited or node.is_leaf:
                continue
            visited.add(id(node))
            stack.append((node, True))
            stack.extend((parent, False) for parent in reversed(node.inputs) if not parent.is_leaf)
        return cls(records)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class AdamState:
    """First and second moment estimates for every named parameter."""

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0

    @classmethod
    def for_parameters(
        cls,
        params: Mapping[str, Tensor],
        *,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> AdamState:
        return cls(
            first_moment={name: np.zeros_like(p.data) for name, p in params.items()},
            second_moment={name: np.zeros_like(p.data) for name, p in params.items()},
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )
