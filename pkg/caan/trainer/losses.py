from collections.abc import Sequence
from typing import TypeVar

from caan.exceptions import ContractError
from caan.tensor import ops
from caan.tensor.models import Tensor

PROBABILITY_FLOOR = 1e-7

Loss = TypeVar("Loss", float, Tensor)


def multitask_loss(loss_s: Loss, loss_d: Loss, lam: float) -> Loss:
    """``loss_s + λ·loss_d``."""
    return loss_s + lam * loss_d


def _as_batch(outputs: Tensor | Sequence[Tensor], targets: int | Sequence[int]) -> tuple[list[Tensor], list[int]]:
    if isinstance(outputs, Tensor):
        outputs, targets = [outputs], [targets]
    outputs, targets = list(outputs), list(targets)
    if not outputs or len(outputs) != len(targets):
        msg = f"need matching non-empty outputs and targets, got {len(outputs)} and {len(targets)}"
        raise ContractError(msg)
    return outputs, targets


def _check_target(target: int, classes: int) -> None:
    if not 0 <= target < classes:
        msg = f"class {target} out of range for {classes} classes"
        raise ContractError(msg)


def scene_loss(scores: Tensor | Sequence[Tensor], true_class: int | Sequence[int]) -> Tensor:
    """
    Mean negative log-probability of the true scenes.

    Scores are renormalised over classes (attention heads do not produce an exact
    simplex) and clamped at 1e-7 before the log.
    """
    batch, targets = _as_batch(scores, true_class)
    terms = []
    for y, target in zip(batch, targets, strict=True):
        _check_target(target, y.shape[0])
        probabilities = ops.clamp_min(y / ops.sum(y), PROBABILITY_FLOOR)
        terms.append(-ops.log(ops.take(probabilities, target)))
    return ops.mean(ops.stack_scalars(terms))


def device_loss(logits: Tensor | Sequence[Tensor], true_device: int | Sequence[int]) -> Tensor:
    """Mean softmax cross-entropy of the device logits."""
    batch, targets = _as_batch(logits, true_device)
    terms = []
    for z, target in zip(batch, targets, strict=True):
        _check_target(target, z.shape[0])
        terms.append(-ops.take(ops.log_softmax(z), target))
    return ops.mean(ops.stack_scalars(terms))
