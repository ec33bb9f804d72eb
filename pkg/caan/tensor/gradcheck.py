"""
Central finite-difference gradient checks.

Checks run in float64; wrap model construction in ``precision(np.float64)`` so the
parameters are 64-bit as well.
"""

import logging
from collections.abc import Callable
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from caan.tensor.models import Tensor
from caan.tensor.models import no_grad
from caan.tensor.ops import backward

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-4
# Denominator floor for the relative error of near-zero gradients.
RELATIVE_FLOOR = 1e-3
# One-sided slopes disagreeing by more than this (relative) mark a ReLU/max kink.
KINK_TOLERANCE = 1e-2


@dataclass
class GradCheckResult:
    max_relative_error: float = 0.0
    checked: int = 0
    skipped_kinks: int = 0
    worst: tuple[str, int] | None = None
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_relative_error < DEFAULT_TOLERANCE


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor] | Sequence[Tensor],
    *,
    step: float = DEFAULT_STEP,
    max_coordinates: int | None = 16,
    seed: int = 0,
) -> GradCheckResult:
    """
    Compare backpropagated gradients of ``loss_fn()`` with central differences.

    ``max_coordinates`` samples that many entries per parameter (all entries when
    ``None``). Coordinates where the forward and backward one-sided differences
    disagree sit on a kink of ReLU or max and are counted in ``skipped_kinks``.
    """
    named = params if isinstance(params, dict) else {f"p{i}": p for i, p in enumerate(params)}
    for param in named.values():
        param.requires_grad = True
        param.zero_grad()
    backward(loss_fn())
    analytic = {name: p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for name, p in named.items()}

    rng = np.random.default_rng(seed)
    result = GradCheckResult()
    for name, param in named.items():
        flat = param.data.reshape(-1)
        count = flat.size
        indices = np.arange(count)
        if max_coordinates is not None and count > max_coordinates:
            indices = rng.choice(count, size=max_coordinates, replace=False)
        worst_here = 0.0
        for index in indices:
            original = flat[index]
            with no_grad():
                flat[index] = original + step
                plus = loss_fn().item()
                flat[index] = original - step
                minus = loss_fn().item()
                flat[index] = original
                centre = loss_fn().item()
            forward_slope = (plus - centre) / step
            backward_slope = (centre - minus) / step
            scale = max(abs(forward_slope), abs(backward_slope), 1.0)
            if abs(forward_slope - backward_slope) > KINK_TOLERANCE * scale:
                result.skipped_kinks += 1
                continue
            numeric = (plus - minus) / (2 * step)
            error = relative_error(float(analytic[name].reshape(-1)[index]), numeric)
            result.checked += 1
            worst_here = max(worst_here, error)
            if error > result.max_relative_error:
                result.max_relative_error = error
                result.worst = (name, int(index))
        result.errors[name] = worst_here
    logger.debug(
        f"gradcheck: {result.checked} coordinates, {result.skipped_kinks} kinks skipped, "
        f"max relative error {result.max_relative_error:.3e}",
    )
    return result
