import logging
from collections.abc import Mapping

import numpy as np

from caan.exceptions import ContractError
from caan.exceptions import NumericError
from caan.tensor.models import AdamState
from caan.tensor.models import Tensor

logger = logging.getLogger(__name__)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray | None],
    state: AdamState,
    lr: float,
) -> tuple[Mapping[str, Tensor], AdamState]:
    """
    Apply one bias-corrected Adam update in place.

    Parameters without an entry in ``grads`` (or with ``None``) are treated as having a
    zero gradient. A non-finite gradient rejects the whole update before anything moves.
    """
    if lr <= 0:
        msg = f"learning rate must be positive, got {lr}"
        raise ContractError(msg)
    for name, grad in grads.items():
        if name not in params:
            msg = f"gradient for unknown parameter '{name}'"
            raise ContractError(msg)
        if grad is None:
            continue
        if grad.shape != params[name].shape:
            msg = f"gradient for '{name}' has shape {grad.shape}, parameter has {params[name].shape}"
            raise ContractError(msg)
        if not np.all(np.isfinite(grad)):
            msg = f"non-finite gradient for '{name}', update rejected"
            raise NumericError(msg)

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        m = state.first_moment.setdefault(name, np.zeros_like(param.data))
        v = state.second_moment.setdefault(name, np.zeros_like(param.data))
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        v += (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(param.dtype)
    return params, state


def gradients_of(params: Mapping[str, Tensor]) -> dict[str, np.ndarray | None]:
    return {name: p.grad for name, p in params.items()}


def zero_grad(params: Mapping[str, Tensor]) -> None:
    for param in params.values():
        param.zero_grad()
