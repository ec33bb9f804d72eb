import math

import numpy as np
import pytest

from caan.exceptions import ContractError
from caan.tensor import ops
from caan.tensor.models import Tensor
from caan.tensor.models import precision
from caan.trainer.losses import device_loss
from caan.trainer.losses import multitask_loss
from caan.trainer.losses import scene_loss


@pytest.mark.parametrize(("lam", "expected"), [(1.0, 0.9), (0.0001, 0.70002)])
def test_multitask_loss(lam, expected):
    assert multitask_loss(0.7, 0.2, lam) == pytest.approx(expected)


def test_multitask_loss_on_tensors():
    total = multitask_loss(Tensor(0.7, dtype=np.float64), Tensor(0.2, dtype=np.float64), 0.5)
    assert total.item() == pytest.approx(0.8)


def test_uniform_scores_cost_log_classes():
    assert scene_loss(Tensor(np.full(10, 0.1)), 3).item() == pytest.approx(math.log(10), rel=1e-6)


def test_confident_correct_scores_cost_nothing():
    y = np.zeros(10)
    y[4] = 1.0
    assert scene_loss(Tensor(y), 4).item() == pytest.approx(0.0, abs=1e-7)


def test_zero_probability_is_floored():
    y = np.zeros(10)
    y[4] = 1.0
    assert scene_loss(Tensor(y, dtype=np.float64), 2).item() == pytest.approx(-math.log(1e-7))


def test_attention_scores_are_renormalised():
    # scores of an attention head need not sum to one
    assert scene_loss(Tensor([0.2, 0.2]), 0).item() == pytest.approx(math.log(2), rel=1e-6)


def test_batch_mean():
    scores = [Tensor([0.5, 0.5]), Tensor([0.25, 0.75])]
    expected = (math.log(2) - math.log(0.75)) / 2
    assert scene_loss(scores, [0, 1]).item() == pytest.approx(expected, rel=1e-6)


def test_device_loss_matches_softmax_cross_entropy(rng):
    logits = rng.normal(size=3)
    with precision(np.float64):
        value = device_loss(Tensor(logits), 2).item()
    assert value == pytest.approx(-logits[2] + np.log(np.exp(logits).sum()))


@pytest.mark.parametrize("target", [-1, 3])
def test_target_out_of_range(target):
    with pytest.raises(ContractError, match="out of range"):
        scene_loss(Tensor([0.2, 0.3, 0.5]), target)
    with pytest.raises(ContractError, match="out of range"):
        device_loss(Tensor([0.2, 0.3, 0.5]), target)


def test_mismatched_batch():
    with pytest.raises(ContractError):
        scene_loss([Tensor([0.5, 0.5])], [0, 1])


def test_scene_loss_gradient_points_at_the_true_class():
    y = Tensor([0.3, 0.3, 0.4], requires_grad=True)
    ops.backward(scene_loss(y, 0))
    assert y.grad[0] < 0
    assert y.grad[1] > 0
