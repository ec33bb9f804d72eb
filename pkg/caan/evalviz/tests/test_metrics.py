import math

import numpy as np
import pytest

from caan.evalviz.metrics import classwise_accuracy
from caan.evalviz.metrics import confusion
from caan.evalviz.metrics import confusion_by_device
from caan.evalviz.metrics import metrics_from_confusion
from caan.evalviz.metrics import one_tailed_ztest
from caan.evalviz.metrics import z_statistic
from caan.evalviz.models import ConfusionMatrix
from caan.evalviz.models import Prediction
from caan.exceptions import ContractError
from caan.exceptions import ShapeError

NAMES = ("airport", "bus", "park")


def _random_predictions(rng, count=200, classes=3, devices=3):
    return [
        Prediction(f"c{i}", int(rng.integers(classes)), int(rng.integers(classes)), int(rng.integers(devices)))
        for i in range(count)
    ]


def test_unweighted_classwise_accuracy():
    predictions = [
        Prediction("a", 0, 0, 0),
        Prediction("b", 0, 1, 0),
        Prediction("c", 1, 1, 0),
    ]
    metrics = classwise_accuracy(predictions, NAMES[:2], ("A",))
    assert metrics.classwise == {"A": {"airport": 0.5, "bus": 1.0}}
    assert metrics.device_average == {"A": 0.75}
    assert metrics.overall == 0.75  # noqa: PLR2004
    assert metrics.correct == {"A": 2}
    assert metrics.counts == {"A": 3}


def test_all_correct():
    predictions = [Prediction(f"c{i}", i % 3, i % 3, i % 2) for i in range(12)]
    metrics = classwise_accuracy(predictions, NAMES, ("A", "B"))
    assert metrics.device_average == {"A": 1.0, "B": 1.0}
    assert metrics.overall == 1.0


def test_overall_is_the_mean_over_devices():
    predictions = [Prediction("a", 0, 0, 0), Prediction("b", 0, 1, 1), Prediction("c", 1, 1, 1)]
    metrics = classwise_accuracy(predictions, NAMES[:2], ("A", "B"))
    assert metrics.device_average == {"A": 1.0, "B": 0.5}
    assert metrics.overall == 0.75  # noqa: PLR2004


def test_missing_class_is_skipped_with_a_warning(caplog):
    predictions = [Prediction("a", 0, 0, 0), Prediction("b", 2, 0, 0)]
    metrics = classwise_accuracy(predictions, NAMES, ("A",))
    assert metrics.classwise["A"] == {"airport": 1.0, "park": 0.0}
    assert metrics.skipped == {"A": ["bus"]}
    assert metrics.to_dict()["skipped"] == {"A": ["bus"]}
    assert "no clips for bus" in caplog.text


def test_device_without_a_name_falls_back_to_its_index():
    metrics = classwise_accuracy([Prediction("a", 0, 0, 4)], NAMES)
    assert list(metrics.device_average) == ["4"]


def test_device_branch_accuracy():
    predictions = [
        Prediction("a", 0, 0, 0, predicted_device=0),
        Prediction("b", 1, 1, 1, predicted_device=0),
        Prediction("c", 1, 1, 1, predicted_device=1),
        Prediction("d", 1, 1, 1, predicted_device=1),
    ]
    metrics = classwise_accuracy(predictions, NAMES[:2], ("A", "B"))
    assert metrics.device_branch_accuracy == 0.75  # noqa: PLR2004
    assert metrics.lines()[-1] == "CNN-d accuracy: 0.7500"
    assert "device_branch_accuracy" in metrics.to_dict()


def test_bad_labels():
    with pytest.raises(ContractError, match="out of range"):
        classwise_accuracy([Prediction("a", 3, 0, 0)], NAMES)
    with pytest.raises(ContractError, match="no predictions"):
        classwise_accuracy([], NAMES)


def test_metrics_document():
    metrics = classwise_accuracy([Prediction("a", 0, 0, 0), Prediction("b", 1, 0, 0)], NAMES[:2], ("A",))
    document = metrics.to_dict()
    assert document["A"] == {"classes": {"airport": 1.0, "bus": 0.0}, "average": 0.5}
    assert document["overall"] == 0.5  # noqa: PLR2004
    assert "skipped" not in document
    assert "device_branch_accuracy" not in document


def test_confusion_example():
    predictions = [Prediction("a", 0, 0, 0), Prediction("b", 0, 2, 0), Prediction("c", 2, 2, 1)]
    matrix = confusion(predictions, NAMES)
    np.testing.assert_array_equal(matrix.counts, [[1, 0, 1], [0, 0, 0], [0, 0, 1]])
    assert matrix.total == 3  # noqa: PLR2004
    np.testing.assert_array_equal(matrix.support(), [2, 0, 1])


@pytest.mark.parametrize("seed", range(5))
def test_confusion_matches_a_tally(seed):
    rng = np.random.default_rng(seed)
    predictions = _random_predictions(rng)
    expected = np.zeros((3, 3), dtype=int)
    for p in predictions:
        expected[p.true_class][p.predicted_class] += 1
    np.testing.assert_array_equal(confusion(predictions, NAMES).counts, expected)
    by_device = confusion_by_device(predictions, NAMES, ("A", "B", "C"))
    assert sum(m.total for m in by_device.values()) == len(predictions)


@pytest.mark.parametrize("seed", range(5))
def test_metrics_from_confusion_agree_with_predictions(seed):
    rng = np.random.default_rng(seed)
    predictions = _random_predictions(rng, count=int(rng.integers(5, 60)))
    direct = classwise_accuracy(predictions, NAMES, ("A", "B", "C"))
    rebuilt = metrics_from_confusion(confusion_by_device(predictions, NAMES, ("A", "B", "C")))
    assert rebuilt.classwise == direct.classwise
    assert rebuilt.device_average == direct.device_average
    assert rebuilt.overall == direct.overall


def test_confusion_csv():
    matrix = ConfusionMatrix(np.array([[3, 5], [0, 2]]), ("home", "park"))
    assert matrix.to_csv() == "true\\predicted,home,park\nhome,3,5\npark,0,2\n"


def test_confusion_matrix_validation():
    with pytest.raises(ShapeError):
        ConfusionMatrix(np.zeros((2, 3)), ("a", "b"))
    with pytest.raises(ShapeError):
        ConfusionMatrix(np.zeros((2, 2)), ("a",))
    with pytest.raises(ContractError):
        ConfusionMatrix(np.array([[1, -1], [0, 0]]), ("a", "b"))


def test_equal_proportions_give_one_half():
    assert z_statistic(60, 100, 60, 100) == 0.0
    assert one_tailed_ztest(60, 100, 60, 100) == pytest.approx(0.5)


def test_ztest_matches_the_normal_tail():
    z = z_statistic(680, 1000, 650, 1000)
    pooled = 1330 / 2000
    expected_z = (0.68 - 0.65) / math.sqrt(pooled * (1 - pooled) * (2 / 1000))
    assert z == pytest.approx(expected_z)
    assert one_tailed_ztest(680, 1000, 650, 1000) == pytest.approx(0.5 * math.erfc(z / math.sqrt(2)))
    assert one_tailed_ztest(680, 1000, 650, 1000) < 0.5  # noqa: PLR2004


def test_p_value_falls_as_the_gap_grows():
    p_values = [one_tailed_ztest(600 + gap, 1000, 600, 1000) for gap in range(0, 100, 10)]
    assert all(b < a for a, b in zip(p_values, p_values[1:], strict=False))


def test_perfect_systems_have_no_spread():
    assert z_statistic(10, 10, 20, 20) == 0.0


@pytest.mark.parametrize(("correct_a", "n_a", "correct_b", "n_b"), [(0, 0, 1, 2), (3, 2, 1, 2), (1, 2, -1, 2)])
def test_ztest_rejects_impossible_counts(correct_a, n_a, correct_b, n_b):
    with pytest.raises(ContractError):
        z_statistic(correct_a, n_a, correct_b, n_b)
