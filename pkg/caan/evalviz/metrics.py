import logging
import math
from collections import defaultdict
from collections.abc import Mapping
from collections.abc import Sequence

import numpy as np
from scipy import stats

from caan.evalviz.models import ConfusionMatrix
from caan.evalviz.models import Metrics
from caan.evalviz.models import Prediction
from caan.exceptions import ContractError

logger = logging.getLogger(__name__)


def _name(names: Sequence[str], index: int) -> str:
    return names[index] if 0 <= index < len(names) else str(index)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _check_labels(predictions: Sequence[Prediction], classes: int) -> None:
    for p in predictions:
        if not (0 <= p.true_class < classes and 0 <= p.predicted_class < classes):
            msg = f"clip '{p.clip_id}': class labels {p.true_class}/{p.predicted_class} out of range for {classes}"
            raise ContractError(msg)


def _assemble(
    tallies: Mapping[str, Mapping[int, tuple[int, int]]],
    class_names: Sequence[str],
    device_branch_accuracy: float | None,
) -> Metrics:
    classwise: dict[str, dict[str, float]] = {}
    averages: dict[str, float] = {}
    correct: dict[str, int] = {}
    counts: dict[str, int] = {}
    skipped: dict[str, list[str]] = {}
    for device, per_class in tallies.items():
        accuracies = {}
        missing = []
        for k, name in enumerate(class_names):
            hits, total = per_class.get(k, (0, 0))
            if total == 0:
                missing.append(name)
                continue
            accuracies[name] = hits / total
        if missing:
            logger.warning(f"Device {device}: no clips for {', '.join(missing)}, left out of the average")
        if not accuracies:
            continue
        classwise[device] = accuracies
        averages[device] = _mean(list(accuracies.values()))
        correct[device] = sum(hits for hits, _ in per_class.values())
        counts[device] = sum(total for _, total in per_class.values())
        skipped[device] = missing
    if not averages:
        msg = "no predictions to evaluate"
        raise ContractError(msg)
    return Metrics(
        classwise=classwise,
        device_average=averages,
        overall=_mean(list(averages.values())),
        correct=correct,
        counts=counts,
        skipped=skipped,
        device_branch_accuracy=device_branch_accuracy,
    )


def _device_branch_accuracy(predictions: Sequence[Prediction]) -> float | None:
    judged = [p for p in predictions if p.predicted_device is not None]
    if not judged:
        return None
    return sum(p.predicted_device == p.device for p in judged) / len(judged)


def classwise_accuracy(
    predictions: Sequence[Prediction],
    class_names: Sequence[str],
    device_names: Sequence[str] = (),
) -> Metrics:
    """
    Per-device unweighted class-wise accuracy and its mean over devices.

    Each class counts once regardless of its size: one of two clips right in class 0
    and one of one in class 1 averages 0.75. Classes without clips on a device are left
    out of that device's average with a warning.
    """
    _check_labels(predictions, len(class_names))
    tallies: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(lambda: [0, 0]))
    for p in sorted(predictions, key=lambda p: p.device):
        cell = tallies[_name(device_names, p.device)][p.true_class]
        cell[0] += p.correct
        cell[1] += 1
    frozen = {device: {k: (v[0], v[1]) for k, v in per_class.items()} for device, per_class in tallies.items()}
    return _assemble(frozen, class_names, _device_branch_accuracy(predictions))


def confusion(predictions: Sequence[Prediction], class_names: Sequence[str]) -> ConfusionMatrix:
    _check_labels(predictions, len(class_names))
    counts = np.zeros((len(class_names), len(class_names)), dtype=np.int64)
    if predictions:
        np.add.at(
            counts,
            ([p.true_class for p in predictions], [p.predicted_class for p in predictions]),
            1,
        )
    return ConfusionMatrix(counts, tuple(class_names))


def confusion_by_device(
    predictions: Sequence[Prediction],
    class_names: Sequence[str],
    device_names: Sequence[str] = (),
) -> dict[str, ConfusionMatrix]:
    grouped: dict[int, list[Prediction]] = defaultdict(list)
    for p in predictions:
        grouped[p.device].append(p)
    return {_name(device_names, device): confusion(grouped[device], class_names) for device in sorted(grouped)}


def metrics_from_confusion(
    matrices: Mapping[str, ConfusionMatrix],
    device_branch_accuracy: float | None = None,
) -> Metrics:
    if not matrices:
        msg = "no confusion matrices to evaluate"
        raise ContractError(msg)
    class_names = next(iter(matrices.values())).class_names
    tallies = {
        device: {
            k: (int(matrix.counts[k, k]), int(matrix.counts[k].sum()))
            for k in range(matrix.classes)
            if matrix.counts[k].sum()
        }
        for device, matrix in matrices.items()
    }
    return _assemble(tallies, class_names, device_branch_accuracy)


def z_statistic(correct_a: int, n_a: int, correct_b: int, n_b: int) -> float:
    """Pooled two-proportion z statistic, positive when system a is the more accurate."""
    for correct, n, label in ((correct_a, n_a, "a"), (correct_b, n_b, "b")):
        if n <= 0:
            msg = f"system {label} needs at least one trial, got n={n}"
            raise ContractError(msg)
        if not 0 <= correct <= n:
            msg = f"system {label}: {correct} correct out of {n} is impossible"
            raise ContractError(msg)
    pooled = (correct_a + correct_b) / (n_a + n_b)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n_a + 1 / n_b))
    if se == 0:
        return 0.0
    return (correct_a / n_a - correct_b / n_b) / se


def one_tailed_ztest(correct_a: int, n_a: int, correct_b: int, n_b: int) -> float:
    """Upper-tail p-value for "system a beats system b"."""
    return float(stats.norm.sf(z_statistic(correct_a, n_a, correct_b, n_b)))
