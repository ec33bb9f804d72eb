"""
Multi-run experiments built from independent ``train_and_evaluate`` tasks.

Runs are queued first and collected afterwards, so a real broker spreads them over
workers; with eager settings they run in turn in this process.
"""

import logging
import statistics
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from typing import Any

from caan.evalviz.metrics import one_tailed_ztest
from caan.network.models import LAYERS

from .models import StrategyKind
from .models import TrainConfig
from .tasks import train_and_evaluate

logger = logging.getLogger(__name__)


def _run_all(
    configs: Sequence[dict[str, Any]],
    train_csv: str,
    test_csv: str,
    validation_csv: str | None,
) -> list[dict]:
    pending = [train_and_evaluate.delay(config, train_csv, test_csv, validation_csv) for config in configs]
    return [result.get() for result in pending]


def _config_for(base: TrainConfig, **changes: Any) -> dict[str, Any]:
    values = base.to_dict()
    values.update(changes)
    # validates before anything is queued
    TrainConfig(**values)
    return values


@dataclass
class LayerSweep:
    runs: dict[int, dict] = field(default_factory=dict)

    @property
    def best_layer(self) -> int:
        return max(self.runs, key=lambda layer: (self.runs[layer]["average"], -layer))

    def lines(self) -> list[str]:
        out = []
        for layer, run in sorted(self.runs.items()):
            devices = ", ".join(f"{name} {value:.4f}" for name, value in run["devices"].items())
            marker = "  <- best" if layer == self.best_layer else ""
            out.append(f"layer {layer}: {devices}, average {run['average']:.4f}{marker}")
        return out


def sweep_condition_layers(
    base: TrainConfig,
    train_csv: str,
    test_csv: str,
    validation_csv: str | None = None,
    layers: Sequence[int] = tuple(range(1, LAYERS + 1)),
) -> LayerSweep:
    """Teacher-forcing runs conditioned at each layer in turn."""
    configs = [
        _config_for(base, strategy=StrategyKind.TEACHER_FORCING.value, condition_layer=layer, device=None)
        for layer in layers
    ]
    sweep = LayerSweep(dict(zip(layers, _run_all(configs, train_csv, test_csv, validation_csv), strict=True)))
    logger.info(f"Best condition layer for {base.topology}/{base.head}: {sweep.best_layer}")
    return sweep


@dataclass
class StrategyComparison:
    runs: dict[str, list[dict]] = field(default_factory=dict)

    def median_average(self, strategy: str) -> float:
        return statistics.median(run["average"] for run in self.runs[strategy])

    def pooled(self, strategy: str) -> tuple[int, int]:
        runs = self.runs[strategy]
        return sum(run["correct"] for run in runs), sum(run["n"] for run in runs)

    @property
    def best(self) -> str:
        return max(self.runs, key=self.median_average)

    def p_values(self) -> dict[str, float]:
        """One-tailed p-values for "best strategy beats this one" on pooled correct counts."""
        correct_best, n_best = self.pooled(self.best)
        return {
            strategy: one_tailed_ztest(correct_best, n_best, *self.pooled(strategy))
            for strategy in self.runs
            if strategy != self.best
        }

    def lines(self) -> list[str]:
        out = []
        for strategy, runs in self.runs.items():
            devices: dict[str, list[float]] = {}
            for run in runs:
                for name, value in run["devices"].items():
                    devices.setdefault(name, []).append(value)
            per_device = ", ".join(f"{name} {statistics.median(values):.4f}" for name, values in devices.items())
            out.append(f"{strategy}: {per_device}, median average {self.median_average(strategy):.4f}")
        out.extend(f"{self.best} vs {strategy}: p = {p:.4g}" for strategy, p in self.p_values().items())
        return out


def compare_strategies(  # noqa: PLR0913
    base: TrainConfig,
    train_csv: str,
    test_csv: str,
    validation_csv: str | None = None,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    condition_layer: int = LAYERS,
    strategies: Sequence[StrategyKind] = tuple(StrategyKind),
) -> StrategyComparison:
    """Every strategy over the same seeds; conditional ones use ``condition_layer``."""
    plan = [
        (
            str(kind),
            _config_for(
                base,
                strategy=kind.value,
                seed=seed,
                condition_layer=condition_layer if kind.conditional else None,
                device=None,
            ),
        )
        for kind in strategies
        for seed in seeds
    ]
    comparison = StrategyComparison()
    runs = _run_all([config for _, config in plan], train_csv, test_csv, validation_csv)
    for (kind, _), run in zip(plan, runs, strict=True):
        comparison.runs.setdefault(kind, []).append(run)
    logger.info(f"Best strategy by median average accuracy: {comparison.best}")
    return comparison
