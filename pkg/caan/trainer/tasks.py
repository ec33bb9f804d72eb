from celery import shared_task

from caan.dataset.services.manifest_service import check_disjoint
from caan.dataset.services.manifest_service import load_manifest
from caan.evalviz.metrics import classwise_accuracy

from .models import StrategyKind
from .models import TrainConfig
from .services import predict
from .services import predict_per_device
from .services import save_result
from .services import train
from .services import train_per_device


@shared_task()
def train_and_evaluate(
    config: dict,
    train_csv: str,
    test_csv: str,
    validation_csv: str | None = None,
    model_path: str | None = None,
) -> dict:
    """Train one configuration and score it on a test manifest; returns a JSON-ready summary."""
    train_config = TrainConfig(**config)
    train_manifest = load_manifest(train_csv)
    test_manifest = load_manifest(test_csv)
    validation_manifest = load_manifest(validation_csv) if validation_csv else None
    check_disjoint(m for m in (train_manifest, validation_manifest, test_manifest) if m is not None)

    if train_config.strategy is StrategyKind.SINGLE_DEVICE and train_config.device is None:
        results = train_per_device(train_config, train_manifest, validation_manifest)
        predictions = predict_per_device(results, test_manifest)
        iterations = sum(len(result.report) for result in results.values())
    else:
        result = train(train_config, train_manifest, validation_manifest)
        if model_path:
            save_result(result, model_path)
        predictions = predict(
            result.scene,
            result.device,
            test_manifest,
            strategy=result.config.strategy,
            normalizer=result.normalizer,
        )
        iterations = len(result.report)

    metrics = classwise_accuracy(predictions, test_manifest.scene_names, test_manifest.device_names)
    return {
        "config": train_config.to_dict(),
        "devices": metrics.device_average,
        "average": metrics.overall,
        "correct": sum(metrics.correct.values()),
        "n": sum(metrics.counts.values()),
        "device_branch_accuracy": metrics.device_branch_accuracy,
        "iterations": iterations,
    }
