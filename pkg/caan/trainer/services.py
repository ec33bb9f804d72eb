"""
Training loops for the four strategies.

``single_device`` trains an unconditioned model on one device's clips, ``joint`` on
all clips. ``teacher_forcing`` conditions the scene branch on the true device and
``multi_task`` on CNN-d's prediction, training both branches on
``scene_loss + λ·device_loss``. The device one-hot is a hard decision, so the scene
loss never reaches CNN-d.
"""

import logging
import time
from collections.abc import Iterable
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from caan.condition.models import DeviceOneHot
from caan.condition.models import DeviceOneHotMask
from caan.condition.services import predicted_onehot
from caan.dataset.models import DatasetManifest
from caan.dataset.services.manifest_service import check_disjoint
from caan.dataset.services.splits import carve_validation
from caan.evalviz.metrics import classwise_accuracy
from caan.evalviz.models import Metrics
from caan.evalviz.models import Prediction
from caan.exceptions import ConfigError
from caan.exceptions import ContractError
from caan.exceptions import NumericError
from caan.exceptions import ValidationError
from caan.network.models import DeviceNet
from caan.network.models import SceneNet
from caan.network.models import Topology
from caan.network.persistence import load_networks
from caan.network.persistence import save_networks
from caan.network.services import build_device_net
from caan.network.services import build_scene_net
from caan.network.services import forward_device
from caan.network.services import forward_scene
from caan.network.services import mask_for
from caan.tensor import ops
from caan.tensor.models import AdamState
from caan.tensor.models import Tensor
from caan.tensor.models import no_grad
from caan.tensor.optim import adam_step
from caan.tensor.optim import gradients_of
from caan.tensor.optim import zero_grad
from caan.trainer.loader import BatchLoader
from caan.trainer.loader import SpectrogramCache
from caan.trainer.losses import device_loss
from caan.trainer.losses import multitask_loss
from caan.trainer.losses import scene_loss
from caan.trainer.models import Normalizer
from caan.trainer.models import StrategyKind
from caan.trainer.models import TrainConfig
from caan.trainer.models import TrainReport
from caan.trainer.models import TrainResult
from caan.trainer.schedules import LambdaSwitch
from caan.trainer.schedules import lr_at

logger = logging.getLogger(__name__)


@dataclass
class BatchLoss:
    loss: Tensor
    scene: Tensor
    device: Tensor | None
    scene_correct: int
    device_correct: int


def condition_mask(
    scene: SceneNet,
    device_net: DeviceNet | None,
    strategy: StrategyKind,
    x: np.ndarray,
    true_device: int,
) -> tuple[DeviceOneHotMask | None, Tensor | None]:
    """Device mask for one input, plus CNN-d's logits when the strategy predicts the device."""
    if not strategy.conditional:
        return None, None
    if strategy is StrategyKind.TEACHER_FORCING:
        return mask_for(scene, DeviceOneHot.for_device(true_device, scene.injector.devices)), None
    if device_net is None:
        msg = "multi_task conditioning needs a device network"
        raise ContractError(msg)
    logits = forward_device(device_net, x)
    return mask_for(scene, predicted_onehot(logits)), logits


def batch_loss(  # noqa: PLR0913
    scene: SceneNet,
    device_net: DeviceNet | None,
    strategy: StrategyKind,
    inputs: Sequence[np.ndarray],
    scenes: Sequence[int],
    devices: Sequence[int],
    lam: float,
) -> BatchLoss:
    scores, logits = [], []
    scene_correct = device_correct = 0
    for x, true_scene, true_device in zip(inputs, scenes, devices, strict=True):
        mask, z = condition_mask(scene, device_net, strategy, x, true_device)
        y = forward_scene(scene, x, mask).scores
        scores.append(y)
        scene_correct += int(np.argmax(y.data) == true_scene)
        if z is not None:
            logits.append(z)
            device_correct += int(np.argmax(z.data) == true_device)
    loss_s = scene_loss(scores, list(scenes))
    if not logits:
        return BatchLoss(loss_s, loss_s, None, scene_correct, device_correct)
    loss_d = device_loss(logits, list(devices))
    return BatchLoss(multitask_loss(loss_s, loss_d, lam), loss_s, loss_d, scene_correct, device_correct)


def _predict_one(
    scene: SceneNet,
    device_net: DeviceNet | None,
    strategy: StrategyKind,
    x: np.ndarray,
    true_device: int,
) -> tuple[int, int | None]:
    mask, logits = condition_mask(scene, device_net, strategy, x, true_device)
    if logits is None and device_net is not None:
        logits = forward_device(device_net, x)
    predicted_device = int(np.argmax(logits.data)) if logits is not None else None
    return int(np.argmax(forward_scene(scene, x, mask).scores.data)), predicted_device


def predict_cached(
    scene: SceneNet,
    device_net: DeviceNet | None,
    strategy: StrategyKind,
    manifest: DatasetManifest,
    cache: SpectrogramCache,
) -> list[Prediction]:
    predictions = []
    with no_grad():
        for record in manifest.records:
            spec = cache[record.clip_id]
            predicted, predicted_device = _predict_one(scene, device_net, strategy, spec, record.device)
            predictions.append(Prediction(record.clip_id, record.scene, predicted, record.device, predicted_device))
    return predictions


def predict(
    scene: SceneNet,
    device_net: DeviceNet | None,
    manifest: DatasetManifest,
    *,
    strategy: StrategyKind | str,
    normalizer: Normalizer | None = None,
) -> list[Prediction]:
    """
    Classify every clip of a manifest.

    Teacher-forcing models condition on the true device, multi-task models on CNN-d's
    prediction; unconditioned models ignore the device.
    """
    if not manifest.records:
        msg = f"{manifest.split} split is empty"
        raise ContractError(msg)
    cache = SpectrogramCache(manifest, scene.input_shape).normalise(normalizer or Normalizer())
    return predict_cached(scene, device_net, StrategyKind(strategy), manifest, cache)


def evaluate(result: TrainResult, manifest: DatasetManifest) -> Metrics:
    predictions = predict(
        result.scene,
        result.device,
        manifest,
        strategy=result.config.strategy,
        normalizer=result.normalizer,
    )
    return classwise_accuracy(predictions, manifest.scene_names, manifest.device_names)


def _monitor(  # noqa: PLR0913
    scene: SceneNet,
    device_net: DeviceNet | None,
    strategy: StrategyKind,
    manifest: DatasetManifest,
    cache: SpectrogramCache,
    iteration: int,
) -> dict[str, float]:
    predictions = predict_cached(scene, device_net, strategy, manifest, cache)
    metrics = classwise_accuracy(predictions, manifest.scene_names, manifest.device_names)
    accuracies = dict(metrics.device_average)
    accuracies["average"] = metrics.overall
    if metrics.device_branch_accuracy is not None:
        accuracies["device_branch"] = metrics.device_branch_accuracy
    logger.info(
        f"Iteration {iteration + 1}: {manifest.split} accuracy "
        + ", ".join(f"{name} {value:.3f}" for name, value in accuracies.items()),
    )
    return accuracies


def _prepare_splits(
    config: TrainConfig,
    train_manifest: DatasetManifest,
    validation_manifest: DatasetManifest | None,
) -> tuple[DatasetManifest, DatasetManifest | None]:
    if validation_manifest is not None:
        check_disjoint([train_manifest, validation_manifest])
    if config.strategy is StrategyKind.SINGLE_DEVICE:
        if config.device is None:
            msg = "single_device training needs a device index"
            raise ConfigError(msg)
        if not 0 <= config.device < train_manifest.devices:
            msg = f"device {config.device} out of range for {train_manifest.devices} devices"
            raise ConfigError(msg)
        train_manifest = train_manifest.filter(device=config.device)
        if validation_manifest is not None:
            validation_manifest = validation_manifest.filter(device=config.device)
    if not train_manifest.records:
        msg = f"{train_manifest.split} split is empty"
        raise ContractError(msg)
    if config.strategy is not StrategyKind.SINGLE_DEVICE and (missing := train_manifest.missing_cells()):
        cells = ", ".join(
            f"{train_manifest.scene_names[scene]}/{train_manifest.device_names[device]}" for scene, device in missing
        )
        msg = f"{train_manifest.split} split has no clips for scene/device cells: {cells}"
        raise ValidationError(msg)
    if validation_manifest is None and config.validation_fraction > 0:
        train_manifest, validation_manifest = carve_validation(
            train_manifest,
            config.validation_fraction,
            config.seed,
        )
    if validation_manifest is not None and not validation_manifest.records:
        validation_manifest = None
    return train_manifest, validation_manifest


def build_networks(
    config: TrainConfig,
    classes: int,
    devices: int,
    input_shape: tuple[int, int],
) -> tuple[SceneNet, DeviceNet | None]:
    topology = Topology(config.topology, config.widths, config.kernel_size)
    scene = build_scene_net(
        topology,
        config.head,
        config.condition_layer,
        classes,
        config.seed,
        devices=devices,
        input_shape=input_shape,
    )
    device_net = None
    if config.strategy.uses_device_net:
        device_net = build_device_net(
            devices,
            config.seed,
            widths=config.device_widths,
            kernel_size=config.kernel_size,
            input_shape=input_shape,
        )
    return scene, device_net


def train(
    config: TrainConfig,
    train_manifest: DatasetManifest,
    validation_manifest: DatasetManifest | None = None,
) -> TrainResult:
    started = time.perf_counter()
    strategy = config.strategy
    train_manifest, validation_manifest = _prepare_splits(config, train_manifest, validation_manifest)
    cache = SpectrogramCache(train_manifest)
    normalizer = cache.fit()
    cache.normalise(normalizer)
    monitor_manifest, monitor_cache = train_manifest, cache
    if validation_manifest is not None:
        monitor_manifest = validation_manifest
        monitor_cache = SpectrogramCache(validation_manifest, cache.shape).normalise(normalizer)
    elif strategy.uses_device_net:
        logger.warning("No validation clips; the lambda switch watches training accuracy")

    scene, device_net = build_networks(config, train_manifest.classes, train_manifest.devices, cache.shape)
    params = dict(scene.parameters())
    if device_net is not None:
        params.update(device_net.parameters())
    state = AdamState.for_parameters(
        params,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        epsilon=config.adam_epsilon,
    )
    switch = LambdaSwitch(config.lambda_threshold, config.lambda_high, config.lambda_low)
    report = TrainReport()
    loader = BatchLoader(
        train_manifest,
        cache,
        config.batch_size,
        config.max_iterations,
        config.seed,
        config.prefetch,
    )
    logger.info(
        f"Training {strategy} {config.topology}/{config.head} on {len(train_manifest)} clips "
        f"for {config.max_iterations} iterations",
    )

    for batch in loader:
        iteration = batch.index
        lr = lr_at(iteration, config.learning_rate, config.lr_decay, config.lr_period)
        lam = switch.value if device_net is not None else 0.0
        zero_grad(params)
        result = batch_loss(scene, device_net, strategy, batch.inputs, batch.scenes, batch.devices, lam)
        value = result.loss.item()
        if not np.isfinite(value):
            msg = f"loss became {value} at iteration {iteration}"
            logger.error(msg)
            loader.close()
            raise NumericError(msg, iteration=iteration)
        ops.backward(result.loss)
        try:
            adam_step(params, gradients_of(params), state, lr)
        except NumericError as exc:
            logger.error(f"Iteration {iteration}: {exc}")
            loader.close()
            raise NumericError(str(exc), iteration=iteration) from exc
        report.record(
            result.scene.item(),
            result.device.item() if result.device is not None else 0.0,
            value,
            lr,
            lam,
            result.scene_correct / len(batch),
            result.device_correct / len(batch) if device_net is not None else 0.0,
        )

        if (iteration + 1) % config.eval_interval == 0 or iteration + 1 == config.max_iterations:
            accuracies = _monitor(scene, device_net, strategy, monitor_manifest, monitor_cache, iteration)
            report.record_evaluation(iteration, accuracies)
            if device_net is not None:
                switch.update(accuracies["device_branch"], iteration)

    report.lambda_switch_iteration = switch.switched_at
    report.wall_clock = time.perf_counter() - started
    logger.info(f"Finished after {len(report)} iterations in {report.wall_clock:.1f}s")
    return TrainResult(
        config=config,
        scene=scene,
        device=device_net,
        report=report,
        normalizer=normalizer,
        scene_names=train_manifest.scene_names,
        device_names=train_manifest.device_names,
    )


def train_per_device(
    config: TrainConfig,
    train_manifest: DatasetManifest,
    validation_manifest: DatasetManifest | None = None,
    devices: Iterable[int] | None = None,
) -> dict[int, TrainResult]:
    """One single-device model for every device that has training clips."""
    if config.strategy is not StrategyKind.SINGLE_DEVICE:
        msg = f"per-device training needs the single_device strategy, got '{config.strategy}'"
        raise ConfigError(msg)
    counts = {record.device for record in train_manifest.records}
    chosen = sorted(counts) if devices is None else list(devices)
    return {
        device: train(config.override(device=device), train_manifest, validation_manifest)
        for device in chosen
    }


def predict_per_device(results: dict[int, TrainResult], manifest: DatasetManifest) -> list[Prediction]:
    """Route every clip to the model trained on its own device."""
    predictions = []
    for device, result in sorted(results.items()):
        subset = manifest.filter(device=device)
        if subset.records:
            predictions.extend(
                predict(result.scene, None, subset, strategy=result.config.strategy, normalizer=result.normalizer),
            )
    return predictions


def save_result(result: TrainResult, path: Path | str) -> Path:
    return save_networks(
        path,
        result.scene,
        result.device,
        extras=result.normalizer.records(),
        metadata={
            "config": result.config.to_dict(),
            "scene_names": list(result.scene_names),
            "device_names": list(result.device_names),
        },
    )


def load_result(path: Path | str) -> TrainResult:
    """Rebuild a trained model from its weight file and sidecar (without the report)."""
    loaded = load_networks(path)
    config_values = loaded.metadata.get("config")
    if config_values is None:
        msg = f"{path} was not written by the trainer"
        raise ConfigError(msg)
    return TrainResult(
        config=TrainConfig(**config_values),
        scene=loaded.scene,
        device=loaded.device,
        report=TrainReport(),
        normalizer=Normalizer.from_records(loaded.extras),
        scene_names=tuple(loaded.metadata.get("scene_names", ())),
        device_names=tuple(loaded.metadata.get("device_names", ())),
    )
