"""
Attention heat maps.

Each map is written twice: an 8-bit binary PGM scaled so the largest weight is 255,
and a CSV sidecar carrying the raw weights at full precision.
"""

import logging
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from caan.dataset.models import ClipRecord
from caan.dataset.services.manifest_service import load_spectrogram
from caan.evalviz.models import HeatMap
from caan.exceptions import ConfigError
from caan.exceptions import ContractError
from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError
from caan.network.services import forward_scene
from caan.tensor.models import Tensor
from caan.tensor.models import no_grad
from caan.trainer.models import TrainResult
from caan.trainer.services import condition_mask

logger = logging.getLogger(__name__)

PREDICTED = "predicted"


def csv_path(path: Path | str) -> Path:
    return Path(path).with_suffix(".csv")


def select_heatmap(attention: Any, class_index: int, **metadata: Any) -> HeatMap:
    values = attention.data if isinstance(attention, Tensor) else np.asarray(attention)
    if values.ndim != 3:  # noqa: PLR2004
        msg = f"attention must be classes x rows x cols, got {values.shape}"
        raise ContractError(msg)
    if not 0 <= class_index < values.shape[0]:
        msg = f"class {class_index} out of range for {values.shape[0]} classes"
        raise ContractError(msg)
    return HeatMap(values[class_index], class_index=class_index, **metadata)


def write_heatmap(heatmap: HeatMap, out_path: Path | str) -> Path:
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(heatmap.pixels()).save(out_path, format="PPM")
        np.savetxt(csv_path(out_path), heatmap.values, fmt="%.17g", delimiter=",")
    except OSError as exc:
        msg = f"cannot write heat map {out_path}: {exc}"
        raise DatasetIOError(msg) from exc
    logger.info(f"Wrote {heatmap.shape[0]}x{heatmap.shape[1]} heat map for clip '{heatmap.clip_id}' to {out_path}")
    return out_path


def export_heatmap(attention: Any, class_index: int, out_path: Path | str, **metadata: Any) -> HeatMap:
    """Write ``attention[class_index]`` as a PGM plus CSV; metadata goes onto the :class:`HeatMap`."""
    metadata.setdefault("clip_id", Path(out_path).stem)
    heatmap = select_heatmap(attention, class_index, **metadata)
    write_heatmap(heatmap, out_path)
    return heatmap


def read_pgm(path: Path | str) -> np.ndarray:
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode != "L":
                msg = f"{path} is not an 8-bit greyscale PGM"
                raise FormatError(msg)
            return np.asarray(image).copy()
    except OSError as exc:
        msg = f"cannot read heat map {path}: {exc}"
        raise DatasetIOError(msg) from exc


def read_heatmap_values(path: Path | str) -> np.ndarray:
    try:
        return np.loadtxt(csv_path(path), delimiter=",", ndmin=2)
    except OSError as exc:
        msg = f"cannot read heat map values {csv_path(path)}: {exc}"
        raise DatasetIOError(msg) from exc


def clip_attention(result: TrainResult, record: ClipRecord) -> tuple[np.ndarray, np.ndarray]:
    """Attention and class scores of one clip under a trained attention model."""
    if not result.scene.head.kind.uses_attention:
        msg = f"'{result.scene.head.kind}' heads have no attention matrix"
        raise ConfigError(msg)
    x = result.normalizer.apply(load_spectrogram(record, result.scene.input_shape).values)
    with no_grad():
        mask, _ = condition_mask(result.scene, result.device, result.config.strategy, x, record.device)
        out = forward_scene(result.scene, x, mask)
    return out.attention.numpy(), out.scores.numpy()


def export_clip_heatmap(
    result: TrainResult,
    record: ClipRecord,
    out_dir: Path | str,
    class_choice: int | str = PREDICTED,
) -> HeatMap:
    attention, scores = clip_attention(result, record)
    class_index = int(np.argmax(scores)) if class_choice == PREDICTED else int(class_choice)
    names = result.scene_names
    class_name = names[class_index] if class_index < len(names) else str(class_index)
    out_path = Path(out_dir) / f"{record.clip_id}_{class_name}.pgm"
    return export_heatmap(
        attention,
        class_index,
        out_path,
        clip_id=record.clip_id,
        class_name=class_name,
        scene=record.scene,
        device=record.device,
    )
