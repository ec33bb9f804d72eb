"""
Model files: parameters in a ``CAAN`` tensor file, architecture in a JSON sidecar.

``model.caan`` holds every parameter under its canonical name (``scene.conv1.weight``,
``device.fc.bias``, ...); ``model.json`` holds what is needed to rebuild the networks.
Extra named arrays (input normalisation statistics) ride along in the tensor file.
"""

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np

from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError
from caan.network.models import DeviceNet
from caan.network.models import SceneNet
from caan.network.models import Topology
from caan.network.services import build_device_net
from caan.network.services import build_scene_net
from caan.tensor.models import Tensor
from caan.tensor.serialization import load_tensors
from caan.tensor.serialization import save_tensors

logger = logging.getLogger(__name__)

SIDECAR_VERSION = 1


@dataclass
class LoadedModel:
    scene: SceneNet
    device: DeviceNet | None
    metadata: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, np.ndarray] = field(default_factory=dict)


def sidecar_path(path: Path | str) -> Path:
    return Path(path).with_suffix(".json")


def describe(scene: SceneNet, device: DeviceNet | None) -> dict[str, Any]:
    description: dict[str, Any] = {
        "version": SIDECAR_VERSION,
        "scene": {
            "topology": str(scene.topology.kind),
            "widths": list(scene.topology.widths),
            "kernel_size": scene.topology.kernel_size,
            "head": str(scene.head.kind),
            "classes": scene.classes,
            "condition_layer": scene.condition_layer,
            "devices": scene.injector.devices if scene.injector is not None else None,
            "input_shape": list(scene.input_shape),
        },
        "device": None,
    }
    if device is not None:
        description["device"] = {
            "widths": [layer.weight.shape[0] for layer in device.layers],
            "kernel_size": device.layers[0].weight.shape[2],
            "devices": device.devices,
            "input_shape": list(device.input_shape),
        }
    return description


def save_networks(
    path: Path | str,
    scene: SceneNet,
    device: DeviceNet | None = None,
    *,
    extras: Mapping[str, np.ndarray] | None = None,
    metadata: Mapping[str, Any] | None = None,
) -> Path:
    path = Path(path)
    tensors: dict[str, Tensor | np.ndarray] = dict(scene.parameters())
    if device is not None:
        tensors.update(device.parameters())
    tensors.update(extras or {})
    save_tensors(tensors, path)
    description = describe(scene, device)
    description["metadata"] = dict(metadata or {})
    try:
        sidecar_path(path).write_text(json.dumps(description, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write model description {sidecar_path(path)}: {exc}"
        raise DatasetIOError(msg) from exc
    logger.info(f"Saved model to {path}")
    return path


def _assign(params: Mapping[str, Tensor], arrays: dict[str, np.ndarray], path: Path) -> None:
    for name, tensor in params.items():
        if name not in arrays:
            msg = f"{path} has no record '{name}'"
            raise FormatError(msg)
        array = arrays.pop(name)
        if array.shape != tensor.shape:
            msg = f"record '{name}' in {path} has shape {array.shape}, expected {tensor.shape}"
            raise FormatError(msg)
        tensor.data = array.astype(tensor.dtype)


def load_networks(path: Path | str) -> LoadedModel:
    path = Path(path)
    try:
        description = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        msg = f"cannot read model description {sidecar_path(path)}: {exc}"
        raise DatasetIOError(msg) from exc
    except json.JSONDecodeError as exc:
        msg = f"model description {sidecar_path(path)} is not valid JSON: {exc}"
        raise FormatError(msg) from exc
    if description.get("version") != SIDECAR_VERSION:
        msg = f"unsupported model description version {description.get('version')}"
        raise FormatError(msg)

    arrays = load_tensors(path)
    spec = description["scene"]
    scene = build_scene_net(
        Topology(spec["topology"], tuple(spec["widths"]), spec["kernel_size"]),
        spec["head"],
        spec["condition_layer"],
        spec["classes"],
        devices=spec["devices"] or 1,
        input_shape=tuple(spec["input_shape"]),
    )
    _assign(scene.parameters(), arrays, path)
    device = None
    if description["device"] is not None:
        spec = description["device"]
        device = build_device_net(
            spec["devices"],
            widths=tuple(spec["widths"]),
            kernel_size=spec["kernel_size"],
            input_shape=tuple(spec["input_shape"]),
        )
        _assign(device.parameters(), arrays, path)
    return LoadedModel(scene, device, description.get("metadata", {}), arrays)
