import csv
import json
import logging
from collections.abc import Iterable
from pathlib import Path

from caan.audiofront.models import Spectrogram
from caan.dataset.models import DEFAULT_DEVICE_NAMES
from caan.dataset.models import DEFAULT_SCENE_NAMES
from caan.dataset.models import ClipRecord
from caan.dataset.models import DatasetManifest
from caan.dataset.models import Split
from caan.exceptions import DatasetIOError
from caan.exceptions import ManifestParseError
from caan.exceptions import ValidationError

from .spectrogram_io import read_spectrogram

logger = logging.getLogger(__name__)

HEADER = ["clip_id", "scene", "device", "path"]
LABELS_FILE = "labels.json"


def _read_labels(directory: Path) -> tuple[tuple[str, ...], tuple[str, ...]]:
    labels_path = directory / LABELS_FILE
    if not labels_path.exists():
        return DEFAULT_SCENE_NAMES, DEFAULT_DEVICE_NAMES
    try:
        labels = json.loads(labels_path.read_text(encoding="utf-8"))
        scenes, devices = tuple(labels["scenes"]), tuple(labels["devices"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        msg = f"{labels_path} must hold 'scenes' and 'devices' name lists: {exc}"
        raise ValidationError(msg) from exc
    if not scenes or not devices:
        msg = f"{labels_path} lists no scenes or no devices"
        raise ValidationError(msg)
    return scenes, devices


def _parse_row(row: list[str], line: int, directory: Path) -> ClipRecord:
    if len(row) != len(HEADER):
        msg = f"expected {len(HEADER)} fields, got {len(row)}"
        raise ManifestParseError(msg, line)
    clip_id, scene, device, path = (field.strip() for field in row)
    if not clip_id:
        msg = "empty clip id"
        raise ManifestParseError(msg, line)
    try:
        scene_index, device_index = int(scene), int(device)
    except ValueError as exc:
        msg = f"scene and device must be integers, got '{scene}' and '{device}'"
        raise ManifestParseError(msg, line) from exc
    if not path:
        msg = f"clip '{clip_id}' has no spectrogram path"
        raise ManifestParseError(msg, line)
    return ClipRecord(clip_id, scene_index, device_index, directory / path)


def load_manifest(path: Path | str, split: Split | str | None = None) -> DatasetManifest:
    """
    Read a ``clip_id,scene,device,path`` CSV manifest.

    Paths are relative to the manifest's directory. Scene and device names come from
    ``labels.json`` next to the manifest when present. The split tag defaults to the
    file stem when that names a split.
    """
    path = Path(path)
    directory = path.parent
    try:
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle, quoting=csv.QUOTE_NONE))
    except OSError as exc:
        msg = f"cannot read manifest {path}: {exc}"
        raise DatasetIOError(msg) from exc
    except UnicodeDecodeError as exc:
        msg = f"manifest {path} is not UTF-8: {exc}"
        raise ValidationError(msg) from exc

    if rows and [h.strip() for h in rows[0]] != HEADER:
        msg = f"header must be '{','.join(HEADER)}', got '{','.join(rows[0])}'"
        raise ManifestParseError(msg, 1)
    records = [
        _parse_row(row, line, directory)
        for line, row in enumerate(rows[1:], start=2)
        if any(field.strip() for field in row)
    ]
    if split is None:
        split = path.stem if path.stem in {s.value for s in Split} else Split.TRAIN
    scenes, devices = _read_labels(directory)
    manifest = DatasetManifest(records, scenes, devices, Split(split), directory)
    manifest.validate()
    logger.info(f"Loaded {len(manifest)} {manifest.split} records from {path}")
    return manifest


def write_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    path = Path(path)
    directory = path.parent
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, quoting=csv.QUOTE_NONE, lineterminator="\n")
            writer.writerow(HEADER)
            for record in manifest.records:
                record_path = record.path
                if record_path.is_absolute() and record_path.is_relative_to(directory):
                    record_path = record_path.relative_to(directory)
                writer.writerow([record.clip_id, record.scene, record.device, record_path.as_posix()])
        if (manifest.scene_names, manifest.device_names) != (DEFAULT_SCENE_NAMES, DEFAULT_DEVICE_NAMES):
            labels = {"scenes": list(manifest.scene_names), "devices": list(manifest.device_names)}
            (directory / LABELS_FILE).write_text(json.dumps(labels, indent=2), encoding="utf-8")
    except OSError as exc:
        msg = f"cannot write manifest {path}: {exc}"
        raise DatasetIOError(msg) from exc
    except csv.Error as exc:
        msg = f"manifest field cannot be written unquoted: {exc}"
        raise ValidationError(msg) from exc
    return path


def check_disjoint(manifests: Iterable[DatasetManifest]) -> None:
    owner: dict[str, Split] = {}
    for manifest in manifests:
        for record in manifest.records:
            if record.clip_id in owner:
                msg = f"clip id '{record.clip_id}' appears in both {owner[record.clip_id]} and {manifest.split}"
                raise ValidationError(msg)
            owner[record.clip_id] = manifest.split


def load_spectrogram(record: ClipRecord, shape: tuple[int, int] | None = None) -> Spectrogram:
    """Read a record's spectrogram, checking its shape when one is expected."""
    spec = read_spectrogram(record.path)
    if shape is not None and spec.shape != tuple(shape):
        msg = f"clip '{record.clip_id}' has shape {spec.shape}, expected {tuple(shape)}"
        raise ValidationError(msg)
    return spec
