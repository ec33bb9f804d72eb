"""
Synthetic multi-device scene data, generated directly in log-mel space.

Each scene has a template: a floor level with one raised band of mel bins, whose
height is modulated over time, and a tonal line at the band centre. A clip is the
template plus a per-clip spectral offset and per-frame noise, passed through a
device profile. Profiles act in the power domain: a gain, a per-bin tilt and an
additive noise floor, so devices with a higher floor flatten the scene contrast.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from caan.audiofront.models import CLIP_FRAMES
from caan.audiofront.models import MEL_BINS
from caan.audiofront.models import Spectrogram
from caan.dataset.models import DEFAULT_DEVICE_NAMES
from caan.dataset.models import DEFAULT_SCENE_NAMES
from caan.dataset.models import ClipRecord
from caan.dataset.models import DatasetManifest
from caan.dataset.models import DeviceProfile
from caan.dataset.models import SceneProto
from caan.dataset.models import Split
from caan.exceptions import ContractError

from .manifest_service import load_spectrogram
from .manifest_service import write_manifest
from .spectrogram_io import write_spectrogram

logger = logging.getLogger(__name__)

BASE_LEVEL = -3.0
BAND_WIDTH = 6
BAND_LIFT = 1.0
MODULATION_DEPTH = 0.5
TONAL_MIX = 0.5
JITTER_STD = 0.5
NOISE_STD = 0.3
SPLIT_CODES = {Split.TRAIN: 0, Split.VALIDATION: 1, Split.TEST: 2}


def scene_names(classes: int) -> tuple[str, ...]:
    if classes <= len(DEFAULT_SCENE_NAMES):
        return DEFAULT_SCENE_NAMES[:classes]
    return tuple(f"scene_{k}" for k in range(classes))


def device_names(devices: int) -> tuple[str, ...]:
    if devices <= len(DEFAULT_DEVICE_NAMES):
        return DEFAULT_DEVICE_NAMES[:devices]
    return tuple(chr(ord("A") + n) if n < 26 else f"D{n}" for n in range(devices))  # noqa: PLR2004


def scene_templates(classes: int, seed: int, frames: int = CLIP_FRAMES, bins: int = MEL_BINS) -> list[SceneProto]:
    centres = np.rint(np.linspace(BAND_WIDTH // 2, bins - 1 - BAND_WIDTH // 2, classes)).astype(int)
    time = np.arange(frames) / frames
    protos = []
    for k, centre in enumerate(centres):
        rng = np.random.default_rng([seed, 7919, k])
        bands = tuple(range(max(centre - BAND_WIDTH // 2, 0), min(centre + BAND_WIDTH // 2, bins)))
        cycles = 1 + k % 4
        phase = float(rng.uniform(0, 2 * np.pi))
        envelope = BAND_LIFT * (1 + MODULATION_DEPTH * np.sin(2 * np.pi * cycles * time + phase))
        template = np.full((bins, frames), BASE_LEVEL)
        template[list(bands)] += envelope
        template[centre] += TONAL_MIX
        protos.append(
            SceneProto(
                scene=k,
                active_bands=bands,
                modulation_cycles=cycles,
                modulation_phase=phase,
                modulation_depth=MODULATION_DEPTH,
                tonal_mix=TONAL_MIX,
                template=template,
            ),
        )
    return protos


def default_profiles(devices: int, seed: int = 0, bins: int = MEL_BINS) -> list[DeviceProfile]:
    """
    A is the reference device. B loses 20% towards the high bins with a small noise
    floor; C loses 20% towards the low bins with a higher floor. Further devices draw
    their distortion from the seed.
    """
    ramp = np.linspace(0.0, 1.0, bins)
    profiles = [
        DeviceProfile("A", seed=seed),
        DeviceProfile("B", gain=0.8, tilt=1.0 - 0.2 * ramp, noise_floor=np.full(bins, 0.06), seed=seed),
        DeviceProfile("C", gain=1.1, tilt=0.8 + 0.2 * ramp, noise_floor=np.full(bins, 0.12), seed=seed),
    ]
    names = device_names(devices)
    for n in range(len(profiles), devices):
        rng = np.random.default_rng([seed, 104729, n])
        slope = rng.uniform(-0.3, 0.3)
        profiles.append(
            DeviceProfile(
                names[n],
                gain=float(rng.uniform(0.7, 1.3)),
                tilt=1.0 + slope * (ramp - 0.5),
                noise_floor=np.full(bins, rng.uniform(0.0, 0.15)),
                seed=seed,
            ),
        )
    return profiles[:devices]


def apply_profile(values: np.ndarray, profile: DeviceProfile) -> np.ndarray:
    """``log(gain·tilt·exp(x) + floor)``, written so the identity profile returns ``x`` exactly."""
    response = np.log(profile.gain) + np.log(profile.tilt)[:, None]
    shifted = values + response
    return shifted + np.log1p(profile.noise_floor[:, None] * np.exp(-shifted))


def generate_synthetic(  # noqa: PLR0913
    root: Path | str,
    classes: int = 10,
    devices: int = 3,
    clips_per_cell: int = 8,
    seed: int = 0,
    *,
    split: Split | str = Split.TRAIN,
    frames: int = CLIP_FRAMES,
    jitter_std: float = JITTER_STD,
    noise_std: float = NOISE_STD,
    profiles: list[DeviceProfile] | None = None,
) -> DatasetManifest:
    """Write ``classes·devices·clips_per_cell`` LMSP clips and ``<root>/<split>.csv``."""
    if classes < 1 or devices < 1 or clips_per_cell < 1 or frames < 1:
        msg = f"need at least one scene, device, clip and frame, got {classes}/{devices}/{clips_per_cell}/{frames}"
        raise ContractError(msg)
    split = Split(split)
    root = Path(root)
    profiles = profiles if profiles is not None else default_profiles(devices, seed)
    if len(profiles) != devices:
        msg = f"got {len(profiles)} device profiles for {devices} devices"
        raise ContractError(msg)
    templates = scene_templates(classes, seed, frames)

    records = []
    for k, proto in enumerate(templates):
        for n, profile in enumerate(profiles):
            for i in range(clips_per_cell):
                rng = np.random.default_rng([seed, SPLIT_CODES[split], k, n, i])
                jitter = rng.normal(0.0, jitter_std, size=(MEL_BINS, 1)) if jitter_std else 0.0
                noise = rng.normal(0.0, noise_std, size=proto.template.shape) if noise_std else 0.0
                values = apply_profile(proto.template + jitter + noise, profile)
                clip_id = f"{split}-s{k:02d}-d{n}-{i:03d}"
                path = write_spectrogram(Spectrogram(values), root / str(split) / f"{clip_id}.lmsp")
                records.append(ClipRecord(clip_id, k, n, path))

    manifest = DatasetManifest(records, scene_names(classes), tuple(p.name for p in profiles), split, root)
    write_manifest(manifest, root / f"{split}.csv")
    logger.info(f"Generated {len(records)} {split} clips ({classes} scenes x {devices} devices) in {root}")
    return manifest


@dataclass
class DeviceShiftReport:
    centroid_accuracy: dict[str, float]
    mean_level: dict[str, float]
    standard_error: dict[str, float]

    def lines(self) -> list[str]:
        return [
            f"device {name}: centroid accuracy {self.centroid_accuracy[name]:.3f}, "
            f"mean level {self.mean_level[name]:.4f} (s.e. {self.standard_error[name]:.4f})"
            for name in self.centroid_accuracy
        ]


def _clip_means(manifest: DatasetManifest) -> np.ndarray:
    return np.stack([load_spectrogram(record).values.mean(axis=1) for record in manifest.records])


def device_shift_report(manifest: DatasetManifest, reference: DatasetManifest | None = None) -> DeviceShiftReport:
    """
    Nearest-centroid scene accuracy per device, with centroids taken from the first
    device's clips, plus each device's global mean level and its standard error.
    """
    reference = reference if reference is not None else manifest
    reference_device = reference.filter(device=0)
    if not reference_device.records:
        msg = f"no clips of device {reference.device_names[0]} to build centroids from"
        raise ContractError(msg)
    ref_means = _clip_means(reference_device)
    ref_scenes = np.array([r.scene for r in reference_device.records])
    present = np.unique(ref_scenes)
    centroids = np.stack([ref_means[ref_scenes == k].mean(axis=0) for k in present])

    means = _clip_means(manifest)
    scenes = np.array([r.scene for r in manifest.records])
    device_ids = np.array([r.device for r in manifest.records])
    distances = ((means[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    predicted = present[distances.argmin(axis=1)]

    accuracy, level, error = {}, {}, {}
    for n, name in enumerate(manifest.device_names):
        selected = device_ids == n
        if not selected.any():
            continue
        accuracy[name] = float(np.mean(predicted[selected] == scenes[selected]))
        per_clip = means[selected].mean(axis=1)
        level[name] = float(per_clip.mean())
        error[name] = float(per_clip.std(ddof=1) / np.sqrt(per_clip.size)) if per_clip.size > 1 else 0.0
    return DeviceShiftReport(accuracy, level, error)
