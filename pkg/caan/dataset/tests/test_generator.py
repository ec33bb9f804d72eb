import numpy as np
import pytest

from caan.dataset.models import DeviceProfile
from caan.dataset.services.generator import apply_profile
from caan.dataset.services.generator import default_profiles
from caan.dataset.services.generator import device_shift_report
from caan.dataset.services.generator import generate_synthetic
from caan.dataset.services.generator import scene_templates
from caan.dataset.services.manifest_service import load_manifest
from caan.dataset.services.manifest_service import load_spectrogram
from caan.exceptions import ContractError
from caan.exceptions import DatasetIOError
from caan.exceptions import ValidationError


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_same_seed_gives_identical_directories(tmp_path):
    generate_synthetic(tmp_path / "one", classes=3, devices=2, clips_per_cell=2, seed=4, frames=16)
    generate_synthetic(tmp_path / "two", classes=3, devices=2, clips_per_cell=2, seed=4, frames=16)
    assert _tree(tmp_path / "one") == _tree(tmp_path / "two")


def test_balanced_cells_and_layout(tmp_path):
    manifest = generate_synthetic(tmp_path, classes=4, devices=3, clips_per_cell=3, seed=1, frames=8, split="test")
    assert len(manifest) == 4 * 3 * 3
    assert set(manifest.cell_counts().values()) == {3}
    assert (tmp_path / "test.csv").exists()
    assert (tmp_path / "test" / "test-s00-d0-000.lmsp").exists()
    reloaded = load_manifest(tmp_path / "test.csv")
    assert reloaded.records == manifest.records
    assert load_spectrogram(reloaded.records[0], (64, 8)).shape == (64, 8)


def test_noise_free_identity_clips_equal_template(tmp_path):
    manifest = generate_synthetic(
        tmp_path,
        classes=2,
        devices=1,
        clips_per_cell=3,
        seed=9,
        frames=20,
        jitter_std=0.0,
        noise_std=0.0,
    )
    templates = scene_templates(2, seed=9, frames=20)
    for record in manifest:
        values = load_spectrogram(record).values
        np.testing.assert_array_equal(values, templates[record.scene].template.astype(np.float32))


def test_templates_are_distinct():
    templates = scene_templates(10, seed=0, frames=32)
    bands = [set(t.active_bands) for t in templates]
    for i in range(10):
        assert bands[i]
        for j in range(i + 1, 10):
            assert not bands[i] & bands[j]
            assert not np.array_equal(templates[i].template, templates[j].template)


def test_identity_profile_is_exact(rng):
    values = rng.normal(size=(64, 5))
    np.testing.assert_array_equal(apply_profile(values, DeviceProfile("A")), values)


def test_default_profiles_are_valid():
    profiles = default_profiles(5)
    assert [p.name for p in profiles[:3]] == ["A", "B", "C"]
    assert profiles[0].is_identity
    for profile in profiles:
        assert profile.gain > 0
        assert np.all(profile.tilt > 0)


def test_profile_rejects_non_positive_tilt():
    with pytest.raises(ValidationError):
        DeviceProfile("X", tilt=np.zeros(64))


def test_device_shift_is_learnable_but_real(tmp_path):
    manifest = generate_synthetic(tmp_path, classes=10, devices=3, clips_per_cell=10, seed=0, frames=64)
    report = device_shift_report(manifest)
    accuracy = report.centroid_accuracy
    assert accuracy["A"] >= 0.8  # noqa: PLR2004
    assert accuracy["B"] < accuracy["A"]
    assert accuracy["C"] < accuracy["A"]
    names = list(report.mean_level)
    for i, first in enumerate(names):
        for second in names[i + 1 :]:
            gap = abs(report.mean_level[first] - report.mean_level[second])
            assert gap > max(report.standard_error[first], report.standard_error[second])


def test_rejects_empty_grid(tmp_path):
    with pytest.raises(ContractError):
        generate_synthetic(tmp_path, classes=0)


def test_unwritable_root(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    with pytest.raises(DatasetIOError):
        generate_synthetic(blocker, classes=1, devices=1, clips_per_cell=1, frames=4)
