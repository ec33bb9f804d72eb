import pytest

from caan.dataset.models import DatasetManifest
from caan.dataset.services.splits import carve_validation
from caan.dataset.services.splits import split
from caan.dataset.tests.factories import cell_records
from caan.exceptions import ContractError
from caan.exceptions import ValidationError


@pytest.fixture
def manifest() -> DatasetManifest:
    return DatasetManifest(cell_records(30))


def test_all_in_train(manifest):
    train, validation, test = split(manifest, (1.0, 0.0, 0.0), seed=3)
    assert len(train) == len(manifest)
    assert len(validation) == len(test) == 0


def test_per_cell_counts(manifest):
    train, validation, test = split(manifest, (0.8, 0.1, 0.1), seed=3)
    for part, expected in ((train, 24), (validation, 3), (test, 3)):
        counts = part.cell_counts()
        assert len(counts) == 30  # noqa: PLR2004
        assert set(counts.values()) == {expected}


def test_union_and_disjointness(manifest):
    train, validation, test = split(manifest, (0.8, 0.1, 0.1), seed=11)
    parts = [{r.clip_id for r in part} for part in (train, validation, test)]
    assert parts[0] | parts[1] | parts[2] == {r.clip_id for r in manifest}
    assert not parts[0] & parts[1]
    assert not parts[0] & parts[2]
    assert not parts[1] & parts[2]
    assert [train.split, validation.split, test.split] == ["train", "validation", "test"]


def test_deterministic_under_seed(manifest):
    first = split(manifest, (0.6, 0.2, 0.2), seed=5)
    second = split(manifest, (0.6, 0.2, 0.2), seed=5)
    assert [[r.clip_id for r in part] for part in first] == [[r.clip_id for r in part] for part in second]


def test_seed_changes_assignment(manifest):
    first = split(manifest, (0.6, 0.2, 0.2), seed=5)[1]
    second = split(manifest, (0.6, 0.2, 0.2), seed=6)[1]
    assert {r.clip_id for r in first} != {r.clip_id for r in second}


def test_partial_fractions_leave_records_out(manifest):
    train, validation, test = split(manifest, (0.5, 0.1, 0.1), seed=0)
    assert set(train.cell_counts().values()) == {15}
    assert len(train) + len(validation) + len(test) == len(manifest) * 7 // 10


def test_cell_too_small():
    with pytest.raises(ValidationError, match="too few"):
        split(DatasetManifest(cell_records(5)), (0.8, 0.1, 0.1))


@pytest.mark.parametrize("fractions", [(0.8, 0.3, 0.1), (-0.1, 0.5, 0.5), (1.0, 0.0)])
def test_invalid_fractions(manifest, fractions):
    with pytest.raises(ContractError):
        split(manifest, fractions)


def test_carve_validation_per_cell(manifest):
    train, validation = carve_validation(manifest, 0.1, seed=2)
    assert set(validation.cell_counts().values()) == {3}
    assert set(train.cell_counts().values()) == {27}
    assert {r.clip_id for r in train} | {r.clip_id for r in validation} == {r.clip_id for r in manifest}
    assert not {r.clip_id for r in train} & {r.clip_id for r in validation}
    assert validation.split == "validation"


def test_carve_validation_keeps_small_cells_in_train():
    manifest = DatasetManifest(cell_records(1, classes=2, devices=2) + cell_records(3, classes=1, devices=1))
    train, validation = carve_validation(manifest, 0.1)
    # cell (0, 0) is the only one with more than one record
    assert len(validation) == 1
    assert validation.records[0].cell == (0, 0)
    assert len(train) == len(manifest) - 1


def test_carve_validation_is_deterministic(manifest):
    first = carve_validation(manifest, 0.2, seed=1)[1]
    second = carve_validation(manifest, 0.2, seed=1)[1]
    assert [r.clip_id for r in first] == [r.clip_id for r in second]


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.5])
def test_carve_validation_fraction(manifest, fraction):
    with pytest.raises(ContractError):
        carve_validation(manifest, fraction)
