import logging
import math
from collections import defaultdict

import numpy as np

from caan.dataset.models import ClipRecord
from caan.dataset.models import DatasetManifest
from caan.dataset.models import Split
from caan.exceptions import ContractError
from caan.exceptions import ValidationError

logger = logging.getLogger(__name__)

_EPSILON = 1e-9


def _share(count: int, fraction: float) -> int:
    return math.floor(count * fraction + _EPSILON)


def split(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """
    Stratified train/validation/test split per (scene, device) cell.

    Validation and test take ``floor(n·f)`` records of each cell. Train takes the rest
    when the fractions sum to one, ``floor(n·f_train)`` otherwise.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or sum(fractions) > 1 + _EPSILON:  # noqa: PLR2004
        msg = f"fractions must be three non-negative numbers summing to at most 1, got {fractions}"
        raise ContractError(msg)
    f_train, f_val, f_test = fractions
    complete = abs(sum(fractions) - 1) <= _EPSILON

    cells: dict[tuple[int, int], list[ClipRecord]] = defaultdict(list)
    for record in manifest.records:
        cells[record.cell].append(record)

    parts: dict[Split, list[ClipRecord]] = {Split.TRAIN: [], Split.VALIDATION: [], Split.TEST: []}
    for cell in sorted(cells):
        records = sorted(cells[cell], key=lambda r: r.clip_id)
        order = np.random.default_rng([seed, *cell]).permutation(len(records))
        shuffled = [records[i] for i in order]
        n = len(shuffled)
        n_val, n_test = _share(n, f_val), _share(n, f_test)
        n_train = n - n_val - n_test if complete else _share(n, f_train)
        for name, fraction, count in (
            (Split.TRAIN, f_train, n_train),
            (Split.VALIDATION, f_val, n_val),
            (Split.TEST, f_test, n_test),
        ):
            if fraction > 0 and count == 0:
                msg = (
                    f"cell (scene {cell[0]}, device {cell[1]}) has {n} records, "
                    f"too few for a {fraction:g} {name} share"
                )
                raise ValidationError(msg)
        parts[Split.TRAIN].extend(shuffled[:n_train])
        parts[Split.VALIDATION].extend(shuffled[n_train : n_train + n_val])
        parts[Split.TEST].extend(shuffled[n_train + n_val : n_train + n_val + n_test])

    logger.info(
        f"Split {len(manifest)} records into "
        f"{len(parts[Split.TRAIN])}/{len(parts[Split.VALIDATION])}/{len(parts[Split.TEST])}",
    )
    return (
        manifest.with_records(parts[Split.TRAIN], Split.TRAIN),
        manifest.with_records(parts[Split.VALIDATION], Split.VALIDATION),
        manifest.with_records(parts[Split.TEST], Split.TEST),
    )


def carve_validation(
    manifest: DatasetManifest,
    fraction: float = 0.1,
    seed: int = 0,
) -> tuple[DatasetManifest, DatasetManifest]:
    """
    Hold out part of a training manifest for monitoring.

    Each cell with at least two records gives ``max(1, floor(n·fraction))`` of them to
    validation; single-record cells stay in train. Returns ``(train, validation)``.
    """
    if not 0 < fraction < 1:
        msg = f"validation fraction must be in (0, 1), got {fraction}"
        raise ContractError(msg)
    cells: dict[tuple[int, int], list[ClipRecord]] = defaultdict(list)
    for record in manifest.records:
        cells[record.cell].append(record)
    kept: list[ClipRecord] = []
    held: list[ClipRecord] = []
    for cell in sorted(cells):
        records = sorted(cells[cell], key=lambda r: r.clip_id)
        if len(records) < 2:  # noqa: PLR2004
            kept.extend(records)
            continue
        order = np.random.default_rng([seed, *cell]).permutation(len(records))
        count = max(1, _share(len(records), fraction))
        held.extend(records[i] for i in order[:count])
        kept.extend(records[i] for i in order[count:])
    logger.info(f"Held out {len(held)} of {len(manifest)} training records for validation")
    return manifest.with_records(kept, Split.TRAIN), manifest.with_records(held, Split.VALIDATION)
