"""
Batch production for the training loop.

Batches follow a seeded shuffle of the training clips, one permutation per epoch,
cut into consecutive ``batch_size`` chunks that may straddle epoch boundaries. A
producer thread can prepare them ahead of time through a bounded queue; the order
is the same either way.
"""

import logging
import queue
import threading
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from caan.dataset.models import DatasetManifest
from caan.dataset.services.manifest_service import load_spectrogram
from caan.exceptions import ContractError
from caan.trainer.models import Normalizer

logger = logging.getLogger(__name__)

_DONE = object()


@dataclass(frozen=True)
class Batch:
    index: int
    clip_ids: tuple[str, ...]
    inputs: tuple[np.ndarray, ...]
    scenes: tuple[int, ...]
    devices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.clip_ids)


class SpectrogramCache:
    """Inputs of a manifest, read once, shape-checked and normalised on request."""

    def __init__(self, manifest: DatasetManifest, shape: tuple[int, int] | None = None) -> None:
        if not manifest.records:
            msg = f"{manifest.split} split is empty"
            raise ContractError(msg)
        if shape is None:
            shape = load_spectrogram(manifest.records[0]).shape
        self.shape: tuple[int, int] = tuple(shape)
        self.raw = {record.clip_id: load_spectrogram(record, self.shape).values for record in manifest.records}
        self.inputs = dict(self.raw)

    def __getitem__(self, clip_id: str) -> np.ndarray:
        return self.inputs[clip_id]

    def __len__(self) -> int:
        return len(self.raw)

    def fit(self) -> Normalizer:
        return Normalizer.fit(list(self.raw.values()))

    def normalise(self, normalizer: Normalizer) -> "SpectrogramCache":
        self.inputs = {clip_id: normalizer.apply(values) for clip_id, values in self.raw.items()}
        return self


class BatchLoader:
    def __init__(  # noqa: PLR0913
        self,
        manifest: DatasetManifest,
        cache: SpectrogramCache,
        batch_size: int,
        iterations: int,
        seed: int = 0,
        prefetch: int = 0,
    ) -> None:
        if not manifest.records:
            msg = f"{manifest.split} split is empty"
            raise ContractError(msg)
        self.records = sorted(manifest.records, key=lambda r: r.clip_id)
        self.cache = cache
        self.batch_size = batch_size
        self.iterations = iterations
        self.seed = seed
        self.prefetch = prefetch
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _order(self) -> Iterator[int]:
        epoch = 0
        while True:
            yield from np.random.default_rng([self.seed, epoch]).permutation(len(self.records))
            epoch += 1

    def batches(self) -> Iterator[Batch]:
        order = self._order()
        for index in range(self.iterations):
            chosen = [self.records[next(order)] for _ in range(self.batch_size)]
            yield Batch(
                index=index,
                clip_ids=tuple(r.clip_id for r in chosen),
                inputs=tuple(self.cache[r.clip_id] for r in chosen),
                scenes=tuple(r.scene for r in chosen),
                devices=tuple(r.device for r in chosen),
            )

    def _produce(self, buffer: queue.Queue) -> None:
        try:
            for batch in self.batches():
                while not self._stop.is_set():
                    try:
                        buffer.put(batch, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if self._stop.is_set():
                    return
        except Exception as exc:  # noqa: BLE001
            buffer.put(exc)
            return
        buffer.put(_DONE)

    def __iter__(self) -> Iterator[Batch]:
        if self.prefetch <= 0:
            yield from self.batches()
            return
        buffer: queue.Queue = queue.Queue(maxsize=self.prefetch)
        self._stop.clear()
        self._thread = threading.Thread(target=self._produce, args=(buffer,), name="caan-batch-loader", daemon=True)
        self._thread.start()
        try:
            while True:
                item = buffer.get()
                if item is _DONE:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=1.0)
            self._thread = None
