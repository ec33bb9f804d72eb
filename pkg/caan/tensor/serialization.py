"""
Named-tensor files in the ``CAAN`` binary format.

Layout (all integers ``u32`` little-endian)::

    b"CAAN" version
    repeated until EOF:
        name_length name(UTF-8) rank dims[rank] float32-LE[prod(dims)]
"""

import logging
import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError
from caan.exceptions import TruncatedPayloadError
from caan.tensor.models import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"CAAN"
VERSION = 1
MAX_RANK = 8
MAX_ELEMENTS = 1 << 31
_U32 = struct.Struct("<I")


def encode_tensors(tensors: Mapping[str, Tensor | np.ndarray]) -> bytes:
    chunks = [MAGIC, _U32.pack(VERSION)]
    for name, value in tensors.items():
        array = value.data if isinstance(value, Tensor) else np.asarray(value)
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.extend(_U32.pack(dim) for dim in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, payload: bytes) -> None:
        self.payload = payload
        self.offset = 0

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.payload)

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.payload):
            msg = f"payload ends inside {what} at byte {self.offset}"
            raise TruncatedPayloadError(msg)
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_tensors(payload: bytes) -> dict[str, np.ndarray]:
    reader = _Reader(payload)
    if len(payload) < len(MAGIC) or payload[: len(MAGIC)] != MAGIC:
        msg = f"bad magic {payload[:4]!r}, expected {MAGIC!r}"
        raise FormatError(msg)
    reader.take(len(MAGIC), "magic")
    version = reader.u32("version")
    if version != VERSION:
        msg = f"unsupported CAAN version {version}"
        raise FormatError(msg)

    arrays: dict[str, np.ndarray] = {}
    while not reader.exhausted:
        name_length = reader.u32("name length")
        try:
            name = reader.take(name_length, "record name").decode("utf-8")
        except UnicodeDecodeError as exc:
            msg = f"record name is not valid UTF-8: {exc}"
            raise FormatError(msg) from exc
        rank = reader.u32(f"rank of '{name}'")
        if rank > MAX_RANK:
            msg = f"record '{name}' declares rank {rank}"
            raise FormatError(msg)
        shape = tuple(reader.u32(f"dims of '{name}'") for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64))
        if count > MAX_ELEMENTS:
            msg = f"record '{name}' declares {count} elements, dimension overflow"
            raise FormatError(msg)
        if name in arrays:
            msg = f"duplicate record '{name}'"
            raise FormatError(msg)
        data = reader.take(4 * count, f"data of '{name}'")
        arrays[name] = np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(shape)
    return arrays


def save_tensors(tensors: Mapping[str, Tensor | np.ndarray], path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_tensors(tensors))
    except OSError as exc:
        msg = f"cannot write model file {path}: {exc}"
        raise DatasetIOError(msg) from exc
    logger.debug(f"Wrote {len(tensors)} tensors to {path}")
    return path


def load_tensors(path: Path | str) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        msg = f"cannot read model file {path}: {exc}"
        raise DatasetIOError(msg) from exc
    return decode_tensors(payload)
