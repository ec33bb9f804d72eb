"""
``LMSP`` spectrogram files: ``b"LMSP"``, then version, ``F`` and ``T`` as ``u32``
little-endian, then ``F·T`` float32-LE values, frequency-major.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from caan.audiofront.models import Spectrogram
from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError
from caan.exceptions import TruncatedPayloadError

logger = logging.getLogger(__name__)

MAGIC = b"LMSP"
VERSION = 1
# one hour of frames at hop 1376 is well under this
MAX_DIMENSION = 1 << 20
_HEADER = struct.Struct("<4sIII")


def encode_spectrogram(spec: Spectrogram) -> bytes:
    rows, cols = spec.shape
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + np.ascontiguousarray(spec.values, dtype="<f4").tobytes()


def decode_spectrogram(payload: bytes, source: str = "<bytes>") -> Spectrogram:
    if len(payload) < len(MAGIC) or payload[:4] != MAGIC:
        msg = f"{source}: bad magic {payload[:4]!r}, expected {MAGIC!r}"
        raise FormatError(msg)
    if len(payload) < _HEADER.size:
        msg = f"{source}: header ends after {len(payload)} bytes"
        raise TruncatedPayloadError(msg)
    _, version, rows, cols = _HEADER.unpack_from(payload)
    if version != VERSION:
        msg = f"{source}: unsupported LMSP version {version}"
        raise FormatError(msg)
    if not 0 < rows <= MAX_DIMENSION or not 0 < cols <= MAX_DIMENSION:
        msg = f"{source}: dimension overflow in header ({rows}x{cols})"
        raise FormatError(msg)
    expected = _HEADER.size + 4 * rows * cols
    if len(payload) < expected:
        got = len(payload) - _HEADER.size
        msg = f"{source}: header claims {rows}x{cols} but payload has {got} of {4 * rows * cols} bytes"
        raise TruncatedPayloadError(msg)
    if len(payload) > expected:
        msg = f"{source}: {len(payload) - expected} trailing bytes after payload"
        raise FormatError(msg)
    values = np.frombuffer(payload, dtype="<f4", count=rows * cols, offset=_HEADER.size)
    return Spectrogram(values.astype(np.float32).reshape(rows, cols))


def write_spectrogram(spec: Spectrogram, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_spectrogram(spec))
    except OSError as exc:
        msg = f"cannot write spectrogram {path}: {exc}"
        raise DatasetIOError(msg) from exc
    return path


def read_spectrogram(path: Path | str) -> Spectrogram:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        msg = f"cannot read spectrogram {path}: {exc}"
        raise DatasetIOError(msg) from exc
    return decode_spectrogram(payload, str(path))
