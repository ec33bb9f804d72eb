import struct

import numpy as np
import pytest

from caan.audiofront.models import Spectrogram
from caan.dataset.services.spectrogram_io import decode_spectrogram
from caan.dataset.services.spectrogram_io import encode_spectrogram
from caan.dataset.services.spectrogram_io import read_spectrogram
from caan.dataset.services.spectrogram_io import write_spectrogram
from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError
from caan.exceptions import TruncatedPayloadError


def test_round_trip_is_bit_exact(tmp_path, rng):
    spec = Spectrogram(rng.normal(size=(64, 320)))
    path = write_spectrogram(spec, tmp_path / "clip.lmsp")
    loaded = read_spectrogram(path)
    assert loaded.shape == (64, 320)
    assert loaded.values.tobytes() == spec.values.tobytes()


def test_header_layout(rng):
    payload = encode_spectrogram(Spectrogram(rng.normal(size=(64, 3))))
    assert payload[:4] == b"LMSP"
    assert struct.unpack("<III", payload[4:16]) == (1, 64, 3)
    assert len(payload) == 16 + 64 * 3 * 4


def test_wrong_magic(rng):
    payload = encode_spectrogram(Spectrogram(rng.normal(size=(64, 2))))
    with pytest.raises(FormatError):
        decode_spectrogram(b"XXXX" + payload[4:])


def test_short_payload(rng):
    payload = encode_spectrogram(Spectrogram(rng.normal(size=(64, 320))))
    with pytest.raises(TruncatedPayloadError):
        decode_spectrogram(payload[:-1])


def test_truncation_is_a_format_error():
    assert issubclass(TruncatedPayloadError, FormatError)


@pytest.mark.parametrize(("rows", "cols"), [(0, 320), (64, 0), (64, 0xFFFFFFFF)])
def test_dimension_overflow(rows, cols):
    with pytest.raises(FormatError):
        decode_spectrogram(b"LMSP" + struct.pack("<III", 1, rows, cols))


def test_missing_file(tmp_path):
    with pytest.raises(DatasetIOError):
        read_spectrogram(tmp_path / "absent.lmsp")


def test_values_stay_float32(tmp_path):
    spec = Spectrogram(np.full((64, 4), np.log(1e-10)))
    loaded = read_spectrogram(write_spectrogram(spec, tmp_path / "floor.lmsp"))
    assert loaded.values.dtype == np.float32
    assert np.all(loaded.values == np.float32(np.log(1e-10)))
