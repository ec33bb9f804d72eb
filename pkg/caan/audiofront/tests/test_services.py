import numpy as np
import pytest
import soundfile as sf

from caan.audiofront.models import LOG_FLOOR
from caan.audiofront.models import SAMPLE_RATE
from caan.audiofront.models import WaveClip
from caan.audiofront.services import frame_count
from caan.audiofront.services import log_mel
from caan.audiofront.services import mel_filterbank
from caan.audiofront.services import power_frames
from caan.audiofront.services import read_wav
from caan.audiofront.services import resample_linear
from caan.audiofront.services import write_wav
from caan.exceptions import ContractError


def test_resample_same_rate_is_identity(rng):
    clip = WaveClip(rng.normal(size=1000), 22050)
    out = resample_linear(clip, 22050)
    np.testing.assert_array_equal(out.samples, clip.samples)
    assert out.samples is not clip.samples


@pytest.mark.parametrize(("source", "target"), [(48000, 44100), (16000, 44100), (44100, 8000)])
def test_resample_constant(source, target):
    out = resample_linear(WaveClip(np.full(source // 10, 0.25), source), target)
    assert out.sample_rate == target
    assert len(out) == (source // 10) * target // source
    np.testing.assert_allclose(out.samples, 0.25, atol=1e-15)


def test_resample_ramp():
    clip = WaveClip(np.arange(48000) / 48000, 48000)
    out = resample_linear(clip, SAMPLE_RATE)
    assert len(out) == SAMPLE_RATE
    ideal = np.arange(SAMPLE_RATE) / SAMPLE_RATE
    assert np.max(np.abs(out.samples - ideal)) < 1e-6  # noqa: PLR2004


def test_resample_rejects_bad_rate(rng):
    with pytest.raises(ContractError):
        resample_linear(WaveClip(rng.normal(size=10), 100), 0)


def test_empty_clip_rejected():
    with pytest.raises(ContractError):
        WaveClip(np.array([]), SAMPLE_RATE)


def test_ten_second_clip_shape(rng):
    spec = log_mel(WaveClip(rng.normal(scale=0.1, size=441_000), SAMPLE_RATE))
    assert spec.shape == (64, 320)


def test_silence_is_log_floor():
    spec = log_mel(WaveClip(np.zeros(2048 + 1376 * 3), SAMPLE_RATE))
    assert spec.shape == (64, 4)
    assert np.all(spec.values == np.float32(np.log(LOG_FLOOR)))


def test_frame_count_formula(rng):
    for length in rng.integers(2048, 500_000, size=20):
        direct = sum(1 for start in range(0, int(length) - 2048 + 1, 1376))
        assert frame_count(int(length)) == direct == (int(length) - 2048) // 1376 + 1
    assert frame_count(441_000) == 320  # noqa: PLR2004


def test_short_clip_rejected():
    with pytest.raises(ContractError):
        log_mel(WaveClip(np.zeros(2047), SAMPLE_RATE))


def test_wrong_rate_rejected():
    with pytest.raises(ContractError):
        log_mel(WaveClip(np.zeros(4096), 48000))


@pytest.mark.parametrize("band", [12, 24, 40, 56])
def test_sinusoid_peaks_in_its_band(band):
    centre = mel_filterbank().centers[band]
    time = np.arange(SAMPLE_RATE) / SAMPLE_RATE
    spec = log_mel(WaveClip(0.5 * np.sin(2 * np.pi * centre * time), SAMPLE_RATE))
    assert np.all(spec.values[:, 1:-1].argmax(axis=0) == band)


def test_scale_monotone(rng):
    samples = rng.normal(scale=0.05, size=2048 + 1376 * 5)
    quiet = log_mel(WaveClip(samples, SAMPLE_RATE)).values
    loud = log_mel(WaveClip(samples * 1.7, SAMPLE_RATE)).values
    assert np.all(loud >= quiet)


def test_power_spectrum_matches_direct_dft(rng):
    samples = rng.normal(size=2048 + 1376)
    spectra = power_frames(samples)
    frame = samples[1376 : 1376 + 2048] * np.hamming(2049)[:-1]
    n = np.arange(2048)
    for k in (0, 1, 100, 1024):
        direct = abs(np.sum(frame * np.exp(-2j * np.pi * k * n / 2048))) ** 2
        assert spectra[1, k] == pytest.approx(direct, rel=1e-6, abs=1e-6)


def test_filterbank_shape_and_partition():
    bank = mel_filterbank()
    assert bank.weights.shape == (64, 1025)
    assert np.all(bank.weights >= 0)
    assert np.all(bank.weights.max(axis=1) > 0)
    freqs = np.arange(1025) * SAMPLE_RATE / 2048
    inside = (freqs >= bank.centers[0]) & (freqs <= bank.centers[-1])
    assert np.all(bank.weights[:, inside].sum(axis=0) > 0)
    for row in bank.weights:
        nonzero = np.flatnonzero(row)
        peak = row.argmax()
        assert np.all(np.diff(row[nonzero[0] : peak + 1]) >= 0)
        assert np.all(np.diff(row[peak : nonzero[-1] + 1]) <= 0)


def test_wav_round_trip(tmp_path):
    clip = WaveClip(np.linspace(-0.5, 0.5, 4410), SAMPLE_RATE)
    path = write_wav(clip, tmp_path / "clip.wav")
    loaded = read_wav(path)
    assert loaded.sample_rate == SAMPLE_RATE
    np.testing.assert_allclose(loaded.samples, clip.samples, atol=1 / 32768)


def test_stereo_is_averaged(tmp_path):
    left = np.full(100, 8192, dtype=np.int16)
    right = np.full(100, -4096, dtype=np.int16)
    sf.write(tmp_path / "stereo.wav", np.stack([left, right], axis=1), 48000, subtype="PCM_16")
    loaded = read_wav(tmp_path / "stereo.wav")
    assert loaded.sample_rate == 48000  # noqa: PLR2004
    np.testing.assert_array_equal(loaded.samples, np.full(100, 2048 / 32768))
