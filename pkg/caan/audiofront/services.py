"""
Waveform to log-mel conversion.

Frames of 2048 samples with a 672-sample overlap (hop 1376) are Hamming windowed,
turned into power spectra with a real FFT and projected onto 64 HTK mel bands
spanning 0 Hz to Nyquist. A 10 s clip at 44.1 kHz yields 320 frames; the last
partial frame is dropped.
"""

import logging
from functools import lru_cache
from pathlib import Path

import librosa
import numpy as np
import soundfile as sf
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from caan.audiofront.models import LOG_FLOOR
from caan.audiofront.models import MEL_BINS
from caan.audiofront.models import OVERLAP
from caan.audiofront.models import SAMPLE_RATE
from caan.audiofront.models import WINDOW
from caan.audiofront.models import MelFilterbank
from caan.audiofront.models import Spectrogram
from caan.audiofront.models import WaveClip
from caan.exceptions import ContractError
from caan.exceptions import DatasetIOError
from caan.exceptions import FormatError

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0


def resample_linear(clip: WaveClip, target_rate: int) -> WaveClip:
    if target_rate <= 0:
        msg = f"target rate must be positive, got {target_rate}"
        raise ContractError(msg)
    if target_rate == clip.sample_rate:
        return WaveClip(clip.samples.copy(), target_rate)
    length = len(clip) * target_rate // clip.sample_rate
    if length == 0:
        msg = f"{len(clip)} samples at {clip.sample_rate} Hz leave nothing at {target_rate} Hz"
        raise ContractError(msg)
    positions = np.arange(length) * (clip.sample_rate / target_rate)
    samples = np.interp(positions, np.arange(len(clip)), clip.samples)
    return WaveClip(samples, target_rate)


@lru_cache(maxsize=8)
def _mel_weights(sample_rate: int, nfft: int, bands: int) -> tuple[np.ndarray, np.ndarray]:
    weights = librosa.filters.mel(
        sr=sample_rate,
        n_fft=nfft,
        n_mels=bands,
        fmin=0.0,
        fmax=sample_rate / 2,
        htk=True,
        norm=None,
        dtype=np.float64,
    )
    centers = librosa.mel_frequencies(n_mels=bands + 2, fmin=0.0, fmax=sample_rate / 2, htk=True)[1:-1]
    weights.setflags(write=False)
    centers.setflags(write=False)
    return weights, centers


def mel_filterbank(sample_rate: int = SAMPLE_RATE, nfft: int = WINDOW, bands: int = MEL_BINS) -> MelFilterbank:
    weights, centers = _mel_weights(sample_rate, nfft, bands)
    return MelFilterbank(weights=weights, sample_rate=sample_rate, nfft=nfft, centers=centers)


def frame_count(length: int, window: int = WINDOW, overlap: int = OVERLAP) -> int:
    if length < window:
        return 0
    return (length - window) // (window - overlap) + 1


def power_frames(samples: np.ndarray, window: int = WINDOW, overlap: int = OVERLAP) -> np.ndarray:
    """Power spectra of the Hamming-windowed frames, ``T × (window/2 + 1)``."""
    hop = window - overlap
    frames = sliding_window_view(samples, window)[::hop]
    taper = signal.get_window("hamming", window)
    return np.abs(np.fft.rfft(frames * taper, n=window, axis=1)) ** 2


def log_mel(  # noqa: PLR0913
    clip: WaveClip,
    window: int = WINDOW,
    overlap: int = OVERLAP,
    mel_bins: int = MEL_BINS,
    floor: float = LOG_FLOOR,
) -> Spectrogram:
    if clip.sample_rate != SAMPLE_RATE:
        msg = f"log-mel features need {SAMPLE_RATE} Hz audio, got {clip.sample_rate} Hz; resample first"
        raise ContractError(msg)
    if len(clip) < window:
        msg = f"clip of {len(clip)} samples is shorter than one {window}-sample window"
        raise ContractError(msg)
    if not 0 <= overlap < window:
        msg = f"overlap must be in [0, {window}), got {overlap}"
        raise ContractError(msg)
    bank = mel_filterbank(clip.sample_rate, window, mel_bins)
    mel_power = bank.weights @ power_frames(clip.samples, window, overlap).T
    return Spectrogram(np.log(np.maximum(mel_power, floor)))


def read_wav(path: Path | str) -> WaveClip:
    """Read 16-bit PCM audio, averaging channels to mono and scaling to [-1, 1)."""
    try:
        samples, rate = sf.read(path, dtype="int16", always_2d=True)
    except OSError as exc:
        msg = f"cannot read {path}: {exc}"
        raise DatasetIOError(msg) from exc
    except RuntimeError as exc:
        msg = f"{path} is not a readable WAV file: {exc}"
        raise FormatError(msg) from exc
    mono = samples.astype(np.float64).mean(axis=1) / PCM16_SCALE
    return WaveClip(mono, int(rate))


def write_wav(clip: WaveClip, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(path, np.clip(clip.samples, -1.0, 1.0 - 1.0 / PCM16_SCALE), clip.sample_rate, subtype="PCM_16")
    except (OSError, RuntimeError) as exc:
        msg = f"cannot write {path}: {exc}"
        raise DatasetIOError(msg) from exc
    return path


def wav_to_spectrogram(path: Path | str) -> Spectrogram:
    clip = read_wav(path)
    if clip.sample_rate != SAMPLE_RATE:
        logger.debug(f"Resampling {path} from {clip.sample_rate} Hz")
        clip = resample_linear(clip, SAMPLE_RATE)
    return log_mel(clip)
