from pathlib import Path

from celery import shared_task

from caan.dataset.services.spectrogram_io import write_spectrogram

from .services import wav_to_spectrogram


@shared_task()
def extract_features(wav_path: str, out_path: str) -> dict:
    """Convert one WAV file into an LMSP spectrogram."""
    spec = wav_to_spectrogram(wav_path)
    write_spectrogram(spec, out_path)
    return {"path": str(Path(out_path)), "frames": spec.frames}
