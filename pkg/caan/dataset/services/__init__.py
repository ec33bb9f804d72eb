from .generator import default_profiles
from .generator import device_shift_report
from .generator import generate_synthetic
from .manifest_service import check_disjoint
from .manifest_service import load_manifest
from .manifest_service import load_spectrogram
from .manifest_service import write_manifest
from .spectrogram_io import read_spectrogram
from .spectrogram_io import write_spectrogram
from .splits import carve_validation
from .splits import split

__all__ = [
    "carve_validation",
    "check_disjoint",
    "default_profiles",
    "device_shift_report",
    "generate_synthetic",
    "load_manifest",
    "load_spectrogram",
    "read_spectrogram",
    "split",
    "write_manifest",
    "write_spectrogram",
]
