from io import StringIO

import numpy as np
import pytest
from django.core.management import call_command

from caan.dataset.services.generator import generate_synthetic
from caan.trainer.tests.factories import CLASSES
from caan.trainer.tests.factories import DEVICES
from caan.trainer.tests.factories import FRAMES


@pytest.fixture(autouse=True)
def _data_root(settings, tmp_path) -> None:
    settings.DATA_ROOT = tmp_path / "data"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20190311)


@pytest.fixture
def corpus(tmp_path):
    """Train, validation and test splits of a small synthetic corpus on disk."""
    root = tmp_path / "corpus"
    return {
        split: generate_synthetic(root, CLASSES, DEVICES, clips, seed=0, split=split, frames=FRAMES)
        for split, clips in (("train", 6), ("validation", 2), ("test", 2))
    }


@pytest.fixture
def command_output():
    """Run a management command and return what it wrote to stdout."""

    def run(name: str, *args: str) -> str:
        out = StringIO()
        call_command(name, *args, stdout=out)
        return out.getvalue()

    return run
