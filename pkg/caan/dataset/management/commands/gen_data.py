from pathlib import Path

from django.conf import settings

from caan.commands import CaanCommand
from caan.commands import positive_int
from caan.dataset.models import Split
from caan.dataset.services.generator import device_shift_report
from caan.dataset.services.generator import generate_synthetic


class Command(CaanCommand):
    help = "Write a synthetic scene/device dataset and report how far each device drifts."

    def add_arguments(self, parser):
        parser.add_argument("--out", type=Path, help="dataset directory (default: DATA_ROOT)")
        parser.add_argument("--classes", type=positive_int, default=10)
        parser.add_argument("--devices", type=positive_int, default=3)
        parser.add_argument("--train-clips", type=positive_int, default=8, help="clips per scene/device cell")
        parser.add_argument("--validation-clips", type=int, default=0)
        parser.add_argument("--test-clips", type=int, default=3)
        parser.add_argument("--frames", type=positive_int, default=320)
        parser.add_argument("--seed", type=int)

    def handle(self, *args, **options):
        root = options["out"] or Path(settings.DATA_ROOT)
        seed = options["seed"] if options["seed"] is not None else settings.DEFAULT_SEED
        counts = {
            Split.TRAIN: options["train_clips"],
            Split.VALIDATION: options["validation_clips"],
            Split.TEST: options["test_clips"],
        }
        manifests = {
            split: generate_synthetic(
                root,
                options["classes"],
                options["devices"],
                clips,
                seed,
                split=split,
                frames=options["frames"],
            )
            for split, clips in counts.items()
            if clips
        }
        train = manifests[Split.TRAIN]
        self.write_lines(device_shift_report(manifests.get(Split.TEST, train), train).lines())
