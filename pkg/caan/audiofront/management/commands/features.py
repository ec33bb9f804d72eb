from dataclasses import replace
from pathlib import Path

from caan.audiofront.tasks import extract_features
from caan.commands import CaanCommand
from caan.dataset.services.manifest_service import load_manifest
from caan.dataset.services.manifest_service import write_manifest


class Command(CaanCommand):
    help = "Turn the WAV clips of a manifest into log-mel spectrograms."

    def add_arguments(self, parser):
        parser.add_argument("--manifest", type=Path, required=True, help="manifest whose paths point at WAV files")
        parser.add_argument("--out", type=Path, required=True)

    def handle(self, *args, **options):
        manifest = load_manifest(options["manifest"])
        out: Path = options["out"]
        clip_dir = out / str(manifest.split)
        pending = [
            (record, extract_features.delay(str(record.path), str(clip_dir / f"{record.clip_id}.lmsp")))
            for record in manifest.records
        ]
        records = [replace(record, path=Path(result.get()["path"])) for record, result in pending]
        path = write_manifest(manifest.with_records(records, manifest.split), out / f"{manifest.split}.csv")
        self.stdout.write(f"wrote {len(records)} spectrograms and {path}")
