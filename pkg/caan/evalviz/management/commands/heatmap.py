import argparse
from pathlib import Path

from caan.commands import CaanCommand
from caan.dataset.services.manifest_service import load_manifest
from caan.evalviz.heatmap import PREDICTED
from caan.evalviz.heatmap import export_clip_heatmap
from caan.exceptions import ValidationError
from caan.trainer.services import load_result


def class_choice(value: str) -> int | str:
    if value == PREDICTED:
        return value
    try:
        return int(value)
    except ValueError as exc:
        msg = f"--class takes '{PREDICTED}' or a class index, got '{value}'"
        raise argparse.ArgumentTypeError(msg) from exc


class Command(CaanCommand):
    help = "Export attention heat maps (PGM plus CSV) for clips of a manifest."

    def add_arguments(self, parser):
        parser.add_argument("--model", type=Path, required=True)
        parser.add_argument("--manifest", type=Path, required=True)
        parser.add_argument("--clip", action="append", required=True, help="clip id; repeat for several clips")
        parser.add_argument("--class", dest="class_choice", type=class_choice, default=PREDICTED)
        parser.add_argument("--out", type=Path, required=True)

    def handle(self, *args, **options):
        result = load_result(options["model"])
        manifest = load_manifest(options["manifest"])
        records = {record.clip_id: record for record in manifest.records}
        missing = [clip for clip in options["clip"] if clip not in records]
        if missing:
            msg = f"clips not in {options['manifest']}: {', '.join(missing)}"
            raise ValidationError(msg)
        for clip in options["clip"]:
            heatmap = export_clip_heatmap(result, records[clip], options["out"], options["class_choice"])
            self.stdout.write(f"{clip}: class {heatmap.class_name}, peak weight {heatmap.values.max():.6g}")
