from pathlib import Path

from caan.commands import CaanCommand
from caan.dataset.models import DatasetManifest
from caan.dataset.services.manifest_service import load_manifest
from caan.evalviz.metrics import classwise_accuracy
from caan.evalviz.metrics import confusion
from caan.evalviz.metrics import confusion_by_device
from caan.evalviz.models import Prediction
from caan.exceptions import DatasetIOError
from caan.exceptions import ValidationError
from caan.trainer.models import TrainResult
from caan.trainer.services import load_result
from caan.trainer.services import predict
from caan.trainer.services import predict_per_device


def predictions_for(results: list[TrainResult], manifest: DatasetManifest) -> list[Prediction]:
    """One joint or conditional model, or one single-device model per device."""
    if len(results) == 1 and results[0].config.device is None:
        result = results[0]
        return predict(
            result.scene,
            result.device,
            manifest,
            strategy=result.config.strategy,
            normalizer=result.normalizer,
        )
    per_device = {}
    for result in results:
        if result.config.device is None:
            msg = "several models given, but not all of them are single-device models"
            raise ValidationError(msg)
        per_device[result.config.device] = result
    return predict_per_device(per_device, manifest)


class Command(CaanCommand):
    help = "Score trained models on a manifest: class-wise accuracy per device and confusion matrices."

    def add_arguments(self, parser):
        parser.add_argument("--model", type=Path, action="append", required=True, help="repeat for per-device models")
        parser.add_argument("--test", type=Path, required=True)
        parser.add_argument("--out", type=Path, help="directory for metrics.json and confusion CSVs")

    def handle(self, *args, **options):
        manifest = load_manifest(options["test"])
        predictions = predictions_for([load_result(path) for path in options["model"]], manifest)
        metrics = classwise_accuracy(predictions, manifest.scene_names, manifest.device_names)
        self.write_lines(metrics.lines())
        out: Path | None = options["out"]
        if out is None:
            return
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "metrics.json").write_text(metrics.to_json(), encoding="utf-8")
            matrices = confusion_by_device(predictions, manifest.scene_names, manifest.device_names)
            matrices["all"] = confusion(predictions, manifest.scene_names)
            for name, matrix in matrices.items():
                (out / f"confusion_{name}.csv").write_text(matrix.to_csv(), encoding="utf-8")
        except OSError as exc:
            msg = f"cannot write evaluation output to {out}: {exc}"
            raise DatasetIOError(msg) from exc
