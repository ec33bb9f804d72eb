import json
from pathlib import Path

from django.conf import settings

from caan.commands import CaanCommand
from caan.commands import add_training_flags
from caan.commands import train_config
from caan.dataset.services.manifest_service import load_manifest
from caan.exceptions import DatasetIOError
from caan.trainer.models import StrategyKind
from caan.trainer.services import save_result
from caan.trainer.services import train
from caan.trainer.services import train_per_device


def model_path(out: Path, device_name: str) -> Path:
    return out.with_name(f"{out.stem}-{device_name}{out.suffix}")


class Command(CaanCommand):
    help = "Train a scene classifier; single_device without --device trains one model per device."

    def add_arguments(self, parser):
        add_training_flags(parser)
        parser.add_argument("--train", type=Path, required=True, help="training manifest")
        parser.add_argument("--validation", type=Path, help="validation manifest")
        parser.add_argument("--device", type=int, help="device index for single_device (default: every device)")
        parser.add_argument("--out", type=Path, help="model file (default: DATA_ROOT/model.caan)")
        parser.add_argument("--report", type=Path, help="write the training report as JSON")

    def handle(self, *args, **options):
        config = train_config(options, device=options["device"])
        train_manifest = load_manifest(options["train"])
        validation = load_manifest(options["validation"]) if options["validation"] else None
        out = options["out"] or Path(settings.DATA_ROOT) / "model.caan"
        out.parent.mkdir(parents=True, exist_ok=True)
        if config.strategy is StrategyKind.SINGLE_DEVICE and config.device is None:
            results = train_per_device(config, train_manifest, validation)
            reports = {}
            for device, result in results.items():
                name = train_manifest.device_names[device]
                self.stdout.write(f"saved {save_result(result, model_path(out, name))}")
                reports[name] = json.loads(result.report.to_json())
        else:
            result = train(config, train_manifest, validation)
            self.stdout.write(f"saved {save_result(result, out)}")
            reports = json.loads(result.report.to_json())
            final = result.report
            self.stdout.write(f"final loss {final.loss[-1]:.4f}, scene accuracy {final.scene_accuracy[-1]:.3f}")
        if options["report"]:
            try:
                options["report"].write_text(json.dumps(reports, indent=2), encoding="utf-8")
            except OSError as exc:
                msg = f"cannot write report {options['report']}: {exc}"
                raise DatasetIOError(msg) from exc
