from pathlib import Path

from caan.commands import CaanCommand
from caan.commands import add_training_flags
from caan.commands import train_config
from caan.network.models import LAYERS
from caan.trainer.models import StrategyKind
from caan.trainer.models import TrainConfig


class ExperimentCommand(CaanCommand):
    """Training flags plus the manifests an experiment trains and scores on."""

    def add_arguments(self, parser):
        add_training_flags(parser)
        parser.add_argument("--train", type=Path, required=True)
        parser.add_argument("--test", type=Path, required=True)
        parser.add_argument("--validation", type=Path)

    def base_config(self, options) -> TrainConfig:
        layer = options["condition_layer"] or LAYERS
        return train_config(options, strategy=StrategyKind.TEACHER_FORCING.value, condition_layer=layer)

    def paths(self, options) -> tuple[str, str, str | None]:
        validation = options["validation"]
        return str(options["train"]), str(options["test"]), str(validation) if validation else None
