from caan.commands import int_list
from caan.network.models import LAYERS
from caan.trainer.experiments import compare_strategies
from caan.trainer.management.experiment import ExperimentCommand


class Command(ExperimentCommand):
    help = "Every training strategy over several seeds, with z-tests against the best."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--seeds", type=int_list, default=(0, 1, 2, 3, 4))

    def handle(self, *args, **options):
        comparison = compare_strategies(
            self.base_config(options),
            *self.paths(options),
            seeds=options["seeds"],
            condition_layer=options["condition_layer"] or LAYERS,
        )
        self.write_lines(comparison.lines())
