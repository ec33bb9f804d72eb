from caan.trainer.experiments import sweep_condition_layers
from caan.trainer.management.experiment import ExperimentCommand


class Command(ExperimentCommand):
    help = "Teacher-forcing runs with the device injected at each layer."

    def handle(self, *args, **options):
        self.write_lines(sweep_condition_layers(self.base_config(options), *self.paths(options)).lines())
