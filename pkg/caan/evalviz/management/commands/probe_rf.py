from caan.commands import CaanCommand
from caan.evalviz.receptive_field import probe_receptive_field
from caan.network.models import LAYERS
from caan.network.models import TopologyKind


class Command(CaanCommand):
    help = "Measure receptive fields by perturbation and by gradient, beside the analytic sizes."

    def add_arguments(self, parser):
        parser.add_argument("--topology", choices=[t.value for t in TopologyKind], required=True)
        parser.add_argument("--layer", type=int, choices=range(1, LAYERS + 1), help="default: every layer")
        parser.add_argument("--kernel-size", type=int, default=3)

    def handle(self, *args, **options):
        layers = [options["layer"]] if options["layer"] else range(1, LAYERS + 1)
        for layer in layers:
            self.write_lines(probe_receptive_field(options["topology"], options["kernel_size"], layer).lines())
