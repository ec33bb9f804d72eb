import argparse

from caan.commands import CaanCommand
from caan.evalviz.metrics import one_tailed_ztest
from caan.evalviz.metrics import z_statistic


def fraction(value: str) -> tuple[int, int]:
    correct, sep, total = value.partition("/")
    try:
        if not sep:
            raise ValueError(value)
        return int(correct), int(total)
    except ValueError as exc:
        msg = f"expected CORRECT/TOTAL, got '{value}'"
        raise argparse.ArgumentTypeError(msg) from exc


class Command(CaanCommand):
    help = "One-tailed two-proportion z-test that system A beats system B."

    def add_arguments(self, parser):
        parser.add_argument("--a", type=fraction, required=True, help="CORRECT/TOTAL of the system claimed better")
        parser.add_argument("--b", type=fraction, required=True, help="CORRECT/TOTAL of the other system")

    def handle(self, *args, **options):
        (correct_a, n_a), (correct_b, n_b) = options["a"], options["b"]
        self.stdout.write(f"z = {z_statistic(correct_a, n_a, correct_b, n_b):.6f}")
        self.stdout.write(f"p = {one_tailed_ztest(correct_a, n_a, correct_b, n_b):.6g}")
