"""
Shared plumbing for caan's management commands.

Exit codes: 0 on success, 1 on invalid input or usage, 2 when a file cannot be
read or written.
"""

import argparse
import sys
from typing import Any
from typing import NoReturn

from django.core.management.base import BaseCommand
from django.core.management.base import CommandError
from django.core.management.base import CommandParser

from caan.exceptions import CaanError
from caan.network.models import LAYERS
from caan.network.models import TopologyKind
from caan.poolheads.models import HeadKind
from caan.trainer.config_file import load_train_config
from caan.trainer.models import StrategyKind
from caan.trainer.models import TrainConfig

EXIT_INVALID = 1
EXIT_IO = 2


class CaanParser(CommandParser):
    def error(self, message: str) -> NoReturn:
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")
        super().error(message)


class CaanCommand(BaseCommand):
    """A command whose library errors surface as ``CommandError`` with caan's exit codes."""

    def create_parser(self, prog_name: str, subcommand: str, **kwargs: Any) -> CommandParser:
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse exits 2 on a bad flag; 2 is reserved for I/O errors
        parser.__class__ = CaanParser
        return parser

    def execute(self, *args: Any, **options: Any):
        try:
            return super().execute(*args, **options)
        except OSError as exc:
            raise CommandError(str(exc), returncode=EXIT_IO) from exc
        except CaanError as exc:
            raise CommandError(str(exc), returncode=EXIT_INVALID) from exc

    def write_lines(self, lines: list[str]) -> None:
        for line in lines:
            self.stdout.write(line)


def int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        msg = f"expected comma-separated integers, got '{value}'"
        raise argparse.ArgumentTypeError(msg) from exc


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as exc:
        msg = f"expected an integer, got '{value}'"
        raise argparse.ArgumentTypeError(msg) from exc
    if number < 1:
        msg = f"expected a positive integer, got {number}"
        raise argparse.ArgumentTypeError(msg)
    return number


def add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value run configuration file")
    parser.add_argument("--strategy", choices=[s.value for s in StrategyKind])
    parser.add_argument("--topology", choices=[t.value for t in TopologyKind])
    parser.add_argument("--head", choices=[h.value for h in HeadKind])
    parser.add_argument("--condition-layer", type=int, choices=range(1, LAYERS + 1))
    parser.add_argument("--iterations", type=positive_int, help="maximum training iterations")
    parser.add_argument("--batch-size", type=positive_int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--eval-interval", type=positive_int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--widths", type=int_list, help="scene-branch channel widths, e.g. 16,32,64,128")
    parser.add_argument("--device-widths", type=int_list)


def train_config(options: dict[str, Any], **extra: Any) -> TrainConfig:
    """Config file values, then command-line flags, then ``extra`` on top."""
    values = {
        "strategy": options["strategy"],
        "topology": options["topology"],
        "head": options["head"],
        "condition_layer": options["condition_layer"],
        "max_iterations": options["iterations"],
        "batch_size": options["batch_size"],
        "learning_rate": options["learning_rate"],
        "eval_interval": options["eval_interval"],
        "seed": options["seed"],
        "widths": options["widths"],
        "device_widths": options["device_widths"],
    }
    values.update(extra)
    return load_train_config(options["config"], **values)
