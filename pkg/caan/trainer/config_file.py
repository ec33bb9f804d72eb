"""
Run configuration files: UTF-8 lines of ``key = value`` with ``#`` comments.

Values are cast with django-environ's parser (``widths = 16,32,64,128``,
``condition_layer = 4``); ``none`` clears an optional value.
"""

import logging
from pathlib import Path
from typing import Any

import environ
from django.conf import settings

from caan.exceptions import ConfigError
from caan.exceptions import DatasetIOError
from caan.trainer.models import TrainConfig

logger = logging.getLogger(__name__)


def _real(value: str) -> float:
    return float(value)


def _optional_int(value: str) -> int | None:
    return None if value.lower() in {"", "none"} else int(value)


CASTS: dict[str, Any] = {
    "strategy": str,
    "condition_layer": _optional_int,
    "topology": str,
    "head": str,
    "widths": [int],
    "device_widths": [int],
    "kernel_size": int,
    "learning_rate": _real,
    "lr_decay": _real,
    "lr_period": int,
    "max_iterations": int,
    "batch_size": int,
    "seed": int,
    "lambda_high": _real,
    "lambda_low": _real,
    "lambda_threshold": _real,
    "eval_interval": int,
    "device": _optional_int,
    "validation_fraction": _real,
    "prefetch": int,
    "adam_beta1": _real,
    "adam_beta2": _real,
    "adam_epsilon": _real,
}


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            msg = f"{source}: expected 'key = value', got '{raw.strip()}'"
            raise ConfigError(msg, line=number)
        if key not in CASTS:
            msg = f"{source}: unknown key '{key}'"
            raise ConfigError(msg, line=number)
        if key in values:
            msg = f"{source}: '{key}' given twice"
            raise ConfigError(msg, line=number)
        try:
            values[key] = environ.Env.parse_value(value, CASTS[key])
        except ValueError as exc:
            msg = f"{source}: bad value '{value}' for '{key}': {exc}"
            raise ConfigError(msg, line=number) from exc
    return values


def load_train_config(path: Path | str | None = None, **overrides: Any) -> TrainConfig:
    """
    Read a config file (optional) and apply command-line overrides on top of it.

    Keys absent from both fall back to the process settings (seed, iteration cap,
    prefetch depth) and then to the :class:`TrainConfig` defaults.
    """
    values: dict[str, Any] = {
        "seed": settings.DEFAULT_SEED,
        "max_iterations": settings.DEFAULT_MAX_ITERATIONS,
        "prefetch": settings.PREFETCH_BATCHES,
    }
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            msg = f"cannot read config {path}: {exc}"
            raise DatasetIOError(msg) from exc
        values.update(parse_config(text, str(path)))
    values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        config = TrainConfig(**values)
    except TypeError as exc:
        msg = f"invalid configuration: {exc}"
        raise ConfigError(msg) from exc
    logger.debug(f"Training configuration: {config.to_dict()}")
    return config
