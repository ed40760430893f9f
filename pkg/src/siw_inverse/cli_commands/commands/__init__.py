"""CLI command implementations extracted from cli.py.

Each module holds one subcommand's logic, leaving cli.py as declarations only.
"""

from __future__ import annotations

from .config_show import config_show_command
from .evaluate import evaluate_command
from .generate import generate_command
from .predict import predict_command
from .sweep import parse_values, sweep_command
from .train import train_command
from .verify import verify_command

__all__ = [
    "config_show_command",
    "evaluate_command",
    "generate_command",
    "parse_values",
    "predict_command",
    "sweep_command",
    "train_command",
    "verify_command",
]
