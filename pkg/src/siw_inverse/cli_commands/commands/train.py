"""Train command implementation."""

from __future__ import annotations

import logging

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import TrainTarget, train_models
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...formatters import training_summary
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def train_command(settings: CliSettings, *, model: TrainTarget) -> None:
    """Execute train command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-train", extra={"command": "train", "model": model, "out": str(settings.out)}):
        try:
            config = settings.resolve()
            settings.run.record_command("train", config, model=model)
            bundle = train_models(config, settings.run, model)
            for name, record in bundle.records.items():
                if record.epochs:
                    click.echo(training_summary(name, record))
            click.echo(f"Models: {settings.run.models_dir}")
        except RunConfigError as exc:
            handle_config_error(exc, operation="Train")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Train")
        except Exception as exc:
            handle_generic_error(exc, operation="Train")

