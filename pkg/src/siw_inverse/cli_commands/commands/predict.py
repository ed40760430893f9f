"""Predict command implementation."""

from __future__ import annotations

import logging
from pathlib import Path

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import predict_spectrum
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def predict_command(settings: CliSettings, *, model: str, input_path: Path, clip: bool) -> None:
    """Execute predict command logic; the JSON result goes to stdout."""
    with lib_log_rich.runtime.bind(job_id="cli-predict", extra={"command": "predict", "model": model, "input": str(input_path)}):
        try:
            config = settings.resolve()
            settings.run.record_command("predict", config, model=model, input=input_path, clip=clip)
            click.echo(predict_spectrum(config, settings.run, model, input_path, clip=clip))
        except RunConfigError as exc:
            handle_config_error(exc, operation="Predict")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Predict")
        except Exception as exc:
            handle_generic_error(exc, operation="Predict")
