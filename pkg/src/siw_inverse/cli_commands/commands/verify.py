"""Verify command implementation."""

from __future__ import annotations

import logging
from pathlib import Path

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import verify_run
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...formatters import display_verify
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def verify_command(settings: CliSettings, *, targets_dir: Path | None, channel: str | None) -> None:
    """Execute verify command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-verify", extra={"command": "verify", "targets": str(targets_dir) if targets_dir else None}):
        try:
            config = settings.resolve()
            settings.run.record_command("verify", config, targets=targets_dir, channel=channel)
            report = verify_run(config, settings.run, targets_dir=targets_dir, channel=channel)
            display_verify(report)
            click.echo(f"Report: {settings.run.report('verify.csv')}")
        except RunConfigError as exc:
            handle_config_error(exc, operation="Verify")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Verify")
        except Exception as exc:
            handle_generic_error(exc, operation="Verify")
