"""Evaluate command implementation."""

from __future__ import annotations

import logging

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import evaluate_run
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...formatters import display_comparison, display_metrics, display_trace
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def evaluate_command(settings: CliSettings) -> None:
    """Execute evaluate command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-evaluate", extra={"command": "evaluate", "out": str(settings.out)}):
        try:
            config = settings.resolve()
            settings.run.record_command("evaluate", config)
            result = evaluate_run(config, settings.run)
            display_metrics(result.metrics)
            if result.trace is not None:
                display_trace(result.trace)
            if result.comparison is not None:
                display_comparison(result.comparison)
            rates = ", ".join(f"{name} {rate:,.0f}/s" for name, rate in result.benchmark.throughput.items())
            click.echo(f"Inference throughput: {rates}")
            click.echo(f"Reports: {settings.run.reports_dir}")
        except RunConfigError as exc:
            handle_config_error(exc, operation="Evaluate")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Evaluate")
        except Exception as exc:
            handle_generic_error(exc, operation="Evaluate")
