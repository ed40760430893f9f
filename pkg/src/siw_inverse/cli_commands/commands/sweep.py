"""Sweep command implementation."""

from __future__ import annotations

import logging

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import sweep_parameter
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...formatters import display_trend
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def parse_values(raw: str | None) -> tuple[float, ...] | None:
    """Parse ``--values 4.5,5.5,6.5``.

    Examples
    --------
    >>> parse_values("4.5, 5.5,6.5")
    (4.5, 5.5, 6.5)
    >>> parse_values(None) is None
    True
    """
    if raw is None:
        return None
    try:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {raw!r}", param_hint="--values") from exc


def sweep_command(settings: CliSettings, *, parameter: str, values: tuple[float, ...] | None) -> None:
    """Execute sweep command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-sweep", extra={"command": "sweep", "parameter": parameter}):
        try:
            config = settings.resolve()
            settings.run.record_command("sweep", config, parameter=parameter, values=list(values) if values else None)
            report = sweep_parameter(config, settings.run, parameter, values)
            display_trend(report)
        except RunConfigError as exc:
            handle_config_error(exc, operation="Sweep")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Sweep")
        except Exception as exc:
            handle_generic_error(exc, operation="Sweep")
