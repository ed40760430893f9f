"""Config command implementation."""

from __future__ import annotations

import logging

import lib_log_rich.runtime

from ...cli_errors import handle_config_error
from ...config_show import display_config
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def config_show_command(settings: CliSettings, *, output_format: str, section: str | None) -> None:
    """Execute config command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-config", extra={"command": "config", "format": output_format}):
        logger.info("Displaying configuration", extra={"format": output_format, "section": section})
        try:
            display_config(output_format=output_format, section=section, config_file=settings.config_file, seed=settings.seed, threads=settings.threads)
        except RunConfigError as exc:
            handle_config_error(exc, operation="Config")
