"""Generate command implementation."""

from __future__ import annotations

import logging

import lib_log_rich.runtime
import rich_click as click

from ...behaviors import generate_dataset
from ...cli_errors import handle_config_error, handle_domain_error, handle_generic_error
from ...errors import SiwInverseError
from ...run_config import RunConfigError
from ..settings import CliSettings

logger = logging.getLogger(__name__)


def generate_command(settings: CliSettings, *, desk: bool) -> None:
    """Execute generate command logic."""
    with lib_log_rich.runtime.bind(job_id="cli-generate", extra={"command": "generate", "desk": desk, "out": str(settings.out)}):
        try:
            config = settings.resolve(desk=desk)
            settings.run.record_command("generate", config, desk=desk)
            dataset = generate_dataset(config, settings.run)
            click.echo(f"Generated {len(dataset)} samples in {dataset.wall_time_s:.1f} s")
            if dataset.split is not None:
                click.echo(f"Split: train {len(dataset.split.train)}, validation {len(dataset.split.validation)}, test {len(dataset.split.test)}")
            click.echo(f"Dataset: {settings.run.dataset_dir}  checksum {dataset.checksum[:16]}")
        except RunConfigError as exc:
            handle_config_error(exc, operation="Generate")
        except SiwInverseError as exc:
            handle_domain_error(exc, operation="Generate")
        except Exception as exc:
            handle_generic_error(exc, operation="Generate")
