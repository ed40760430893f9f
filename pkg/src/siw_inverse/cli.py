"""CLI adapter wiring the workflow commands into a rich-click interface.

Purpose
-------
Expose the run workflow (``generate``, ``train``, ``predict``, ``evaluate``,
``sweep``, ``verify``) plus ``info`` and ``config``. This module holds only
click declarations and thin wrappers; command logic lives in
:mod:`siw_inverse.cli_commands.commands`.

Exit codes: 0 success, 1 usage error or invalid configuration, 2 data/model
error.

System Role
-----------
Primary adapter; the console script declared in ``pyproject.toml`` and
``python -m siw_inverse`` both end up in :func:`main` / :data:`cli`.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

import lib_cli_exit_tools
import lib_log_rich.runtime
import rich_click as click

from . import __init__conf__
from .cli_commands import DEFAULT_RUN_DIR, CliSettings
from .cli_commands.commands import (
    config_show_command,
    evaluate_command,
    generate_command,
    parse_values,
    predict_command,
    sweep_command,
    train_command,
    verify_command,
)
from .cli_errors import UsageExitGroup
from .cli_options import choice_option, existing_dir_option, existing_file_option, option, version_option
from .cli_traceback import (
    TRACEBACK_SUMMARY_LIMIT,
    TRACEBACK_VERBOSE_LIMIT,
    apply_traceback_preferences,
    restore_traceback_state,
    snapshot_traceback_state,
)
from .evaluation import MODEL_NAMES
from .logging_setup import init_logging
from .models import PARAMETER_NAMES

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .behaviors import TrainTarget

#: Shared Click context flags so help output stays consistent across commands.
CLICK_CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}

logger = logging.getLogger(__name__)


def _settings(ctx: click.Context) -> CliSettings:
    settings = ctx.find_object(CliSettings)
    return settings if settings is not None else CliSettings()


@click.group(
    cls=UsageExitGroup,
    help=__init__conf__.title,
    context_settings=CLICK_CONTEXT_SETTINGS,
    invoke_without_command=True,
)
@version_option(
    version=__init__conf__.version,
    prog_name=__init__conf__.shell_command,
    message=f"{__init__conf__.shell_command} version {__init__conf__.version}",
)
@existing_file_option(
    "--config",
    "config_file",
    default=None,
    help="JSON run configuration or an earlier run_manifest.json; overrides the layered [run] section",
)
@option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=DEFAULT_RUN_DIR,
    show_default=True,
    help="Run directory for datasets, models and reports",
)
@option("--seed", type=int, default=None, help="Base seed for split, initialisation and shuffling")
@option("--threads", type=click.IntRange(min=1), default=None, help="Worker count for simulation and verification")
@option(
    "--traceback/--no-traceback",
    is_flag=True,
    default=False,
    help="Show full Python traceback on errors",
)
@click.pass_context
def cli(
    ctx: click.Context,
    *,
    config_file: Path | None,
    out: Path,
    seed: int | None,
    threads: int | None,
    traceback: bool,
) -> None:
    """Root command storing the shared run options and traceback state."""
    init_logging()
    apply_traceback_preferences(enabled=traceback)
    ctx.obj = CliSettings(config_file=config_file, out=out, seed=seed, threads=threads)

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command("info", context_settings=CLICK_CONTEXT_SETTINGS)
def cli_info() -> None:
    """Print resolved metadata so users can inspect installation details."""
    with lib_log_rich.runtime.bind(job_id="cli-info", extra={"command": "info"}):
        logger.info("Displaying package information")
        __init__conf__.print_info()


@cli.command("config", context_settings=CLICK_CONTEXT_SETTINGS)
@choice_option(
    "--format",
    "output_format",
    choices=("human", "json"),
    default="human",
    help="Output format (human-readable or JSON)",
)
@option("--section", type=str, default=None, help="Show only one RunConfig section")
@click.pass_context
def cli_config(ctx: click.Context, *, output_format: str, section: str | None) -> None:
    """Display the resolved run configuration and where each value came from."""
    config_show_command(_settings(ctx), output_format=output_format, section=section)


@cli.command("generate", context_settings=CLICK_CONTEXT_SETTINGS)
@option("--desk", is_flag=True, default=False, help="Use the laptop-scale desk grid (1,921 geometries)")
@click.pass_context
def cli_generate(ctx: click.Context, *, desk: bool) -> None:
    """Simulate the parameter grid and write the split dataset."""
    generate_command(_settings(ctx), desk=desk)


@cli.command("train", context_settings=CLICK_CONTEXT_SETTINGS)
@choice_option(
    "--model",
    choices=(*MODEL_NAMES, "all"),
    default="all",
    show_default=True,
    help="Stage to train; hifr2 and irc need a trained fim",
)
@click.pass_context
def cli_train(ctx: click.Context, *, model: TrainTarget) -> None:
    """Train networks on the generated dataset."""
    train_command(_settings(ctx), model=model)


@cli.command("predict", context_settings=CLICK_CONTEXT_SETTINGS)
@choice_option("--model", choices=MODEL_NAMES, required=True, help="Pipeline to run")
@existing_file_option(
    "--input",
    "input_path",
    required=True,
    help="Spectrum CSV with frequency_GHz,s11_mag,s21_mag on the training grid",
)
@option("--clip", is_flag=True, default=False, help="Clip parameters into the training range")
@click.pass_context
def cli_predict(ctx: click.Context, *, model: str, input_path: Path, clip: bool) -> None:
    """Estimate the filter geometry for one spectrum (JSON on stdout)."""
    predict_command(_settings(ctx), model=model, input_path=input_path, clip=clip)


@cli.command("evaluate", context_settings=CLICK_CONTEXT_SETTINGS)
@click.pass_context
def cli_evaluate(ctx: click.Context) -> None:
    """Score every trained pipeline and write the reports."""
    evaluate_command(_settings(ctx))


@cli.command("sweep", context_settings=CLICK_CONTEXT_SETTINGS)
@choice_option("--param", "parameter", choices=PARAMETER_NAMES, required=True, help="Design parameter to sweep")
@option("--values", "raw_values", type=str, default=None, help="Comma-separated values, e.g. 4.5,5.5,6.5")
@click.pass_context
def cli_sweep(ctx: click.Context, *, parameter: str, raw_values: str | None) -> None:
    """Sweep one parameter of the reference geometry and report the resonance trend."""
    sweep_command(_settings(ctx), parameter=parameter, values=parse_values(raw_values))


@cli.command("verify", context_settings=CLICK_CONTEXT_SETTINGS)
@existing_dir_option(
    "--targets",
    "targets_dir",
    default=None,
    help="Directory of target spectrum CSVs (default: test-split samples)",
)
@choice_option("--channel", choices=("s21", "s11"), default=None, help="Magnitude used for scoring")
@click.pass_context
def cli_verify(ctx: click.Context, *, targets_dir: Path | None, channel: str | None) -> None:
    """Re-simulate predicted designs and score them against their targets."""
    verify_command(_settings(ctx), targets_dir=targets_dir, channel=channel)


def main(
    argv: Sequence[str] | None = None,
    *,
    restore_traceback: bool = True,
    summary_limit: int = TRACEBACK_SUMMARY_LIMIT,
    verbose_limit: int = TRACEBACK_VERBOSE_LIMIT,
) -> int:
    """Execute the CLI and return the exit code."""
    init_logging()
    previous_state = snapshot_traceback_state()
    try:
        return _run_cli_via_exit_tools(argv, summary_limit=summary_limit, verbose_limit=verbose_limit)
    finally:
        if restore_traceback:
            restore_traceback_state(previous_state)
        lib_log_rich.runtime.shutdown()


def _run_cli_via_exit_tools(
    argv: Sequence[str] | None,
    *,
    summary_limit: int,
    verbose_limit: int,
) -> int:
    try:
        return lib_cli_exit_tools.run_cli(
            cli,
            argv=list(argv) if argv is not None else None,
            prog_name=__init__conf__.shell_command,
        )
    except BaseException as exc:
        tracebacks_enabled = bool(getattr(lib_cli_exit_tools.config, "traceback", False))
        apply_traceback_preferences(enabled=tracebacks_enabled)
        length_limit = verbose_limit if tracebacks_enabled else summary_limit
        lib_cli_exit_tools.print_exception_message(
            trace_back=tracebacks_enabled,
            length_limit=length_limit,
        )
        return lib_cli_exit_tools.get_system_exit_code(exc)
