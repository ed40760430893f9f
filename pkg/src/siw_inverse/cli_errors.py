"""Shared error handling for CLI commands.

Purpose
-------
Map failures to the documented exit codes with one log record and one stderr
line each, so every subcommand reports errors identically.

Contents
--------
* :data:`USAGE_EXIT_CODE` / :data:`DATA_EXIT_CODE` - exit codes.
* :class:`UsageExitGroup` - rich-click group reporting usage errors with exit code 1.
* :func:`handle_domain_error` - diagnosable :class:`~siw_inverse.errors.SiwInverseError`.
* :func:`handle_config_error` - unreadable or invalid run configuration.
* :func:`handle_generic_error` - anything else, logged with traceback.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any, NoReturn

import rich_click as click

if TYPE_CHECKING:
    from .errors import SiwInverseError
    from .run_config import RunConfigError

logger = logging.getLogger(__name__)

#: Unknown flag, bad choice, missing option, unknown subcommand, invalid configuration.
USAGE_EXIT_CODE = 1
#: Data or model errors, and unexpected failures.
DATA_EXIT_CODE = 2


class UsageExitGroup(click.RichGroup):
    """Root group whose usage errors exit with :data:`USAGE_EXIT_CODE` instead of click's 2."""

    def make_context(self, info_name: str | None, args: list[str], parent: click.Context | None = None, **extra: Any) -> click.Context:
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = USAGE_EXIT_CODE
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = USAGE_EXIT_CODE
            raise


def handle_domain_error(exc: SiwInverseError, *, operation: str) -> NoReturn:
    """Report a diagnosable data/model failure and exit with code 2.

    Parameters
    ----------
    exc:
        The raised error; its message is shown verbatim.
    operation:
        Command label for the log record.
    """
    logger.error(
        "%s failed",
        operation,
        extra={"error": str(exc), "error_type": type(exc).__name__, "operation": operation},
    )
    click.echo(f"\nError: {exc}", err=True)
    raise SystemExit(DATA_EXIT_CODE)


def handle_config_error(exc: RunConfigError, *, operation: str) -> NoReturn:
    """Report an invalid run configuration as a usage error (exit code 1)."""
    logger.error("Invalid configuration", extra={"error": str(exc), "operation": operation})
    click.echo(f"\nError: {exc}", err=True)
    raise SystemExit(USAGE_EXIT_CODE)


def handle_generic_error(exc: Exception, *, operation: str) -> NoReturn:
    """Report an unexpected failure with its traceback in the log and exit with code 2."""
    logger.error(
        "%s failed",
        operation,
        extra={"error": str(exc), "error_type": type(exc).__name__, "operation": operation},
        exc_info=True,
    )
    click.echo(f"\nError: {exc}", err=True)
    raise SystemExit(DATA_EXIT_CODE)


__all__ = [
    "DATA_EXIT_CODE",
    "USAGE_EXIT_CODE",
    "UsageExitGroup",
    "handle_config_error",
    "handle_domain_error",
    "handle_generic_error",
]
