"""``python -m siw_inverse``: same commands, exit codes and traceback limits as the console script."""

from __future__ import annotations

from collections.abc import Callable
from typing import TYPE_CHECKING, Final

import lib_log_rich.runtime
from lib_cli_exit_tools import cli_session

from . import __init__conf__, cli
from .logging_setup import init_logging

if TYPE_CHECKING:
    from contextlib import AbstractContextManager

    import rich_click as click

#: Character budget for truncated tracebacks.
TRACEBACK_SUMMARY_LIMIT: Final[int] = cli.TRACEBACK_SUMMARY_LIMIT
#: Character budget with ``--traceback``.
TRACEBACK_VERBOSE_LIMIT: Final[int] = cli.TRACEBACK_VERBOSE_LIMIT

CommandRunner = Callable[..., int]


def _open_cli_session() -> AbstractContextManager[CommandRunner]:
    return cli_session(
        summary_limit=TRACEBACK_SUMMARY_LIMIT,
        verbose_limit=TRACEBACK_VERBOSE_LIMIT,
    )


def _command_to_run() -> click.Command:
    return cli.cli


def _command_name() -> str:
    return __init__conf__.shell_command


def _module_main() -> int:
    """Run the root command inside a ``cli_session`` and return its exit code."""
    init_logging()
    try:
        with _open_cli_session() as run:
            return run(_command_to_run(), prog_name=_command_name())
    finally:
        lib_log_rich.runtime.shutdown()


if __name__ == "__main__":
    raise SystemExit(_module_main())
