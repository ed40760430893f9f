"""Typed option decorators shared by the ``siw_inverse`` commands.

rich_click types ``option`` and ``version_option`` with a partially unknown
return, which pyright strict reports at every call site. The ``Protocol``
below restates them with complete types; at runtime the calls still reach
rich_click, so help keeps rendering through ``RichOption``.

On top of the two forwards sit the option shapes the commands repeat:
input files that must exist, directories that must exist, and
case-insensitive choices such as ``--model`` and ``--channel``.
"""

from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Protocol, cast

import rich_click as click

_CommandDecorator = Callable[[Callable[..., Any]], Callable[..., Any]]


class _RichClickDecorators(Protocol):
    option: Callable[..., _CommandDecorator]
    version_option: Callable[..., _CommandDecorator]


_click = cast("_RichClickDecorators", click)


def option(*param_decls: str, **attrs: Any) -> _CommandDecorator:
    """Forward to :func:`rich_click.option`."""
    return _click.option(*param_decls, **attrs)


def version_option(*param_decls: str, **attrs: Any) -> _CommandDecorator:
    """Forward to :func:`rich_click.version_option`."""
    return _click.version_option(*param_decls, **attrs)


def existing_file_option(*param_decls: str, **attrs: Any) -> _CommandDecorator:
    """Option naming a readable file (JSON configuration, spectrum CSV), passed on as :class:`Path`."""
    return option(*param_decls, type=click.Path(exists=True, dir_okay=False, path_type=Path), **attrs)


def existing_dir_option(*param_decls: str, **attrs: Any) -> _CommandDecorator:
    return option(*param_decls, type=click.Path(exists=True, file_okay=False, path_type=Path), **attrs)


def choice_option(*param_decls: str, choices: Sequence[str], **attrs: Any) -> _CommandDecorator:
    """Case-insensitive choice; the callback receives the spelling listed in ``choices``."""
    return option(*param_decls, type=click.Choice(list(choices), case_sensitive=False), **attrs)


__all__ = ["choice_option", "existing_dir_option", "existing_file_option", "option", "version_option"]
