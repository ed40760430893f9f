"""Project metadata as plain constants.

The values mirror ``pyproject.toml`` (a test keeps them aligned). ``info``
prints them, the run manifest records the version, and the logging runtime
uses the name as its service label.
"""

from __future__ import annotations

#: Distribution and import name.
name = "siw_inverse"
#: One-line description; doubles as the CLI help title.
title = "Inverse design of multimode SIW resonant filters with iterative residual correction"
#: Release version, recorded in the run manifest.
version = "1.0.0"
#: Project page.
homepage = "https://github.com/bitranox/siw_inverse"
#: Maintainer.
author = "bitranox"
#: Maintainer contact.
author_email = "bitranox@gmail.com"
#: Console script.
shell_command = "siw_inverse"

#: lib_layered_config vendor (macOS/Windows config paths).
LAYEREDCONF_VENDOR: str = "bitranox"
#: lib_layered_config application name (macOS/Windows config paths).
LAYEREDCONF_APP: str = "SIW Inverse"
#: lib_layered_config slug (Linux paths and the SIW_INVERSE___ environment prefix).
LAYEREDCONF_SLUG: str = "siw_inverse"


def print_info() -> None:
    """Write the metadata block shown by ``siw_inverse info`` to stdout.

    Examples
    --------
    >>> print_info()  # doctest: +ELLIPSIS
    Info for siw_inverse:
    <BLANKLINE>
        name          = siw_inverse
    ...
    """
    rows = {
        "name": name,
        "title": title,
        "version": version,
        "homepage": homepage,
        "author": author,
        "author_email": author_email,
        "shell_command": shell_command,
    }
    width = max(map(len, rows))
    body = "\n".join(f"    {label:<{width}} = {value}" for label, value in rows.items())
    print(f"Info for {name}:\n\n{body}")  # noqa: T201 - bottom layer, no click import
