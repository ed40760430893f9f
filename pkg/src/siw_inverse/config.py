"""Layered configuration through lib_layered_config.

Purpose
-------
Load the ``[lib_log_rich]`` and ``[run]`` sections from the bundled defaults
and the platform layers (app, host, user, ``.env``, environment variables).
Run-specific overrides (JSON file, CLI flags) are applied on top of the
``[run]`` section by :mod:`siw_inverse.run_config`.

Contents
--------
* :func:`get_config` - cached layered configuration.
* :func:`get_default_config_path` - location of ``defaultconfig.toml``.
* :func:`run_section` - the ``[run]`` section as a plain dictionary.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Any, cast

from lib_layered_config import Config, read_config

from . import __init__conf__

#: Name of the configuration section carrying RunConfig overrides.
RUN_SECTION = "run"


def get_default_config_path() -> Path:
    """Return the bundled ``defaultconfig.toml``.

    Examples
    --------
    >>> get_default_config_path().name
    'defaultconfig.toml'
    >>> get_default_config_path().exists()
    True
    """
    return Path(__file__).parent / "defaultconfig.toml"


@lru_cache(maxsize=1)
def get_config(*, start_dir: str | None = None) -> Config:
    """Load the layered configuration once per process.

    Layers are merged defaults → app → host → user → dotenv → env, with
    platform paths derived from the vendor/app/slug constants in
    :mod:`siw_inverse.__init__conf__`.

    Parameters
    ----------
    start_dir:
        Directory that seeds ``.env`` discovery; the working directory when None.

    Examples
    --------
    >>> config = get_config()
    >>> config.get("nonexistent", default="fallback")
    'fallback'
    """
    return read_config(
        vendor=__init__conf__.LAYEREDCONF_VENDOR,
        app=__init__conf__.LAYEREDCONF_APP,
        slug=__init__conf__.LAYEREDCONF_SLUG,
        default_file=get_default_config_path(),
        start_dir=start_dir,
    )


def run_section(config: Config | None = None) -> dict[str, Any]:
    """Return a copy of the ``[run]`` section (empty when absent).

    Examples
    --------
    >>> isinstance(run_section(), dict)
    True
    """
    source = config if config is not None else get_config()
    section = source.get(RUN_SECTION, default={})
    return dict(cast("dict[str, Any]", section)) if isinstance(section, dict) else {}


__all__ = [
    "RUN_SECTION",
    "get_config",
    "get_default_config_path",
    "run_section",
]
