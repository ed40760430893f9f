"""Show the resolved run configuration and where each value came from.

Purpose
-------
Back the ``config`` subcommand: print the effective
:class:`~siw_inverse.models.RunConfig` either TOML-like with a source note
per key or as JSON, optionally limited to one section.

Contents
--------
* :func:`display_config` - render the resolved configuration.
* :func:`value_sources` - dotted key → layer that set it.
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING, Any, cast

import click

from .config import RUN_SECTION, get_config, run_section
from .run_config import flag_overrides, load_config_file, resolve_run_config

if TYPE_CHECKING:
    from pathlib import Path

    from lib_layered_config import Config


def _collect_dotted_keys(data: dict[str, Any], prefix: str = "") -> list[str]:
    """Return the dotted paths of every leaf in ``data``.

    Examples
    --------
    >>> _collect_dotted_keys({"training": {"fim": {"max_epochs": 5}}, "seed": 1})
    ['training.fim.max_epochs', 'seed']
    """
    keys: list[str] = []
    for key, value in data.items():
        dotted_key = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict) and value:
            keys.extend(_collect_dotted_keys(cast("dict[str, Any]", value), prefix=dotted_key))
        else:
            keys.append(dotted_key)
    return keys


def _layer_label(config: Config, dotted_key: str) -> str:
    origin: Any = config.origin(f"{RUN_SECTION}.{dotted_key}") if hasattr(config, "origin") else None
    if not origin:
        return "config"
    layer, path = origin.get("layer"), origin.get("path")
    if layer is None:
        return "config"
    return f"{layer}: {path}" if path else str(layer)


def value_sources(
    *,
    layered: dict[str, Any],
    file_data: dict[str, Any],
    file_path: Path | None,
    flags: dict[str, Any],
    config: Config | None = None,
) -> dict[str, str]:
    """Map each overridden dotted key to the layer that set it last.

    Keys absent from the result keep their built-in default.

    Examples
    --------
    >>> value_sources(layered={}, file_data={"seed": 1}, file_path=None, flags={"seed": 2})
    {'seed': 'flag'}
    """
    sources: dict[str, str] = {}
    for key in _collect_dotted_keys(layered):
        sources[key] = _layer_label(config, key) if config is not None else "config"
    for key in _collect_dotted_keys(file_data):
        sources[key] = f"file: {file_path}" if file_path is not None else "file"
    for key in _collect_dotted_keys(flags):
        sources[key] = "flag"
    return sources


def _format_value(value: Any) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list) or value is None:
        return json.dumps(value)
    return str(value)


def _echo_section(name: str, data: dict[str, Any], sources: dict[str, str], prefix: str = "") -> None:
    scalars = {k: v for k, v in data.items() if not isinstance(v, dict)}
    tables = {k: cast("dict[str, Any]", v) for k, v in data.items() if isinstance(v, dict)}
    if scalars:
        click.echo(f"\n[{name}]")
    for key, value in scalars.items():
        dotted = f"{prefix}{key}"
        click.echo(f"  {key} = {_format_value(value)}  # [{sources.get(dotted, 'default')}]")
    for key, value in tables.items():
        _echo_section(f"{name}.{key}", value, sources, prefix=f"{prefix}{key}.")


def display_config(
    *,
    output_format: str = "human",
    section: str | None = None,
    config_file: Path | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> None:
    """Print the resolved run configuration.

    Parameters
    ----------
    output_format:
        ``human`` for a TOML-like listing with one source note per key,
        ``json`` for machine-readable output.
    section:
        Optional top-level RunConfig section (``training``, ``substrate``, ...).
    config_file, seed, threads:
        The root CLI options, resolved exactly like every other command.

    Raises
    ------
    SystemExit
        Exit code 1 when ``section`` does not exist.
    """
    layered_config = get_config()
    layered = run_section(layered_config)
    file_data = load_config_file(config_file) if config_file is not None else {}
    flags = flag_overrides(seed=seed, threads=threads)
    resolved = resolve_run_config(config_file, seed=seed, threads=threads, layered=layered)
    data: dict[str, Any] = resolved.model_dump(mode="json")

    if section is not None:
        if section not in data:
            click.echo(f"Section '{section}' not found; available: {', '.join(data)}", err=True)
            raise SystemExit(1)
        data = {section: data[section]}

    if output_format.lower() == "json":
        click.echo(json.dumps(data, indent=2))
        return
    sources = value_sources(layered=layered, file_data=file_data, file_path=config_file, flags=flags, config=layered_config)
    _echo_section(RUN_SECTION, data, sources)


__all__ = [
    "display_config",
    "value_sources",
]
