"""Resolve the effective :class:`~siw_inverse.models.RunConfig` of a command.

Layers, lowest to highest precedence:

1. built-in defaults of :class:`RunConfig`;
2. the layered ``[run]`` section (defaults → app → host → user → dotenv → env);
3. the JSON file passed with ``--config``;
4. CLI flags (``--seed``, ``--threads``, ``generate --desk``).

Nested sections merge key by key, so a file may override a single training
option without restating the rest of its section.
"""

from __future__ import annotations

import json
import logging
from typing import TYPE_CHECKING, Any, cast

from pydantic import ValidationError

from .config import run_section
from .models import RunConfig

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path

logger = logging.getLogger(__name__)


class RunConfigError(ValueError):
    """The configuration file is unreadable or describes an invalid run."""


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Return ``base`` updated with ``override``; nested mappings merge recursively.

    Examples
    --------
    >>> deep_merge({"training": {"fim": {"max_epochs": 200, "patience": 20}}}, {"training": {"fim": {"max_epochs": 5}}})
    {'training': {'fim': {'max_epochs': 5, 'patience': 20}}}
    >>> deep_merge({"seed": 42}, {"seed": 7, "workers": 2})
    {'seed': 7, 'workers': 2}
    """
    merged: dict[str, Any] = dict(base)
    for key, value in override.items():
        current = merged.get(key)
        if isinstance(current, dict) and isinstance(value, dict):
            merged[key] = deep_merge(cast("dict[str, Any]", current), cast("dict[str, Any]", value))
        else:
            merged[key] = value
    return merged


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON run-configuration file.

    A run manifest (`run_manifest.json` of an earlier run) is accepted too; its
    recorded `config` member is returned so a run can be replayed.

    Raises
    ------
    RunConfigError
        When the file is missing, not JSON, or not a JSON object.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise RunConfigError(f"cannot read configuration file {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise RunConfigError(f"configuration file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise RunConfigError(f"configuration file {path} must contain a JSON object")
    content = cast("dict[str, Any]", data)
    if _is_run_manifest(content):
        logger.info("Replaying configuration recorded in run manifest", extra={"path": str(path)})
        return cast("dict[str, Any]", content["config"])
    return content


def _is_run_manifest(data: dict[str, Any]) -> bool:
    return isinstance(data.get("config"), dict) and isinstance(data.get("commands"), list) and "schema_version" in data


def flag_overrides(*, seed: int | None = None, threads: int | None = None, desk: bool = False) -> dict[str, Any]:
    """Translate CLI flags into RunConfig keys; unset flags contribute nothing.

    Examples
    --------
    >>> flag_overrides(seed=7, desk=True)
    {'seed': 7, 'parameter_grid': {'preset': 'desk'}}
    >>> flag_overrides()
    {}
    """
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if threads is not None:
        overrides["workers"] = threads
    if desk:
        overrides["parameter_grid"] = {"preset": "desk"}
    return overrides


def resolve_run_config(
    config_file: Path | None = None,
    *,
    seed: int | None = None,
    threads: int | None = None,
    desk: bool = False,
    layered: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge every configuration layer and validate the result.

    Parameters
    ----------
    config_file:
        JSON file given with ``--config``.
    seed, threads, desk:
        CLI flag values; ``None``/``False`` leave lower layers untouched.
    layered:
        The ``[run]`` section; read from :func:`siw_inverse.config.get_config`
        when omitted.

    Raises
    ------
    RunConfigError
        When the file cannot be read or the merged values fail validation.

    Examples
    --------
    >>> resolve_run_config(layered={"seed": 3}, seed=11).seed
    11
    >>> resolve_run_config(layered={"training": {"irc": {"max_epochs": 4}}}).training.irc.max_epochs
    4
    """
    merged = dict(layered) if layered is not None else run_section()
    if config_file is not None:
        merged = deep_merge(merged, load_config_file(config_file))
    merged = deep_merge(merged, flag_overrides(seed=seed, threads=threads, desk=desk))
    try:
        resolved = RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise RunConfigError(f"invalid run configuration: {exc}") from exc
    logger.debug("Resolved run configuration", extra={"seed": resolved.seed, "workers": resolved.workers, "config_file": str(config_file) if config_file else None})
    return resolved


__all__ = [
    "RunConfigError",
    "deep_merge",
    "flag_overrides",
    "load_config_file",
    "resolve_run_config",
]
