"""One-time lib_log_rich initialisation for every entry point.

The console script, ``python -m siw_inverse`` and the test-suite all call
:func:`init_logging`; the first call builds the runtime from the
``[lib_log_rich]`` section of the layered configuration and bridges stdlib
logging, so the ``logging.getLogger(__name__)`` loggers used throughout the
numerical modules end up in the same sinks.
"""

from __future__ import annotations

from typing import Any

import lib_log_rich.config
import lib_log_rich.runtime

from . import __init__conf__
from .config import get_config

_runtime_config: lib_log_rich.runtime.RuntimeConfig | None = None


def _build_runtime_config() -> lib_log_rich.runtime.RuntimeConfig:
    """Map ``[lib_log_rich]`` onto a RuntimeConfig.

    ``service`` defaults to the package name and ``environment`` to ``prod``;
    every other key is passed through unchanged.
    """
    section: Any = get_config().get("lib_log_rich", default={})
    settings = dict(section) if section else {}
    settings.setdefault("service", __init__conf__.name)
    settings.setdefault("environment", "prod")
    return lib_log_rich.runtime.RuntimeConfig(**settings)


def init_logging() -> None:
    """Initialise lib_log_rich once; later calls are no-ops.

    Loads ``.env`` files first so ``LOG_*`` variables can override the
    configuration, then attaches the stdlib bridge.
    """
    if lib_log_rich.runtime.is_initialised():
        return
    global _runtime_config  # noqa: PLW0603 - written once per process, guarded above
    lib_log_rich.config.enable_dotenv()
    _runtime_config = _build_runtime_config()
    lib_log_rich.runtime.init(_runtime_config)
    lib_log_rich.runtime.attach_std_logging()


__all__ = [
    "init_logging",
]
