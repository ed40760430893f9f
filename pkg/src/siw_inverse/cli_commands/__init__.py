"""CLI subpackage: root settings and one module per subcommand."""

from __future__ import annotations

from .settings import DEFAULT_RUN_DIR, CliSettings

__all__ = ["DEFAULT_RUN_DIR", "CliSettings"]
