"""Root CLI options shared by every subcommand."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from ..run_config import resolve_run_config
from ..run_dir import RunDirectory

if TYPE_CHECKING:
    from ..models import RunConfig

#: Default ``--out`` directory.
DEFAULT_RUN_DIR = Path("siw_run")


@dataclass(frozen=True)
class CliSettings:
    """Values of ``--config``, ``--out``, ``--seed`` and ``--threads``."""

    config_file: Path | None = None
    out: Path = DEFAULT_RUN_DIR
    seed: int | None = None
    threads: int | None = None

    def resolve(self, *, desk: bool = False) -> RunConfig:
        return resolve_run_config(self.config_file, seed=self.seed, threads=self.threads, desk=desk)

    @property
    def run(self) -> RunDirectory:
        return RunDirectory(self.out)


__all__ = ["DEFAULT_RUN_DIR", "CliSettings"]
