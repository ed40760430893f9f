"""Run-directory layout and the ``run_manifest.json`` audit trail.

Purpose
-------
Every subcommand reads and writes inside one run directory (``--out``). This
module owns the layout and appends one entry per command to the run
manifest, together with the resolved configuration, the derived seeds, the
RNG algorithm, the package version and ``git describe``.

Contents
--------
* :class:`RunDirectory` - paths of every artifact.
* :class:`RunManifest` / :class:`CommandEntry` - manifest schema.
* :func:`git_describe` - best-effort source revision.
* :func:`derived_seeds` - seed of every network a run trains.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess  # nosec B404 - fixed git argument list, never shell=True
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, ValidationError

from . import __init__conf__
from .models import RNG_ALGORITHM, RunConfig
from .pipeline import FFM_SEED_OFFSET, RRM_SEED_OFFSET

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
MANIFEST_SCHEMA_VERSION = 1
_GIT_TIMEOUT_S = 5.0


class CommandEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: str
    options: dict[str, Any]
    started_at: str


class RunManifest(BaseModel):
    """Schema of ``run_manifest.json``; ``config`` and ``seeds`` reflect the latest command."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = MANIFEST_SCHEMA_VERSION
    package: str = __init__conf__.name
    version: str = __init__conf__.version
    rng_algorithm: str = RNG_ALGORITHM
    git_describe: str | None = None
    config: dict[str, Any] = {}
    seeds: dict[str, int] = {}
    commands: list[CommandEntry] = []


def git_describe(cwd: Path | None = None) -> str | None:
    """Return ``git describe --always --dirty --tags`` or None outside a checkout."""
    git = shutil.which("git")
    if git is None:
        return None
    try:
        result = subprocess.run(  # noqa: S603  # nosec B603 - resolved git binary with a fixed argument list
            [git, "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=_GIT_TIMEOUT_S,
            check=False,
            cwd=cwd if cwd is not None else Path(__file__).parent,
        )
    except (OSError, subprocess.TimeoutExpired):
        logger.debug("git describe unavailable")
        return None
    if result.returncode != 0:
        return None
    return result.stdout.strip() or None


def derived_seeds(config: RunConfig) -> dict[str, int]:
    """Seeds of the split and of every network, as derived from the base seed.

    Examples
    --------
    >>> seeds = derived_seeds(RunConfig(seed=7))
    >>> seeds["fim"], seeds["ffm"], seeds["rrm"], seeds["irc_1"], seeds["irc_5"]
    (7, 107, 207, 8, 12)
    """
    seeds = {
        "base": config.seed,
        "split": config.seed,
        "fim": config.seed,
        "ffm": config.seed + FFM_SEED_OFFSET,
        "rrm": config.seed + RRM_SEED_OFFSET,
    }
    seeds.update({f"irc_{i}": config.seed + i for i in range(1, config.irc_iterations + 1)})
    return seeds


@dataclass(frozen=True)
class RunDirectory:
    """Artifact layout below one ``--out`` directory.

    Examples
    --------
    >>> run = RunDirectory(Path("siw_run"))
    >>> run.bundle_manifest.as_posix(), run.report("metrics.csv").as_posix()
    ('siw_run/models/bundle.json', 'siw_run/reports/metrics.csv')
    """

    root: Path

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    @property
    def dataset_dir(self) -> Path:
        return self.root / "dataset"

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def bundle_manifest(self) -> Path:
        return self.models_dir / "bundle.json"

    @property
    def records_dir(self) -> Path:
        return self.models_dir / "records"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def predictions_dir(self) -> Path:
        return self.root / "predictions"

    @property
    def sweeps_dir(self) -> Path:
        return self.root / "sweeps"

    def report(self, name: str) -> Path:
        return self.reports_dir / name

    def has_dataset(self) -> bool:
        return (self.dataset_dir / "manifest.json").is_file()

    def has_bundle(self) -> bool:
        return self.bundle_manifest.is_file()

    def read_manifest(self) -> RunManifest:
        """Return the current manifest, or a fresh one when absent or unreadable."""
        if not self.manifest_path.is_file():
            return RunManifest()
        try:
            return RunManifest.model_validate_json(self.manifest_path.read_text(encoding="utf-8"))
        except ValidationError:
            logger.warning("Ignoring unreadable run manifest", extra={"path": str(self.manifest_path)})
            return RunManifest()

    def record_command(self, command: str, config: RunConfig, **options: Any) -> RunManifest:
        """Append ``command`` to the manifest and refresh its configuration echo."""
        manifest = self.read_manifest()
        manifest.config = config.model_dump(mode="json")
        manifest.seeds = derived_seeds(config)
        manifest.git_describe = git_describe()
        manifest.version = __init__conf__.version
        manifest.commands.append(CommandEntry(command=command, options=_plain(options), started_at=datetime.now(timezone.utc).isoformat(timespec="seconds")))
        self.root.mkdir(parents=True, exist_ok=True)
        temp = self.manifest_path.with_name(MANIFEST_NAME + ".tmp")
        temp.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        temp.replace(self.manifest_path)
        logger.debug("Recorded command in run manifest", extra={"command": command, "path": str(self.manifest_path)})
        return manifest


def _plain(options: dict[str, Any]) -> dict[str, Any]:
    return {key: str(value) if isinstance(value, Path) else value for key, value in options.items()}


__all__ = [
    "MANIFEST_NAME",
    "CommandEntry",
    "RunDirectory",
    "RunManifest",
    "derived_seeds",
    "git_describe",
]
