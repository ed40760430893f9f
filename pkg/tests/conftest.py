"""Shared pytest fixtures and configuration for the test suite.

This module provides:
- OS-specific test markers (windows_only, macos_only, posix_only, linux_only)
- CLI runner and traceback-state fixtures
- A small simulated dataset, a shrunk run configuration and a trained bundle
  so pipeline, evaluation and CLI tests finish in seconds
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import fields
from pathlib import Path
from typing import TYPE_CHECKING, Any

import lib_cli_exit_tools
import numpy as np
import pytest
from click.testing import CliRunner

from siw_inverse import dataset as ds
from siw_inverse.models import FrequencyGrid, ParameterGrid, RunConfig, SubstrateSpec
from siw_inverse.pipeline import PipelineBundle, train_fim, train_hifr2, train_irc

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator

# ============================================================================
# OS Detection Constants
# ============================================================================

IS_WINDOWS = sys.platform == "win32"
IS_MACOS = sys.platform == "darwin"
IS_LINUX = sys.platform.startswith("linux")
IS_POSIX = not IS_WINDOWS

ANSI_ESCAPE_PATTERN = re.compile(r"\x1B\[[0-?]*[ -/]*[@-~]")
CONFIG_FIELDS: tuple[str, ...] = tuple(field.name for field in fields(type(lib_cli_exit_tools.config)))

FIXTURES_DIR = Path(__file__).parent / "fixtures"

#: 72 geometries on a 21-point grid; enough rows for a split, small enough to simulate instantly.
TINY_RUN: dict[str, Any] = {
    "seed": 42,
    "workers": 1,
    "parameter_grid": {"d_values": [5.0, 6.0, 7.0], "r_values": [0.2, 0.4], "g_values": [30.0, 32.0]},
    "frequency_grid": {"f_start_ghz": 9.0, "f_stop_ghz": 20.0, "n_points": 21},
    "architecture": {"fim_hidden": [16, 8], "ffm_hidden": [8, 16], "irc_hidden": [8], "dropout": 0.1},
    "training": {
        "fim": {"batch_size": 16, "max_epochs": 4, "patience": 2},
        "ffm": {"batch_size": 16, "max_epochs": 3, "patience": 2},
        "rrm": {"batch_size": 16, "max_epochs": 3, "patience": 2},
        "irc": {"batch_size": 16, "max_epochs": 2, "patience": None},
    },
    "irc_iterations": 2,
    "evaluation": {"verify_targets": 3},
}


# ============================================================================
# Pytest Hooks - OS-Specific Test Markers
# ============================================================================


def pytest_configure(config: pytest.Config) -> None:
    """Register custom markers for OS-specific and integration tests."""
    for line in (
        "windows_only: mark test to run only on Windows",
        "macos_only: mark test to run only on macOS",
        "linux_only: mark test to run only on Linux",
        "posix_only: mark test to run only on POSIX systems (Linux, macOS, Unix)",
        "os_agnostic: mark test as platform-independent (runs everywhere)",
        "integration: mark test as integration test (tests multiple components)",
        "slow: mark test as slow-running (typically >1 second)",
    ):
        config.addinivalue_line("markers", line)


def pytest_runtest_setup(item: pytest.Item) -> None:
    """Skip tests whose OS marker does not match the current platform."""
    marker_names = {mark.name for mark in item.iter_markers()}

    if "windows_only" in marker_names and not IS_WINDOWS:
        pytest.skip("Test requires Windows")
    if "macos_only" in marker_names and not IS_MACOS:
        pytest.skip("Test requires macOS")
    if "linux_only" in marker_names and not IS_LINUX:
        pytest.skip("Test requires Linux")
    if "posix_only" in marker_names and not IS_POSIX:
        pytest.skip("Test requires POSIX system (Linux, macOS, or Unix)")


def _snapshot_cli_config() -> dict[str, object]:
    return {name: getattr(lib_cli_exit_tools.config, name) for name in CONFIG_FIELDS}


def _restore_cli_config(snapshot: dict[str, object]) -> None:
    for name, value in snapshot.items():
        setattr(lib_cli_exit_tools.config, name, value)


# ============================================================================
# CLI Fixtures
# ============================================================================


@pytest.fixture
def cli_runner() -> CliRunner:
    """Provide a fresh :class:`CliRunner` per test."""
    return CliRunner()


@pytest.fixture
def strip_ansi() -> Callable[[str], str]:
    """Return a helper that strips ANSI escape sequences from a string."""

    def _strip(value: str) -> str:
        return ANSI_ESCAPE_PATTERN.sub("", value)

    return _strip


@pytest.fixture
def preserve_traceback_state() -> Iterator[None]:
    """Snapshot and restore the entire ``lib_cli_exit_tools`` configuration."""
    snapshot = _snapshot_cli_config()
    try:
        yield
    finally:
        _restore_cli_config(snapshot)


@pytest.fixture
def isolated_traceback_config(monkeypatch: pytest.MonkeyPatch) -> None:
    """Reset traceback flags to a known baseline before each test."""
    lib_cli_exit_tools.reset_config()
    monkeypatch.setattr(lib_cli_exit_tools.config, "traceback", False, raising=False)
    monkeypatch.setattr(lib_cli_exit_tools.config, "traceback_force_color", False, raising=False)


@pytest.fixture
def tiny_config_file(tmp_path: Path) -> Path:
    """JSON run configuration for end-to-end CLI runs."""
    path = tmp_path / "tiny_run.json"
    path.write_text(json.dumps(TINY_RUN), encoding="utf-8")
    return path


# ============================================================================
# Domain Fixtures - Simulated Data and Trained Networks
# ============================================================================


@pytest.fixture(scope="session")
def tiny_config() -> RunConfig:
    """Shrunk architectures and epoch counts over the 72-geometry grid."""
    return RunConfig.model_validate(TINY_RUN)


@pytest.fixture(scope="session")
def tiny_grid(tiny_config: RunConfig) -> FrequencyGrid:
    return tiny_config.frequency_grid.to_grid()


@pytest.fixture(scope="session")
def tiny_parameter_grid(tiny_config: RunConfig) -> ParameterGrid:
    return tiny_config.parameter_grid.to_grid()


@pytest.fixture(scope="session")
def raw_dataset(tiny_parameter_grid: ParameterGrid, tiny_grid: FrequencyGrid) -> ds.Dataset:
    """Unsplit dataset simulated in-process."""
    return ds.generate(tiny_parameter_grid, SubstrateSpec(), tiny_grid, workers=1)


@pytest.fixture(scope="session")
def prepared_dataset(raw_dataset: ds.Dataset, tiny_config: RunConfig) -> ds.Dataset:
    """Split and normalised copy of :func:`raw_dataset`."""
    return ds.prepare(raw_dataset, tiny_config.split_spec())


@pytest.fixture(scope="session")
def trained_bundle(prepared_dataset: ds.Dataset, tiny_config: RunConfig) -> PipelineBundle:
    """Bundle with every stage trained for a handful of epochs."""
    bundle = PipelineBundle.for_dataset(prepared_dataset)
    bundle.fim, bundle.records["fim"] = train_fim(prepared_dataset, tiny_config)
    bundle.ffm, bundle.rrm, records = train_hifr2(prepared_dataset, bundle.fim, tiny_config)
    bundle.records.update(records)
    bundle.irc, irc_records, bundle.irc_trace = train_irc(prepared_dataset, bundle.fim, tiny_config)
    bundle.records.update(irc_records)
    return bundle


def kink_free_inputs(rng: np.random.Generator, weights: np.ndarray, rows: int, *, margin: float = 1e-3) -> np.ndarray:
    """Draw input rows whose first-layer pre-activations all stay ``margin`` away from zero.

    Central differences straddling a ReLU kink disagree with the analytic
    derivative, so gradient checks sample inputs where that cannot happen.
    """
    chosen: list[np.ndarray] = []
    while len(chosen) < rows:
        candidate = rng.normal(size=weights.shape[1])
        if np.abs(weights @ candidate).min() > margin:
            chosen.append(candidate)
    return np.asarray(chosen)
