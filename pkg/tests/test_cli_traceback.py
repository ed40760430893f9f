"""Traceback preferences and the error budget chosen by ``main``.

All tests use the isolated_traceback_config fixture to prevent state leakage
between tests.
"""

from __future__ import annotations

from typing import Any

import lib_cli_exit_tools
import pytest

from siw_inverse import cli as cli_mod
from siw_inverse.cli_traceback import (
    TRACEBACK_SUMMARY_LIMIT,
    TRACEBACK_VERBOSE_LIMIT,
    apply_traceback_preferences,
    restore_traceback_state,
    snapshot_traceback_state,
)

pytestmark = pytest.mark.usefixtures("isolated_traceback_config")


def _failing_run_cli(*_args: Any, **_kwargs: Any) -> int:
    raise RuntimeError("solver crashed")


def _capture_limits(monkeypatch: pytest.MonkeyPatch) -> list[tuple[bool, int]]:
    seen: list[tuple[bool, int]] = []

    def _print(*, trace_back: bool, length_limit: int, **_: Any) -> None:
        seen.append((trace_back, length_limit))

    monkeypatch.setattr(lib_cli_exit_tools, "run_cli", _failing_run_cli)
    monkeypatch.setattr(lib_cli_exit_tools, "print_exception_message", _print)
    return seen


# ============================================================================
# Tests: flag handling
# ============================================================================


class TestTracebackFlags:
    """Both lib_cli_exit_tools flags move together."""

    @pytest.mark.os_agnostic
    def test_enable_then_disable(self) -> None:
        apply_traceback_preferences(enabled=True)
        assert snapshot_traceback_state() == (True, True)

        apply_traceback_preferences(enabled=False)
        assert snapshot_traceback_state() == (False, False)

    @pytest.mark.os_agnostic
    def test_restore_brings_back_a_mixed_state(self) -> None:
        lib_cli_exit_tools.config.traceback = True
        lib_cli_exit_tools.config.traceback_force_color = False
        saved = snapshot_traceback_state()
        apply_traceback_preferences(enabled=False)

        restore_traceback_state(saved)

        assert snapshot_traceback_state() == (True, False)


# ============================================================================
# Tests: error budget in main
# ============================================================================


class TestErrorBudget:
    """An escaped exception is summarised, or printed in full with ``--traceback``."""

    @pytest.mark.os_agnostic
    def test_verbose_budget_is_larger(self) -> None:
        assert TRACEBACK_VERBOSE_LIMIT > TRACEBACK_SUMMARY_LIMIT > 0

    @pytest.mark.os_agnostic
    def test_summary_without_traceback(self, monkeypatch: pytest.MonkeyPatch) -> None:
        seen = _capture_limits(monkeypatch)

        exit_code = cli_mod.main(["info"])

        assert exit_code != 0
        assert seen == [(False, TRACEBACK_SUMMARY_LIMIT)]

    @pytest.mark.os_agnostic
    def test_full_story_when_traceback_was_requested(self, monkeypatch: pytest.MonkeyPatch, preserve_traceback_state: None) -> None:
        seen = _capture_limits(monkeypatch)
        apply_traceback_preferences(enabled=True)

        cli_mod.main(["info"], verbose_limit=1234)

        assert seen == [(True, 1234)]
        assert snapshot_traceback_state() == (True, True)
