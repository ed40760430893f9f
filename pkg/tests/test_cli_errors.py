"""Tests for CLI error handling utilities.

Tests cover:
- Domain, configuration and unexpected error handlers
- Exit codes
- Error message formatting
- Logging behavior
- Usage errors remapped to exit code 1

All tests are OS-agnostic (pure Python error handling and logging).
"""

from __future__ import annotations

import logging

import pytest
import rich_click as click
from click.testing import CliRunner

from siw_inverse.cli_errors import (
    DATA_EXIT_CODE,
    USAGE_EXIT_CODE,
    UsageExitGroup,
    handle_config_error,
    handle_domain_error,
    handle_generic_error,
)
from siw_inverse.errors import MissingArtifactError, NonFiniteError
from siw_inverse.run_config import RunConfigError

# ============================================================================
# Tests: Domain Error Handling
# ============================================================================


class TestDomainErrorExitBehavior:
    """Diagnosable data and model failures exit with code 2."""

    @pytest.mark.os_agnostic
    def test_handler_exits_with_code_two(self) -> None:
        with pytest.raises(SystemExit) as excinfo:
            handle_domain_error(MissingArtifactError("dataset in siw_run/dataset", hint="siw_inverse generate"), operation="Train")

        assert excinfo.value.code == DATA_EXIT_CODE == 2

    @pytest.mark.os_agnostic
    def test_handler_shows_the_message_verbatim(self, capsys: pytest.CaptureFixture[str]) -> None:
        with pytest.raises(SystemExit):
            handle_domain_error(NonFiniteError("fim: non-finite training loss", epoch=3, batch=7), operation="Train")

        captured = capsys.readouterr()
        assert "fim: non-finite training loss" in captured.err
        assert "epoch 3" in captured.err

    @pytest.mark.os_agnostic
    def test_handler_logs_the_operation_and_type(self, caplog: pytest.LogCaptureFixture) -> None:
        exc = MissingArtifactError("trained models in siw_run/models", hint="siw_inverse train --model all")

        with caplog.at_level(logging.ERROR), pytest.raises(SystemExit):
            handle_domain_error(exc, operation="Evaluate")

        record = next(r for r in caplog.records if "Evaluate failed" in r.getMessage())
        assert getattr(record, "error_type") == "MissingArtifactError"


# ============================================================================
# Tests: Configuration Error Handling
# ============================================================================


class TestConfigErrorHandling:
    """Invalid configuration counts as a usage error."""

    @pytest.mark.os_agnostic
    def test_handler_exits_with_code_one(self) -> None:
        with pytest.raises(SystemExit) as excinfo:
            handle_config_error(RunConfigError("invalid run configuration: seed"), operation="Generate")

        assert excinfo.value.code == USAGE_EXIT_CODE == 1

    @pytest.mark.os_agnostic
    def test_handler_displays_the_reason(self, capsys: pytest.CaptureFixture[str]) -> None:
        with pytest.raises(SystemExit):
            handle_config_error(RunConfigError("configuration file run.json is not valid JSON"), operation="Train")

        assert "Error: configuration file run.json is not valid JSON" in capsys.readouterr().err


# ============================================================================
# Tests: Generic Error Handling
# ============================================================================


class TestGenericErrorHandling:
    """Unexpected failures exit with code 2 and keep their traceback in the log."""

    @pytest.mark.os_agnostic
    def test_handler_exits_with_code_two(self) -> None:
        with pytest.raises(SystemExit) as excinfo:
            handle_generic_error(RuntimeError("boom"), operation="Sweep")

        assert excinfo.value.code == 2

    @pytest.mark.os_agnostic
    def test_handler_logs_with_exc_info(self, caplog: pytest.LogCaptureFixture) -> None:
        try:
            raise RuntimeError("boom")
        except RuntimeError as exc:
            with caplog.at_level(logging.ERROR), pytest.raises(SystemExit):
                handle_generic_error(exc, operation="Sweep")

        assert any(record.exc_info for record in caplog.records if "Sweep failed" in record.getMessage())


# ============================================================================
# Tests: Usage Errors
# ============================================================================


@click.group(cls=UsageExitGroup)
def _demo() -> None:
    """Demo group."""


@_demo.command("run")
@click.option("--count", type=int, required=True)
def _demo_run(count: int) -> None:
    click.echo(f"ran {count}")


class TestUsageExitGroup:
    """Click usage errors exit with code 1 instead of 2."""

    @pytest.mark.os_agnostic
    def test_unknown_subcommand(self) -> None:
        result = CliRunner().invoke(_demo, ["nope"])

        assert result.exit_code == 1

    @pytest.mark.os_agnostic
    def test_missing_option(self) -> None:
        result = CliRunner().invoke(_demo, ["run"])

        assert result.exit_code == 1

    @pytest.mark.os_agnostic
    def test_bad_option_value(self) -> None:
        result = CliRunner().invoke(_demo, ["run", "--count", "many"])

        assert result.exit_code == 1

    @pytest.mark.os_agnostic
    def test_valid_call_passes_through(self) -> None:
        result = CliRunner().invoke(_demo, ["run", "--count", "3"])

        assert result.exit_code == 0
        assert "ran 3" in result.output
