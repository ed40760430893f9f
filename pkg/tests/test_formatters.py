"""Tests for report writers and console renderers.

Tests cover:
- The spectrum CSV format accepted by ``predict`` and ``verify``
- CSV reports (learning curves, traces, histograms, loop-back results, sweeps)
- ``predict`` JSON output
- Rich console tables

All tests are OS-agnostic (file IO under tmp_path and in-memory consoles).
"""

from __future__ import annotations

import csv
import json
from io import StringIO
from pathlib import Path

import numpy as np
import pytest
from rich.console import Console

from siw_inverse.errors import GridMismatchError
from siw_inverse.evaluation import IterationTrace, MetricRow, MetricsReport, TrendReport, Verdict, VerifyItem, VerifyReport, error_histogram
from siw_inverse.formatters import (
    display_metrics,
    display_trend,
    display_verify,
    format_prediction_json,
    read_spectrum_csv,
    read_trace,
    sweep_summary,
    training_summary,
    write_histograms,
    write_spectrum_csv,
    write_sweep,
    write_train_record,
    write_trace,
    write_verify,
)
from siw_inverse.models import REFERENCE_GEOMETRY, FrequencyGrid, Spectrum, SubstrateSpec, TrainRecord
from siw_inverse.pipeline import Estimate
from siw_inverse.wave_core import simulate

GRID = FrequencyGrid(9.0, 20.0, 23)


def _rows(path: Path) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def _console() -> tuple[Console, StringIO]:
    buffer = StringIO()
    return Console(file=buffer, width=120, force_terminal=False, legacy_windows=False), buffer


def _a_trend(verdict: Verdict = "decreasing") -> TrendReport:
    return TrendReport(
        parameter="D1",
        values=(4.5, 5.5),
        lowest=(10.221, None),
        resonances=((10.221, 11.2), ()),
        verdict=verdict,
        g_values=(26.0, 26.0),
    )


# ============================================================================
# Spectrum files
# ============================================================================


class TestSpectrumCsv:
    """Spectra written to CSV read back on the same grid."""

    @pytest.mark.os_agnostic
    def test_round_trip(self, tmp_path: Path) -> None:
        spectrum = simulate(SubstrateSpec(), REFERENCE_GEOMETRY, GRID)

        loaded = read_spectrum_csv(write_spectrum_csv(spectrum, tmp_path / "s.csv"), GRID)

        assert np.allclose(loaded.s11_mag, spectrum.s11_mag, rtol=1e-11)
        assert np.allclose(loaded.s21_mag, spectrum.s21_mag, rtol=1e-11)

    @pytest.mark.os_agnostic
    def test_wrong_header(self, tmp_path: Path) -> None:
        path = tmp_path / "s.csv"
        path.write_text("f,a,b\n9,0.5,0.5\n", encoding="utf-8")

        with pytest.raises(GridMismatchError, match="header"):
            read_spectrum_csv(path, GRID)

    @pytest.mark.os_agnostic
    def test_other_point_count(self, tmp_path: Path) -> None:
        spectrum = Spectrum.from_features(np.full(46, 0.5), GRID)
        path = write_spectrum_csv(spectrum, tmp_path / "s.csv")

        with pytest.raises(GridMismatchError, match="23 frequency points"):
            read_spectrum_csv(path, FrequencyGrid(9.0, 20.0, 24))

    @pytest.mark.os_agnostic
    def test_shifted_frequencies(self, tmp_path: Path) -> None:
        spectrum = Spectrum.from_features(np.full(46, 0.5), GRID)
        path = write_spectrum_csv(spectrum, tmp_path / "s.csv")

        with pytest.raises(GridMismatchError, match="not sampled on the training grid"):
            read_spectrum_csv(path, FrequencyGrid(9.1, 20.1, 23))

    @pytest.mark.os_agnostic
    def test_non_numeric_cell(self, tmp_path: Path) -> None:
        path = tmp_path / "s.csv"
        path.write_text("frequency_GHz,s11_mag,s21_mag\n9,n/a,0.5\n20,0.5,0.5\n", encoding="utf-8")

        with pytest.raises(GridMismatchError, match="non-numeric"):
            read_spectrum_csv(path, FrequencyGrid(9.0, 20.0, 2))


# ============================================================================
# CSV reports
# ============================================================================


class TestReports:
    """Plain CSV reports."""

    @pytest.mark.os_agnostic
    def test_learning_curve_has_one_row_per_epoch(self, tmp_path: Path) -> None:
        record = TrainRecord(train_mse=[0.3, 0.2], val_mse=[0.4, 0.3], train_mae=[0.5, 0.4], val_mae=[0.6, 0.5])

        rows = _rows(write_train_record(record, tmp_path / "fim.csv"))

        assert rows[0] == ["epoch", "train_mse", "val_mse", "train_mae", "val_mae"]
        assert rows[2] == ["2", "0.2", "0.3", "0.4", "0.5"]

    @pytest.mark.os_agnostic
    def test_trace_round_trip_is_exact(self, tmp_path: Path) -> None:
        trace = IterationTrace(iterations=(0, 1, 2), mse=(0.1 / 3, 0.02, 0.01), mae=(0.2, 0.1 / 7, 0.05))

        assert read_trace(write_trace(trace, tmp_path / "trace.csv")) == trace

    @pytest.mark.os_agnostic
    def test_histogram_rows_include_under_and_overflow(self, tmp_path: Path) -> None:
        histogram = error_histogram([1e-7, 0.01, 2.0], "mse", model="irc")

        rows = _rows(write_histograms([histogram], tmp_path / "hist.csv"))

        assert len(rows) == 1 + 52
        assert rows[1] == ["irc", "mse", "-inf", "-5.0", "1"]
        assert rows[-1] == ["irc", "mse", "0.0", "inf", "1"]

    @pytest.mark.os_agnostic
    def test_infeasible_designs_leave_the_geometry_blank(self, tmp_path: Path) -> None:
        report = VerifyReport(
            channel="s21",
            items=(
                VerifyItem(0, "fim", REFERENCE_GEOMETRY, 0.001),
                VerifyItem(0, "irc", None, None, "G would need to exceed 33"),
            ),
        )

        rows = _rows(write_verify(report, tmp_path / "verify.csv"))

        assert rows[1][:5] == ["0", "fim", "s21", "0.001", "5.5"]
        assert rows[2][3:10] == [""] * 7
        assert rows[2][-1] == "G would need to exceed 33"

    @pytest.mark.os_agnostic
    def test_sweep_rows_and_summary(self, tmp_path: Path) -> None:
        rows = _rows(write_sweep(_a_trend(), tmp_path / "sweep.csv"))
        summary = sweep_summary(_a_trend())

        assert rows[1] == ["D1", "4.5", "26.0", "10.221", "10.221 11.2"]
        assert rows[2][3:] == ["", ""]
        assert summary["verdict"] == "decreasing"
        assert summary["lowest_resonance_GHz"] == [10.221, None]


# ============================================================================
# predict output
# ============================================================================


def _an_estimate(shift: float = 0.0) -> Estimate:
    return Estimate(normalized=np.full(6, 0.5 + shift), physical=np.array(REFERENCE_GEOMETRY.as_tuple()) + shift)


class TestPredictionJson:
    """``predict`` prints the final parameters and the iteration trace."""

    @pytest.mark.os_agnostic
    def test_fim_output(self) -> None:
        data = json.loads(format_prediction_json("fim", fim=_an_estimate()))

        assert data["parameters"]["D1"] == 5.5
        assert [step["iteration"] for step in data["trace"]] == [0]

    @pytest.mark.os_agnostic
    def test_irc_output_ends_at_the_last_iterate(self) -> None:
        data = json.loads(format_prediction_json("irc", iterations=[_an_estimate(), _an_estimate(0.1), _an_estimate(0.2)]))

        assert data["model"] == "irc"
        assert data["parameters"]["G"] == pytest.approx(26.2)
        assert len(data["trace"]) == 3


# ============================================================================
# Console tables
# ============================================================================


class TestConsoleTables:
    """Rich tables for humans."""

    @pytest.mark.os_agnostic
    def test_training_summary_reads_the_best_epoch(self) -> None:
        record = TrainRecord(train_mse=[1.0, 0.5, 0.6], val_mse=[0.4, 0.25, 0.3], best_epoch=2, wall_time_s=1.5)

        assert training_summary("fim", record) == "   fim: 3 epochs, best epoch 2, val MSE 2.500e-01, 1.5 s"

    @pytest.mark.os_agnostic
    def test_training_summary_without_an_improving_epoch_reports_no_mse(self) -> None:
        record = TrainRecord(train_mse=[float("nan")] * 2, val_mse=[float("nan"), 0.7], best_epoch=0)

        summary = training_summary("ffm", record)

        assert "no improving epoch" in summary
        assert "0.7" not in summary

    @pytest.mark.os_agnostic
    def test_metrics_table_skips_the_all_split(self) -> None:
        report = MetricsReport(
            rows=(
                MetricRow("fim", "test", 14, 0.01, 0.05, (0.0,) * 6),
                MetricRow("fim", "all", 72, 0.02, 0.06, (0.0,) * 6),
            )
        )
        console, buffer = _console()

        display_metrics(report, console)

        assert "test" in buffer.getvalue()
        assert "72" not in buffer.getvalue()

    @pytest.mark.os_agnostic
    def test_trend_prints_the_verdict(self) -> None:
        console, buffer = _console()

        display_trend(_a_trend("mixed"), console)

        assert "Verdict: mixed" in buffer.getvalue()

    @pytest.mark.os_agnostic
    def test_verify_counts_infeasible_designs(self) -> None:
        report = VerifyReport("s11", (VerifyItem(0, "irc", None, None, "infeasible"),))
        console, buffer = _console()

        display_verify(report, console)

        output = buffer.getvalue()
        assert "|S11|" in output
        assert "irc" in output
