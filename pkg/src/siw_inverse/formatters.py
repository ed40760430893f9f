"""Report writers and console renderers.

Purpose
-------
Keep file formats and terminal output out of the numerical modules. Every
report is plain CSV or JSON so it can be plotted or re-checked by other
tools; the rich tables are for humans only.

Contents
--------
* CSV writers for learning curves, metrics, traces, histograms, comparison
  tables, loop-back results, sweeps and raw predictions.
* :func:`read_spectrum_csv` / :func:`write_spectrum_csv` - the spectrum file
  format accepted by ``predict`` and ``verify``.
* :func:`format_prediction_json` - ``predict`` output.
* ``display_*`` - rich console tables.

Floats are written with ``repr`` so a CSV round trip is exact.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from typing import TYPE_CHECKING, Any

import numpy as np
from rich.console import Console
from rich.table import Table

from .errors import GridMismatchError
from .evaluation import IterationTrace
from .models import PARAMETER_NAMES, Spectrum

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path

    from .evaluation import BenchmarkReport, ComparisonTable, ErrorHistogram, MetricsReport, TrendReport, VerifyReport
    from .models import FrequencyGrid, TrainRecord
    from .neural import Array
    from .pipeline import Estimate, HybridEstimate

SPECTRUM_HEADER = ("frequency_GHz", "s11_mag", "s21_mag")

#: Allowed deviation between a file's frequency column and the training grid, in GHz.
FREQUENCY_TOLERANCE_GHZ = 1e-6


# ============================================================================
# Writing helpers
# ============================================================================


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_name(path.name + ".tmp")
    temp.write_text(text, encoding="utf-8", newline="")
    temp.replace(path)
    return path


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    return _write_text(path, _csv_text(header, rows))


def write_json(path: Path, data: Any) -> Path:
    """Write ``data`` as indented JSON with sorted keys."""
    return _write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


# ============================================================================
# Reports
# ============================================================================


def write_train_record(record: TrainRecord, path: Path) -> Path:
    """Learning curve: one row per epoch (1-based)."""
    rows = zip(range(1, record.epochs + 1), record.train_mse, record.val_mse, record.train_mae, record.val_mae, strict=True)
    return write_csv(path, ("epoch", "train_mse", "val_mse", "train_mae", "val_mae"), rows)


def training_summary(name: str, record: TrainRecord) -> str:
    """One console line per trained network; a run without an improving epoch has no best MSE."""
    best = record.best_val_mse
    if best is None:
        return f"{name:>6}: {record.epochs} epochs, no improving epoch, {record.wall_time_s:.1f} s"
    return f"{name:>6}: {record.epochs} epochs, best epoch {record.best_epoch}, val MSE {best:.3e}, {record.wall_time_s:.1f} s"


def write_metrics(report: MetricsReport, path: Path) -> Path:
    header = ("model", "split", "samples", "mse", "mae", *(f"mae_{name}" for name in PARAMETER_NAMES))
    return write_csv(path, header, ((r.model, r.split, r.samples, r.mse, r.mae, *r.parameter_mae) for r in report.rows))


def write_trace(trace: IterationTrace, path: Path) -> Path:
    return write_csv(path, ("iteration", "mse", "mae"), zip(trace.iterations, trace.mse, trace.mae, strict=True))


def read_trace(path: Path) -> IterationTrace:
    """Parse a file written by :func:`write_trace`."""
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    return IterationTrace(
        iterations=tuple(int(row["iteration"]) for row in rows),
        mse=tuple(float(row["mse"]) for row in rows),
        mae=tuple(float(row["mae"]) for row in rows),
    )


def write_histograms(histograms: Sequence[ErrorHistogram], path: Path) -> Path:
    """One row per model and bin; under- and overflow use open-ended bounds."""
    rows: list[tuple[object, ...]] = []
    for hist in histograms:
        rows.append((hist.model, hist.metric, "-inf", hist.edges[0], hist.underflow))
        rows.extend((hist.model, hist.metric, low, high, count) for low, high, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts, strict=True))
        rows.append((hist.model, hist.metric, hist.edges[-1], "inf", hist.overflow))
    return write_csv(path, ("model", "metric", "log10_low", "log10_high", "count"), rows)


def write_comparison(table: ComparisonTable, path: Path) -> Path:
    rows = ((r.parameter, r.fim, r.hifr2, r.irc, r.truth, table.reference.get(r.parameter, "")) for r in table.rows)
    return write_csv(path, ("parameter", "fim", "hifr2", "irc", "truth", "reference_irc"), rows)


def write_verify(report: VerifyReport, path: Path) -> Path:
    rows: list[tuple[object, ...]] = []
    for item in report.items:
        values: tuple[object, ...] = item.geometry.as_tuple() if item.geometry is not None else ("",) * len(PARAMETER_NAMES)
        rows.append((item.target, item.model, report.channel, "" if item.spectrum_mse is None else item.spectrum_mse, *values, item.error or ""))
    return write_csv(path, ("target", "model", "channel", "spectrum_mse", *PARAMETER_NAMES, "error"), rows)


def write_sweep(report: TrendReport, path: Path) -> Path:
    """One row per swept value with the lowest resonance and all resonances (space separated)."""
    g_values = report.g_values or (None,) * len(report.values)
    rows = (
        (report.parameter, value, "" if g is None else g, "" if lowest is None else lowest, " ".join(repr(f) for f in found))
        for value, g, lowest, found in zip(report.values, g_values, report.lowest, report.resonances, strict=True)
    )
    return write_csv(path, ("parameter", "value", "G", "lowest_resonance_GHz", "resonances_GHz"), rows)


def sweep_summary(report: TrendReport) -> dict[str, Any]:
    return {
        "parameter": report.parameter,
        "values": list(report.values),
        "lowest_resonance_GHz": list(report.lowest),
        "resonances_GHz": [list(found) for found in report.resonances],
        "verdict": report.verdict,
        "g_values": list(report.g_values),
    }


def write_predictions(ordinals: Sequence[int], truth: Array, predictions: dict[str, Array], path: Path) -> Path:
    """Raw normalised predictions so metrics can be recomputed independently."""
    header = ("ordinal", "model", *(f"true_{n}" for n in PARAMETER_NAMES), *(f"pred_{n}" for n in PARAMETER_NAMES))
    rows = (
        (ordinal, model, *(float(v) for v in truth[k]), *(float(v) for v in pred[k]))
        for model, pred in predictions.items()
        for k, ordinal in enumerate(ordinals)
    )
    return write_csv(path, header, rows)


def benchmark_summary(report: BenchmarkReport) -> dict[str, Any]:
    return {"samples": report.samples, "spectra_per_s": report.throughput, "below_threshold": list(report.below_threshold)}


# ============================================================================
# Spectrum files
# ============================================================================


def write_spectrum_csv(spectrum: Spectrum, path: Path) -> Path:
    rows = zip(spectrum.grid.frequencies(), spectrum.s11_mag, spectrum.s21_mag, strict=True)
    return write_csv(path, SPECTRUM_HEADER, ((f"{f:.12g}", f"{a:.12g}", f"{b:.12g}") for f, a, b in rows))


def read_spectrum_csv(path: Path, grid: FrequencyGrid) -> Spectrum:
    """Read a ``frequency_GHz,s11_mag,s21_mag`` file sampled exactly on ``grid``.

    Raises
    ------
    GridMismatchError
        When the header, row count or frequencies differ from ``grid``.
    """
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(cell.strip() for cell in next(reader, ()))
        rows = [row for row in reader if row]
    if header != SPECTRUM_HEADER:
        raise GridMismatchError(f"{path} must start with the header {','.join(SPECTRUM_HEADER)}, got {','.join(header)}")
    if len(rows) != grid.n_points:
        raise GridMismatchError(f"{path} holds {len(rows)} frequency points, the training grid has {grid.n_points}")
    try:
        data = np.asarray([[float(cell) for cell in row[:3]] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise GridMismatchError(f"{path} contains a non-numeric value: {exc}") from exc
    if data.shape != (grid.n_points, 3) or np.max(np.abs(data[:, 0] - grid.frequencies())) > FREQUENCY_TOLERANCE_GHZ:
        raise GridMismatchError(f"{path} is not sampled on the training grid {grid.f_start_ghz}-{grid.f_stop_ghz} GHz / {grid.n_points} points")
    return Spectrum(s11_mag=data[:, 1].copy(), s21_mag=data[:, 2].copy(), grid=grid)


# ============================================================================
# predict output
# ============================================================================


def _estimate_json(estimate: Estimate) -> dict[str, Any]:
    return {"parameters": estimate.as_dict(), "normalized": [float(v) for v in estimate.normalized]}


def format_prediction_json(model: str, *, fim: Estimate | None = None, hybrid: HybridEstimate | None = None, iterations: Sequence[Estimate] = ()) -> str:
    """Render a ``predict`` result: final physical parameters plus the per-iteration trace."""
    data: dict[str, Any] = {"model": model}
    if fim is not None:
        data["parameters"] = fim.as_dict()
        data["trace"] = [{"iteration": 0, **_estimate_json(fim)}]
    if hybrid is not None:
        data["parameters"] = hybrid.refined.as_dict()
        data["initial"] = _estimate_json(hybrid.initial)
        data["correction"] = [float(v) for v in hybrid.correction]
        data["trace"] = [{"iteration": 0, **_estimate_json(hybrid.initial)}, {"iteration": 1, **_estimate_json(hybrid.refined)}]
    if iterations:
        data["parameters"] = iterations[-1].as_dict()
        data["trace"] = [{"iteration": i, **_estimate_json(e)} for i, e in enumerate(iterations)]
    return json.dumps(data, indent=2)


# ============================================================================
# Console tables
# ============================================================================


def _console(console: Console | None) -> Console:
    return console if console is not None else Console(file=sys.stdout, legacy_windows=False)


def display_metrics(report: MetricsReport, console: Console | None = None) -> None:
    table = Table(title="Prediction error (normalised units)", show_header=True, header_style="bold cyan")
    table.add_column("Model", style="bold", no_wrap=True)
    table.add_column("Split")
    table.add_column("N", justify="right")
    table.add_column("MSE", justify="right")
    table.add_column("MAE", justify="right")
    for row in report.rows:
        if row.split == "all":
            continue
        table.add_row(row.model, row.split, str(row.samples), f"{row.mse:.3e}", f"{row.mae:.3e}")
    _console(console).print(table)


def display_trace(trace: IterationTrace, console: Console | None = None) -> None:
    table = Table(title="IRC iterations (all samples)", show_header=True, header_style="bold cyan")
    table.add_column("Iteration", justify="right")
    table.add_column("MSE", justify="right")
    table.add_column("MAE", justify="right")
    for iteration, mse, mae in zip(trace.iterations, trace.mse, trace.mae, strict=True):
        table.add_row(str(iteration), f"{mse:.3e}", f"{mae:.3e}")
    _console(console).print(table)


def display_comparison(table_data: ComparisonTable, console: Console | None = None) -> None:
    table = Table(title="Predicted vs true geometry", show_header=True, header_style="bold cyan")
    for column in ("Parameter", "FIM", "HiFR2", "IRC", "Truth"):
        table.add_column(column, justify="right" if column != "Parameter" else "left")
    for row in table_data.rows:
        table.add_row(row.parameter, f"{row.fim:.4f}", f"{row.hifr2:.4f}", f"{row.irc:.4f}", f"{row.truth:.4f}")
    _console(console).print(table)


def display_trend(report: TrendReport, console: Console | None = None) -> None:
    color = "green" if report.verdict == "decreasing" else "yellow"
    table = Table(title=f"Sweep of {report.parameter}", show_header=True, header_style="bold cyan")
    table.add_column(report.parameter, justify="right")
    table.add_column("Lowest resonance (GHz)", justify="right")
    table.add_column("All resonances (GHz)")
    for value, lowest, found in zip(report.values, report.lowest, report.resonances, strict=True):
        table.add_row(f"{value:g}", "-" if lowest is None else f"{lowest:.3f}", ", ".join(f"{f:.3f}" for f in found) or "-")
    out = _console(console)
    out.print(table)
    out.print(f"Verdict: [{color}]{report.verdict}[/{color}]")


def display_verify(report: VerifyReport, console: Console | None = None) -> None:
    table = Table(title=f"Loop-back |{report.channel.upper()}| error", show_header=True, header_style="bold cyan")
    table.add_column("Model", style="bold")
    table.add_column("Mean spectrum MSE", justify="right")
    table.add_column("Infeasible", justify="right")
    for model in dict.fromkeys(item.model for item in report.items):
        mean = report.mean_mse(model)
        infeasible = sum(1 for item in report.items if item.model == model and item.error is not None)
        table.add_row(model, "-" if mean is None else f"{mean:.3e}", str(infeasible))
    _console(console).print(table)


__all__ = [
    "FREQUENCY_TOLERANCE_GHZ",
    "SPECTRUM_HEADER",
    "benchmark_summary",
    "display_comparison",
    "display_metrics",
    "display_trace",
    "display_trend",
    "display_verify",
    "format_prediction_json",
    "read_spectrum_csv",
    "read_trace",
    "sweep_summary",
    "training_summary",
    "write_comparison",
    "write_csv",
    "write_histograms",
    "write_json",
    "write_metrics",
    "write_predictions",
    "write_spectrum_csv",
    "write_sweep",
    "write_train_record",
    "write_trace",
    "write_verify",
]
