"""Workflow steps behind the CLI subcommands.

Purpose
-------
Chain the numerical modules into the reproducible run workflow
``generate → train → evaluate / predict / sweep / verify``. Each step reads
its inputs from and writes its artifacts into a :class:`RunDirectory`, so the
CLI commands stay thin and the steps are callable from tests and notebooks.

Contents
--------
* :func:`generate_dataset` - enumerate, simulate, split and persist.
* :func:`train_models` - train FIM, HiFR²-Net and/or IRC-Net into the bundle.
* :func:`predict_spectrum` - run one pipeline on a spectrum file.
* :func:`evaluate_run` - metrics, trace, histograms, comparison, benchmark.
* :func:`sweep_parameter` - resonance trend of one design parameter.
* :func:`verify_run` - loop-back re-simulation of predicted designs.
* :func:`load_run_dataset` / :func:`load_run_bundle` - artifact access with
  :class:`~siw_inverse.errors.MissingArtifactError` hints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

from . import dataset as ds
from .errors import MissingArtifactError, StageOrderError
from .evaluation import (
    MODEL_NAMES,
    benchmark_inference,
    comparison_table,
    compute_metrics,
    dataset_histograms,
    iteration_trace,
    model_predictions,
    trained_models,
    trend_check,
    verify_designs,
)
from .formatters import (
    benchmark_summary,
    format_prediction_json,
    read_spectrum_csv,
    sweep_summary,
    write_comparison,
    write_histograms,
    write_json,
    write_metrics,
    write_predictions,
    write_sweep,
    write_trace,
    write_train_record,
    write_verify,
)
from .models import PARAMETER_NAMES, REFERENCE_GEOMETRY
from .pipeline import PipelineBundle, load_bundle, normalised_arrays, predict_fim, predict_hifr2, predict_irc, save_bundle, train_fim, train_hifr2, train_irc
from .wave_core import simulate

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from .evaluation import BenchmarkReport, ComparisonTable, ErrorHistogram, IterationTrace, MetricsReport, TrendReport, VerifyReport
    from .models import RunConfig, Spectrum
    from .run_dir import RunDirectory

logger = logging.getLogger(__name__)

TrainTarget = Literal["fim", "hifr2", "irc", "all"]

#: Sweep values used when ``sweep`` is called without ``--values``.
DEFAULT_SWEEP_VALUES: dict[str, tuple[float, ...]] = {
    "D1": (4.5, 5.5, 6.5),
    "D2": (7.0, 8.0, 9.0),
    "R1": (0.1, 0.2, 0.3),
    "R2": (0.3, 0.4, 0.5),
    "R3": (0.6, 0.8, 1.0),
    "G": (26.0, 28.0, 30.0),
}

_GENERATE_HINT = "siw_inverse generate"
_TRAIN_HINT = "siw_inverse train --model all"


# ============================================================================
# Artifact access
# ============================================================================


def load_run_dataset(run: RunDirectory) -> ds.Dataset:
    if not run.has_dataset():
        raise MissingArtifactError(f"dataset in {run.dataset_dir}", hint=_GENERATE_HINT)
    return ds.load(run.dataset_dir)


def load_run_bundle(run: RunDirectory, *, dataset_checksum: str | None = None) -> PipelineBundle:
    if not run.has_bundle():
        raise MissingArtifactError(f"trained models in {run.models_dir}", hint=_TRAIN_HINT)
    return load_bundle(run.models_dir, dataset_checksum=dataset_checksum)


# ============================================================================
# generate / train
# ============================================================================


def generate_dataset(config: RunConfig, run: RunDirectory) -> ds.Dataset:
    """Simulate the configured parameter grid, split it and save it to ``dataset/``."""
    raw = ds.generate(
        config.parameter_grid.to_grid(),
        config.substrate.to_spec(),
        config.frequency_grid.to_grid(),
        workers=config.workers,
    )
    prepared = ds.prepare(raw, config.split_spec(), mode=config.target_mode)
    ds.save(prepared, run.dataset_dir)
    logger.info("Dataset written", extra={"path": str(run.dataset_dir), "samples": len(prepared), "checksum": prepared.checksum})
    return prepared


def _existing_bundle(run: RunDirectory, dataset: ds.Dataset) -> PipelineBundle:
    if run.has_bundle():
        bundle = load_bundle(run.models_dir, dataset_checksum=dataset.checksum)
        if bundle.dataset_checksum == dataset.checksum:
            return bundle
        logger.warning("Discarding models trained on another dataset", extra={"path": str(run.models_dir)})
    return PipelineBundle.for_dataset(dataset)


def _stages(model: TrainTarget) -> tuple[str, ...]:
    return MODEL_NAMES if model == "all" else (model,)


def train_models(config: RunConfig, run: RunDirectory, model: TrainTarget) -> PipelineBundle:
    """Train the requested stages and persist the updated bundle and learning curves.

    Retraining the FIM drops HiFR²-Net and IRC-Net components built on the
    previous FIM.

    Raises
    ------
    StageOrderError
        When ``hifr2`` or ``irc`` is requested before a FIM exists.
    """
    dataset = load_run_dataset(run)
    bundle = _existing_bundle(run, dataset)
    for stage in _stages(model):
        logger.info("Training stage", extra={"stage": stage, "seed": config.seed})
        if stage == "fim":
            bundle.fim, record = train_fim(dataset, config)
            bundle.ffm = bundle.rrm = None
            bundle.irc = None
            bundle.irc_trace = []
            bundle.records = {"fim": record}
        elif stage == "hifr2":
            bundle.ffm, bundle.rrm, records = train_hifr2(dataset, bundle.fim, config)
            bundle.records.update(records)
        else:
            bundle.irc, records, bundle.irc_trace = train_irc(dataset, bundle.fim, config)
            bundle.records = {k: v for k, v in bundle.records.items() if not k.startswith("irc_")} | records
    save_bundle(bundle, run.models_dir, config=config)
    for name, record in bundle.records.items():
        if record.epochs:
            write_train_record(record, run.records_dir / f"{name}.csv")
    return bundle


# ============================================================================
# predict
# ============================================================================


def predict_spectrum(config: RunConfig, run: RunDirectory, model: str, input_path: Path, *, clip: bool = False) -> str:
    """Run one pipeline on a spectrum CSV; return the JSON text and save it under ``predictions/``."""
    bundle = load_run_bundle(run)
    spectrum = read_spectrum_csv(input_path, bundle.frequency_grid)
    clip = clip or config.evaluation.clip
    if model == "fim":
        text = format_prediction_json(model, fim=predict_fim(bundle, spectrum, clip=clip))
    elif model == "hifr2":
        text = format_prediction_json(model, hybrid=predict_hifr2(bundle, spectrum, clip=clip))
    else:
        text = format_prediction_json(model, iterations=predict_irc(bundle, spectrum, clip=clip))
    target = run.predictions_dir / f"{input_path.stem}_{model}.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text + "\n", encoding="utf-8")
    logger.info("Prediction written", extra={"model": model, "input": str(input_path), "path": str(target)})
    return text


# ============================================================================
# evaluate
# ============================================================================


@dataclass(frozen=True)
class EvaluationResult:
    metrics: MetricsReport
    trace: IterationTrace | None
    histograms: dict[str, list[ErrorHistogram]]
    comparison: ComparisonTable | None
    benchmark: BenchmarkReport


def evaluate_run(config: RunConfig, run: RunDirectory) -> EvaluationResult:
    """Score the bundle on its dataset and write every report to ``reports/``.

    Written files: ``metrics.csv``, ``trace.csv`` (when IRC-Net is trained),
    ``histogram_mse.csv``, ``histogram_mae.csv``, ``comparison_table.csv``
    (when all pipelines are trained), ``benchmark.json`` and
    ``predictions/test_predictions.csv``.
    """
    dataset = load_run_dataset(run)
    bundle = load_run_bundle(run, dataset_checksum=dataset.checksum)
    if dataset.split is None:
        raise StageOrderError("dataset has no split; regenerate it")
    trained = trained_models(bundle)

    metrics = compute_metrics(bundle, dataset)
    write_metrics(metrics, run.report("metrics.csv"))

    trace = None
    if "irc" in trained:
        trace = iteration_trace(bundle, dataset)
        write_trace(trace, run.report("trace.csv"))

    histograms = {metric: dataset_histograms(bundle, dataset, metric) for metric in ("mse", "mae")}
    for metric, hists in histograms.items():
        write_histograms(hists, run.report(f"histogram_{metric}.csv"))

    comparison = None
    if len(trained) == len(MODEL_NAMES):
        reference = simulate(dataset.substrate, REFERENCE_GEOMETRY, dataset.frequency_grid)
        comparison = comparison_table(bundle, reference, REFERENCE_GEOMETRY)
        write_comparison(comparison, run.report("comparison_table.csv"))

    test_x, test_y = normalised_arrays(dataset, dataset.split.test)
    write_predictions(dataset.split.test, test_y, model_predictions(bundle, test_x), run.predictions_dir / "test_predictions.csv")

    thresholds = {"fim": config.evaluation.min_fim_throughput, "irc": config.evaluation.min_irc_throughput}
    benchmark = benchmark_inference(bundle, test_x, thresholds=thresholds)
    write_json(run.report("benchmark.json"), benchmark_summary(benchmark))
    logger.info("Evaluation written", extra={"path": str(run.reports_dir), "models": trained})
    return EvaluationResult(metrics, trace, histograms, comparison, benchmark)


# ============================================================================
# sweep / verify
# ============================================================================


def sweep_parameter(config: RunConfig, run: RunDirectory, parameter: str, values: Sequence[float] | None = None) -> TrendReport:
    """Sweep ``parameter`` around the reference geometry and save CSV and JSON reports."""
    if parameter not in PARAMETER_NAMES:
        raise KeyError(f"unknown parameter {parameter!r}")
    swept = tuple(values) if values else DEFAULT_SWEEP_VALUES[parameter]
    report = trend_check(config.substrate.to_spec(), REFERENCE_GEOMETRY, parameter, swept, config.frequency_grid.to_grid())
    write_sweep(report, run.sweeps_dir / f"sweep_{parameter}.csv")
    write_json(run.sweeps_dir / f"sweep_{parameter}.json", sweep_summary(report))
    return report


def _dataset_targets(dataset: ds.Dataset, count: int) -> list[Spectrum]:
    if dataset.split is None:
        raise StageOrderError("dataset has no split; regenerate it")
    return [dataset.sample(i).spectrum for i in dataset.split.test[:count]]


def verify_run(config: RunConfig, run: RunDirectory, *, targets_dir: Path | None = None, channel: str | None = None) -> VerifyReport:
    """Re-simulate predicted designs for target spectra and score them on one channel.

    Targets are every ``*.csv`` in ``targets_dir`` (sorted by name), or the
    first configured number of test-split samples when no directory is given.
    """
    bundle = load_run_bundle(run)
    if targets_dir is not None:
        files = sorted(targets_dir.glob("*.csv"))
        if not files:
            raise MissingArtifactError(f"target spectra (*.csv) in {targets_dir}", hint="siw_inverse verify --targets DIR")
        targets = [read_spectrum_csv(path, bundle.frequency_grid) for path in files]
        substrate = config.substrate.to_spec()
    else:
        dataset = load_run_dataset(run)
        targets = _dataset_targets(dataset, config.evaluation.verify_targets)
        substrate = dataset.substrate
    selected = channel or config.evaluation.channel
    report = verify_designs(bundle, targets, substrate, channel="s11" if selected == "s11" else "s21", workers=config.workers)
    write_verify(report, run.report("verify.csv"))
    return report


__all__ = [
    "DEFAULT_SWEEP_VALUES",
    "EvaluationResult",
    "evaluate_run",
    "generate_dataset",
    "load_run_bundle",
    "load_run_dataset",
    "predict_spectrum",
    "sweep_parameter",
    "train_models",
    "verify_run",
]
