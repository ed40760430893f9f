"""Evaluation reports for trained bundles.

Purpose
-------
Score the FIM, HiFR²-Net and IRC-Net pipelines on a dataset, trace the IRC
iterations, bin per-sample errors on a log scale, compare predictions for one
target against ground truth, close the loop by re-simulating predicted
geometries, check monotone resonance trends of the surrogate, and time
batch inference.

Every function except :func:`benchmark_inference` is a pure function of its
inputs.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

import numpy as np
import numpy.typing as npt

from .dataset import denormalize, resolve_workers
from .errors import DatasetIntegrityError, GeometryInfeasibleError, SiwInverseError, StageOrderError
from .models import PARAMETER_NAMES, FloatArray, Geometry, g_threshold
from .neural import regression_errors
from .pipeline import fim_batch, hifr2_batch, irc_batch, normalised_arrays, spectrum_input
from .wave_core import find_resonances, simulate

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .dataset import Dataset
    from .models import FrequencyGrid, NormalizationStats, Spectrum, SubstrateSpec
    from .neural import Array
    from .pipeline import PipelineBundle

logger = logging.getLogger(__name__)

ModelName = Literal["fim", "hifr2", "irc"]
Metric = Literal["mse", "mae"]
Channel = Literal["s21", "s11"]

MODEL_NAMES: tuple[ModelName, ...] = ("fim", "hifr2", "irc")
SPLIT_NAMES = ("train", "validation", "test", "all")

#: Log10 histogram layout.
HISTOGRAM_LOW = -5.0
HISTOGRAM_HIGH = 0.0
HISTOGRAM_WIDTH = 0.1
HISTOGRAM_BINS = 50
_ERROR_FLOOR = 1e-12

#: G is lifted this far above its footprint bound when snapping.
SNAP_G_MARGIN = 1e-3

#: Published IRC-Net estimate for the reference geometry, kept for orientation only.
REFERENCE_IRC_ESTIMATE: dict[str, float] = {"D1": 5.5745, "D2": 7.9494, "R1": 0.2174, "R2": 0.4084, "R3": 0.8047, "G": 26.0227}

#: Throughput below these values (spectra per second) is logged as a warning.
DEFAULT_MIN_THROUGHPUT: dict[str, float] = {"fim": 1000.0, "irc": 200.0}


# ============================================================================
# Metrics
# ============================================================================


@dataclass(frozen=True)
class MetricRow:
    """Errors of one model on one split.

    ``mse`` and ``mae`` are in normalised units; ``parameter_mae`` is the
    physical-unit absolute error per design parameter.
    """

    model: str
    split: str
    samples: int
    mse: float
    mae: float
    parameter_mae: tuple[float, ...]


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[MetricRow, ...]

    def row(self, model: str, split: str) -> MetricRow:
        for candidate in self.rows:
            if candidate.model == model and candidate.split == split:
                return candidate
        raise KeyError(f"no metrics for model {model!r} on split {split!r}")


def trained_models(bundle: PipelineBundle) -> list[ModelName]:
    """Return the pipelines the bundle can run, in report order."""
    names: list[ModelName] = []
    if bundle.fim is not None:
        names.append("fim")
        if bundle.ffm is not None and bundle.rrm is not None:
            names.append("hifr2")
        if bundle.irc is not None:
            names.append("irc")
    return names


def model_predictions(bundle: PipelineBundle, x_norm: Array) -> dict[str, Array]:
    """Return the final normalised prediction of every trained pipeline."""
    out: dict[str, Array] = {}
    for name in trained_models(bundle):
        if name == "fim":
            out[name] = fim_batch(bundle, x_norm)
        elif name == "hifr2":
            out[name] = hifr2_batch(bundle, x_norm)[2]
        else:
            out[name] = irc_batch(bundle, x_norm)[-1]
    return out


def _split_indices(dataset: Dataset) -> dict[str, tuple[int, ...]]:
    if dataset.split is None:
        raise StageOrderError("dataset has no split")
    return {
        "train": dataset.split.train,
        "validation": dataset.split.validation,
        "test": dataset.split.test,
        "all": tuple(range(len(dataset))),
    }


def _check_dataset(bundle: PipelineBundle, dataset: Dataset) -> None:
    if dataset.checksum != bundle.dataset_checksum:
        raise DatasetIntegrityError("bundle was trained on a different dataset; its splits do not apply")


def parameter_mae(pred_norm: npt.ArrayLike, true_norm: npt.ArrayLike, stats: NormalizationStats) -> tuple[float, ...]:
    """Mean absolute error per design parameter in physical units."""
    diff = np.abs(denormalize(pred_norm, stats) - denormalize(true_norm, stats))
    return tuple(float(v) for v in diff.mean(axis=0))


def compute_metrics(bundle: PipelineBundle, dataset: Dataset) -> MetricsReport:
    """Score every trained pipeline, plus the training-mean baseline, on every split.

    Raises
    ------
    DatasetIntegrityError
        When ``dataset`` is not the one the bundle was trained on.
    """
    _check_dataset(bundle, dataset)
    splits = _split_indices(dataset)
    _, train_y = normalised_arrays(dataset, splits["train"])
    baseline = train_y.astype(np.float64).mean(axis=0)

    rows: list[MetricRow] = []
    for split_name in SPLIT_NAMES:
        indices = splits[split_name]
        if not indices:
            continue
        x, y = normalised_arrays(dataset, indices)
        predictions = model_predictions(bundle, x)
        predictions["mean_baseline"] = np.broadcast_to(baseline, y.shape)
        for model, pred in predictions.items():
            mse, mae = regression_errors(pred, y)
            rows.append(MetricRow(model, split_name, len(indices), mse, mae, parameter_mae(pred, y, bundle.stats)))
    logger.info("Computed metrics", extra={"rows": len(rows)})
    return MetricsReport(tuple(rows))


# ============================================================================
# Iteration trace
# ============================================================================


@dataclass(frozen=True)
class IterationTrace:
    """Error of ``P_0 .. P_T`` over every sample of the dataset; point 0 is the FIM."""

    iterations: tuple[int, ...]
    mse: tuple[float, ...]
    mae: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.iterations)


def iteration_trace(bundle: PipelineBundle, dataset: Dataset) -> IterationTrace:
    _check_dataset(bundle, dataset)
    x, y = normalised_arrays(dataset)
    errors = [regression_errors(p, y) for p in irc_batch(bundle, x)]
    return IterationTrace(
        iterations=tuple(range(len(errors))),
        mse=tuple(e[0] for e in errors),
        mae=tuple(e[1] for e in errors),
    )


# ============================================================================
# Histogram
# ============================================================================


@dataclass(frozen=True)
class ErrorHistogram:
    """Per-sample errors binned by ``log10`` with explicit under- and overflow.

    Bin ``k`` covers ``[edges[k], edges[k + 1])``. Errors below ``1e-5``
    (including zero) count as underflow, errors of ``1`` and above as overflow.
    """

    model: str
    metric: str
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow


def histogram_bin(error: float) -> int:
    """Return the bin index of ``error``; negative is underflow, ``>= 50`` overflow.

    Examples
    --------
    >>> histogram_bin(0.01), histogram_bin(0.0), histogram_bin(1.0)
    (30, -70, 50)
    """
    position = (math.log10(max(error, _ERROR_FLOOR)) - HISTOGRAM_LOW) / HISTOGRAM_WIDTH
    return math.floor(round(position, 9))


def per_sample_errors(pred: npt.ArrayLike, truth: npt.ArrayLike, metric: Metric) -> FloatArray:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return (diff * diff).mean(axis=1) if metric == "mse" else np.abs(diff).mean(axis=1)


def error_histogram(errors: Sequence[float] | FloatArray, metric: Metric, *, model: str = "") -> ErrorHistogram:
    """Bin non-negative per-sample errors on a log10 scale.

    Raises
    ------
    ValueError
        When an error is negative or not finite.
    """
    values = np.asarray(errors, dtype=np.float64)
    if values.size and (not np.isfinite(values).all() or values.min() < 0):
        raise ValueError("errors must be finite and non-negative")
    counts = [0] * HISTOGRAM_BINS
    underflow = overflow = 0
    for value in values:
        index = histogram_bin(float(value))
        if index < 0:
            underflow += 1
        elif index >= HISTOGRAM_BINS:
            overflow += 1
        else:
            counts[index] += 1
    edges = tuple(round(HISTOGRAM_LOW + k * HISTOGRAM_WIDTH, 10) for k in range(HISTOGRAM_BINS + 1))
    return ErrorHistogram(model=model, metric=metric, edges=edges, counts=tuple(counts), underflow=underflow, overflow=overflow)


def dataset_histograms(bundle: PipelineBundle, dataset: Dataset, metric: Metric, *, split: str = "test") -> list[ErrorHistogram]:
    """One histogram per trained pipeline over ``split``."""
    _check_dataset(bundle, dataset)
    x, y = normalised_arrays(dataset, _split_indices(dataset)[split])
    return [error_histogram(per_sample_errors(pred, y, metric), metric, model=name) for name, pred in model_predictions(bundle, x).items()]


# ============================================================================
# Comparison table
# ============================================================================


@dataclass(frozen=True)
class ComparisonRow:
    parameter: str
    fim: float
    hifr2: float
    irc: float
    truth: float


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    reference: dict[str, float] = field(default_factory=lambda: dict(REFERENCE_IRC_ESTIMATE))


def comparison_table(bundle: PipelineBundle, spectrum: Spectrum, truth: Geometry) -> ComparisonTable:
    """Physical-unit estimates of all three pipelines next to the true geometry."""
    x = spectrum_input(spectrum, bundle)
    predictions = {name: denormalize(pred[0], bundle.stats) for name, pred in model_predictions(bundle, x).items()}
    missing = [name for name in MODEL_NAMES if name not in predictions]
    if missing:
        raise StageOrderError(f"comparison needs every pipeline; untrained: {', '.join(missing)}")
    rows = tuple(
        ComparisonRow(name, float(predictions["fim"][k]), float(predictions["hifr2"][k]), float(predictions["irc"][k]), value)
        for k, (name, value) in enumerate(truth.as_dict().items())
    )
    return ComparisonTable(rows)


# ============================================================================
# Loop-back verification
# ============================================================================


def snap_geometry(values: npt.ArrayLike, stats: NormalizationStats) -> Geometry:
    """Make a predicted parameter vector simulable.

    Each parameter is clamped into its training range, the radii are sorted
    ascending, and G is lifted just above its footprint bound when needed.

    Raises
    ------
    GeometryInfeasibleError
        When the lifted G leaves the training range of G.
    """
    clamped = np.clip(np.asarray(values, dtype=np.float64), stats.target_min, stats.target_max)
    d1, d2 = float(clamped[0]), float(clamped[1])
    r1, r2, r3 = sorted(float(v) for v in clamped[2:5])
    g = float(clamped[5])
    bound = g_threshold(d1, d2, r1, r2, r3)
    if not bound < g:
        g = bound + SNAP_G_MARGIN
        if g > float(stats.target_max[5]):
            raise GeometryInfeasibleError(f"G would need to exceed {bound:.6g}, beyond the trained maximum {float(stats.target_max[5]):.6g}")
    return Geometry(d1=d1, d2=d2, r1=r1, r2=r2, r3=r3, g=g)


@dataclass(frozen=True)
class VerifyItem:
    """Loop-back result of one pipeline on one target; ``error`` is set when the design is infeasible."""

    target: int
    model: str
    geometry: Geometry | None
    spectrum_mse: float | None
    error: str | None = None


@dataclass(frozen=True)
class VerifyReport:
    channel: str
    items: tuple[VerifyItem, ...]

    def mean_mse(self, model: str) -> float | None:
        values = [item.spectrum_mse for item in self.items if item.model == model and item.spectrum_mse is not None]
        return float(np.mean(values)) if values else None


def _channel(spectrum: Spectrum, channel: Channel) -> FloatArray:
    return spectrum.s21_mag if channel == "s21" else spectrum.s11_mag


def _verify_one(bundle: PipelineBundle, substrate: SubstrateSpec, channel: Channel, index: int, target: Spectrum) -> list[VerifyItem]:
    x = spectrum_input(target, bundle)
    items: list[VerifyItem] = []
    for model, pred in model_predictions(bundle, x).items():
        try:
            geometry = snap_geometry(denormalize(pred[0], bundle.stats), bundle.stats)
            resimulated = simulate(substrate, geometry, target.grid)
        except SiwInverseError as exc:
            items.append(VerifyItem(index, model, None, None, str(exc)))
            continue
        diff = _channel(resimulated, channel) - _channel(target, channel)
        items.append(VerifyItem(index, model, geometry, float(np.mean(diff * diff))))
    return items


def verify_designs(
    bundle: PipelineBundle,
    targets: Sequence[Spectrum],
    substrate: SubstrateSpec,
    *,
    channel: Channel = "s21",
    workers: int | None = None,
) -> VerifyReport:
    """Predict, snap, re-simulate and score every target with every trained pipeline.

    Infeasible designs are reported per item. Targets run concurrently; the
    report keeps target order.
    """
    if not targets:
        return VerifyReport(channel, ())
    for target in targets:
        spectrum_input(target, bundle)
    with ThreadPoolExecutor(max_workers=min(resolve_workers(workers), len(targets))) as pool:
        per_target = list(pool.map(lambda pair: _verify_one(bundle, substrate, channel, pair[0], pair[1]), enumerate(targets)))
    items = tuple(item for group in per_target for item in group)
    infeasible = sum(1 for item in items if item.error is not None)
    logger.info("Verified designs", extra={"targets": len(targets), "channel": channel, "infeasible": infeasible})
    return VerifyReport(channel, items)


# ============================================================================
# Trend check
# ============================================================================


Verdict = Literal["decreasing", "increasing", "flat", "mixed", "undetermined"]


@dataclass(frozen=True)
class TrendReport:
    """Lowest resonance (and every resonance) per swept value.

    ``g_values`` is the scaling factor actually simulated for each variant; it
    differs from the base G only where the swept value pushed the footprint
    bound past it.
    """

    parameter: str
    values: tuple[float, ...]
    lowest: tuple[float | None, ...]
    resonances: tuple[tuple[float, ...], ...]
    verdict: Verdict
    g_values: tuple[float, ...] = ()

    @property
    def strictly_decreasing(self) -> bool:
        return self.verdict == "decreasing"


def _verdict(lowest: Sequence[float | None]) -> Verdict:
    if any(v is None for v in lowest) or len(lowest) < 2:
        return "undetermined"
    steps = [b - a for a, b in zip(lowest[:-1], lowest[1:], strict=True) if a is not None and b is not None]
    if all(step == 0 for step in steps):
        return "flat"
    if all(step < 0 for step in steps):
        return "decreasing"
    if all(step > 0 for step in steps):
        return "increasing"
    return "mixed"


def sweep_variant(base: Geometry, parameter: str, value: float) -> Geometry:
    """Replace one parameter of ``base``, lifting G above its footprint bound when needed.

    G only sets the end-section length, which changes phase but not the
    magnitude response.

    Examples
    --------
    >>> from siw_inverse.models import REFERENCE_GEOMETRY
    >>> sweep_variant(REFERENCE_GEOMETRY, "D1", 6.5).g > 26.0
    True
    """
    values = base.as_dict()
    if parameter not in values:
        raise KeyError(f"unknown parameter {parameter!r}; expected one of {', '.join(PARAMETER_NAMES)}")
    values[parameter] = float(value)
    if parameter != "G":
        bound = g_threshold(values["D1"], values["D2"], values["R1"], values["R2"], values["R3"])
        if not bound < values["G"]:
            values["G"] = bound + SNAP_G_MARGIN
            logger.debug("Lifted G for sweep variant", extra={"parameter": parameter, "value": value, "g": values["G"]})
    return Geometry.from_values([values[name] for name in PARAMETER_NAMES])


def trend_check(
    spec: SubstrateSpec,
    base: Geometry,
    parameter: str,
    values: Sequence[float],
    grid: FrequencyGrid,
    *,
    end_length_mm: float | None = None,
) -> TrendReport:
    """Sweep one parameter of ``base`` and classify how the lowest resonance moves.

    ``end_length_mm`` pins the end sections, which removes the only effect G
    has on the surrogate.

    Raises
    ------
    GeometryInfeasibleError
        When a swept variant breaks the radius ordering or leaves no room for the end sections.
    """
    variants = [sweep_variant(base, parameter, v) for v in values]
    resonances = tuple(tuple(find_resonances(simulate(spec, variant, grid, end_length_mm=end_length_mm))) for variant in variants)
    lowest = tuple(found[0] if found else None for found in resonances)
    verdict = _verdict(lowest)
    logger.info("Trend check", extra={"parameter": parameter, "values": list(values), "lowest": list(lowest), "verdict": verdict})
    return TrendReport(parameter, tuple(float(v) for v in values), lowest, resonances, verdict, tuple(v.g for v in variants))


# ============================================================================
# Throughput
# ============================================================================


@dataclass(frozen=True)
class BenchmarkReport:
    """Spectra per second of batch inference for each trained pipeline."""

    samples: int
    throughput: dict[str, float]
    below_threshold: tuple[str, ...]


def _timed(run: Callable[[], object], repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        started = time.perf_counter()
        run()
        best = min(best, time.perf_counter() - started)
    return best


def benchmark_inference(
    bundle: PipelineBundle,
    x_norm: Array,
    *,
    repeats: int = 3,
    thresholds: dict[str, float] | None = None,
) -> BenchmarkReport:
    """Time batch prediction; slow pipelines are logged as warnings, never raised."""
    limits = DEFAULT_MIN_THROUGHPUT if thresholds is None else thresholds
    runners: dict[str, Callable[[], object]] = {
        "fim": lambda: fim_batch(bundle, x_norm),
        "hifr2": lambda: hifr2_batch(bundle, x_norm),
        "irc": lambda: irc_batch(bundle, x_norm),
    }
    throughput: dict[str, float] = {}
    for name in trained_models(bundle):
        elapsed = _timed(runners[name], repeats)
        throughput[name] = x_norm.shape[0] / elapsed if elapsed > 0 else math.inf
    slow = tuple(name for name, rate in throughput.items() if rate < limits.get(name, 0.0))
    for name in slow:
        logger.warning("Inference throughput below target", extra={"model": name, "spectra_per_s": round(throughput[name], 1), "target": limits[name]})
    return BenchmarkReport(samples=int(x_norm.shape[0]), throughput=throughput, below_threshold=slow)


__all__ = [
    "HISTOGRAM_BINS",
    "MODEL_NAMES",
    "REFERENCE_IRC_ESTIMATE",
    "BenchmarkReport",
    "ComparisonRow",
    "ComparisonTable",
    "ErrorHistogram",
    "IterationTrace",
    "MetricRow",
    "MetricsReport",
    "TrendReport",
    "VerifyItem",
    "VerifyReport",
    "benchmark_inference",
    "compute_metrics",
    "dataset_histograms",
    "error_histogram",
    "histogram_bin",
    "iteration_trace",
    "model_predictions",
    "parameter_mae",
    "per_sample_errors",
    "snap_geometry",
    "sweep_variant",
    "trained_models",
    "trend_check",
    "verify_designs",
]
