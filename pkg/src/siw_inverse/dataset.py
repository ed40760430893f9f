"""Dataset construction, normalisation, splitting and persistence.

Purpose
-------
Turn the parameter grid into paired (spectrum, geometry) samples using the
surrogate solver, fit the scaling statistics on the training split, shuffle
and split deterministically, and persist everything as a checksummed
directory.

Contents
--------
* :func:`enumerate_geometries` - nested-loop enumeration with the footprint constraints.
* :func:`generate` - parallel, slot-ordered simulation of every geometry.
* :func:`fit_normalizer`, :func:`normalize`, :func:`denormalize` - scaling.
* :func:`split` / :func:`prepare` - seeded shuffle and split.
* :func:`save` / :func:`load` - the on-disk container.

On-disk layout
--------------
``manifest.json`` (schema, shapes, grids, statistics, split, checksums),
``X.bin`` (N x 2F little-endian float32, row-major) and ``Y.bin`` (N x 6).
Each file is written to a temporary sibling and renamed into place; the
manifest is written last.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
import psutil
from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import (
    DatasetIntegrityError,
    DatasetTooSmallError,
    DegenerateStatisticsError,
    EmptyGridError,
    GeometryInfeasibleError,
    SchemaVersionError,
    ShapeMismatchError,
    SiwInverseError,
)
from .models import (
    PARAMETER_NAMES,
    RNG_ALGORITHM,
    FloatArray,
    FrequencyGrid,
    Geometry,
    NormalizationStats,
    ParameterGrid,
    Spectrum,
    SplitSpec,
    SubstrateSpec,
    TargetMode,
    g_threshold,
    make_rng,
)
from .wave_core import SOLVER_VERSION, check_via_rules, simulate

logger = logging.getLogger(__name__)

Float32Array = npt.NDArray[np.float32]

#: Version of the on-disk dataset layout.
SCHEMA_VERSION = 1

#: Population std below this is replaced by it.
STD_FLOOR = 1e-8

#: Smallest dataset :func:`split` accepts.
MIN_SPLIT_SAMPLES = 10

_DTYPE = "<f4"
_CHUNK_SIZE = 256
_REVALIDATION_DECIMALS = 6


# ============================================================================
# Domain objects
# ============================================================================


@dataclass(frozen=True)
class Sample:
    """One (geometry, spectrum) pair and its enumeration ordinal."""

    geometry: Geometry
    spectrum: Spectrum
    index: int


@dataclass(frozen=True)
class SplitIndices:
    """Ordinals of the three splits, in shuffled order."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]

    def all(self) -> tuple[int, ...]:
        return self.train + self.validation + self.test


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable in-memory dataset.

    Attributes
    ----------
    features:
        ``(N, 2F)`` float32 rows ``[|S11|, |S21|]``.
    targets:
        ``(N, 6)`` float32 rows in :data:`~siw_inverse.models.PARAMETER_NAMES` order.
    stats, split, seed:
        Filled in by :func:`prepare`.
    """

    features: Float32Array
    targets: Float32Array
    frequency_grid: FrequencyGrid
    substrate: SubstrateSpec
    parameter_grid: ParameterGrid | None = None
    solver_version: str = SOLVER_VERSION
    wall_time_s: float = 0.0
    stats: NormalizationStats | None = None
    split: SplitIndices | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        n = self.features.shape[0]
        if self.features.shape != (n, 2 * self.frequency_grid.n_points) or self.targets.shape != (n, len(PARAMETER_NAMES)):
            raise ShapeMismatchError(f"features {self.features.shape} and targets {self.targets.shape} do not match the grid of {self.frequency_grid.n_points} points")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @cached_property
    def checksum(self) -> str:
        """SHA-256 over the persisted X and Y bytes; ties checkpoints to their data."""
        digest = hashlib.sha256()
        digest.update(_to_bytes(self.features))
        digest.update(_to_bytes(self.targets))
        return digest.hexdigest()

    def sample(self, index: int) -> Sample:
        spectrum = Spectrum.from_features(self.features[index].astype(np.float64), self.frequency_grid)
        return Sample(Geometry.from_values(_physical_targets(self.targets[index : index + 1])[0]), spectrum, index)

    def subset(self, indices: tuple[int, ...] | list[int]) -> tuple[Float32Array, Float32Array]:
        """Return ``(features, targets)`` rows for ``indices`` in the given order."""
        order = np.asarray(indices, dtype=np.int64)
        return self.features[order], self.targets[order]


# ============================================================================
# Enumeration and generation
# ============================================================================


def enumerate_geometries(grid: ParameterGrid) -> list[Geometry]:
    """Return every constraint-valid geometry in nested-loop order (D1, D2, R1, R2, R3, G).

    The list position is the geometry's ordinal.

    Raises
    ------
    EmptyGridError
        When no combination satisfies the constraints.

    Examples
    --------
    >>> len(enumerate_geometries(ParameterGrid.desk()))
    1921
    """
    geometries: list[Geometry] = []
    for d1 in grid.d_values:
        for d2 in grid.d_values:
            for r1 in grid.r_values:
                for r2 in grid.r_values:
                    if r2 < r1:
                        continue
                    for r3 in grid.r_values:
                        if r3 < r2:
                            continue
                        threshold = g_threshold(d1, d2, r1, r2, r3)
                        geometries.extend(Geometry(d1=d1, d2=d2, r1=r1, r2=r2, r3=r3, g=g) for g in grid.g_values if threshold < g)
    if not geometries:
        raise EmptyGridError("parameter grid yields no geometry satisfying R3 >= R2 >= R1 and the G footprint bound")
    return geometries


def resolve_workers(requested: int | None) -> int:
    """Return the worker count: ``requested`` or the number of physical cores."""
    if requested is not None:
        return max(1, requested)
    return psutil.cpu_count(logical=False) or 1


@dataclass(frozen=True)
class _ChunkResult:
    rows: Float32Array | None
    failed_ordinal: int | None = None
    message: str = ""


def _simulate_chunk(spec: SubstrateSpec, grid: FrequencyGrid, first_ordinal: int, geometries: list[Geometry]) -> _ChunkResult:
    rows = np.empty((len(geometries), 2 * grid.n_points), dtype=np.float32)
    for offset, geometry in enumerate(geometries):
        try:
            rows[offset] = simulate(spec, geometry, grid).features()
        except SiwInverseError as exc:
            return _ChunkResult(None, first_ordinal + offset, str(exc))
    return _ChunkResult(rows)


def generate(
    grid: ParameterGrid | list[Geometry],
    spec: SubstrateSpec,
    fgrid: FrequencyGrid,
    *,
    workers: int | None = None,
) -> Dataset:
    """Simulate every enumerated geometry and return the unsplit dataset.

    ``grid`` may also be an explicit geometry list (its order is the ordinal
    order). Rows land in their ordinal slot regardless of worker scheduling.

    Raises
    ------
    GeometryInfeasibleError
        With the offending ordinal, when a geometry cannot be simulated.
    BelowCutoffError
        When the frequency grid reaches down to cutoff.
    """
    geometries = grid if isinstance(grid, list) else enumerate_geometries(grid)
    if not geometries:
        raise EmptyGridError("no geometries to simulate")
    report = check_via_rules(spec, fgrid)
    if not report.passed:
        logger.warning("Substrate violates via leakage rules", extra={"violations": list(report.violations)})

    n_workers = resolve_workers(workers)
    starts = list(range(0, len(geometries), _CHUNK_SIZE))
    chunks = [geometries[start : start + _CHUNK_SIZE] for start in starts]
    logger.info("Generating dataset", extra={"samples": len(geometries), "workers": n_workers, "chunks": len(chunks)})

    started = time.perf_counter()
    features = np.empty((len(geometries), 2 * fgrid.n_points), dtype=np.float32)
    if n_workers == 1:
        results = (_simulate_chunk(spec, fgrid, start, chunk) for start, chunk in zip(starts, chunks, strict=True))
        _collect(results, starts, features, total=len(geometries))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = pool.map(_simulate_chunk, [spec] * len(chunks), [fgrid] * len(chunks), starts, chunks)
            _collect(results, starts, features, total=len(geometries))
    wall_time = time.perf_counter() - started

    targets = np.asarray([g.as_tuple() for g in geometries], dtype=np.float32)
    logger.info("Dataset generated", extra={"samples": len(geometries), "wall_time_s": round(wall_time, 3)})
    return Dataset(
        features=features,
        targets=targets,
        frequency_grid=fgrid,
        substrate=spec,
        parameter_grid=None if isinstance(grid, list) else grid,
        wall_time_s=wall_time,
    )


def _collect(results: Any, starts: list[int], features: Float32Array, *, total: int) -> None:
    for start, result in zip(starts, results, strict=True):
        if result.rows is None:
            raise GeometryInfeasibleError(result.message, ordinal=result.failed_ordinal)
        features[start : start + result.rows.shape[0]] = result.rows
        logger.debug("Chunk simulated", extra={"first_ordinal": start, "done": start + result.rows.shape[0], "total": total})


# ============================================================================
# Normalisation
# ============================================================================


def fit_normalizer(
    features: npt.ArrayLike,
    targets: npt.ArrayLike,
    *,
    mode: TargetMode = TargetMode.MINMAX,
) -> NormalizationStats:
    """Fit feature and target statistics on training rows.

    Feature statistics are per-column population mean and std, with the std
    floored at :data:`STD_FLOOR`; constant columns normalise to exactly zero.

    Raises
    ------
    DegenerateStatisticsError
        With fewer than two rows or a constant target column.

    Examples
    --------
    >>> stats = fit_normalizer([[1.0], [2.0], [3.0]], [[4, 1, 1, 1, 1, 1], [7, 2, 2, 2, 2, 2], [10, 3, 3, 3, 3, 3]])
    >>> float(stats.feature_mean[0]), round(float(stats.feature_std[0]), 4)
    (2.0, 0.8165)
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"features {x.shape} and targets {y.shape} must be 2-D with equal row counts")
    if x.shape[0] < 2:
        raise DegenerateStatisticsError(f"need at least 2 training samples, got {x.shape[0]}")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = np.ptp(x, axis=0) == 0
    mean[constant] = x[0, constant]
    std = np.maximum(std, STD_FLOOR)

    target_min = y.min(axis=0)
    target_max = y.max(axis=0)
    flat = target_max <= target_min
    if np.any(flat):
        names = [name for name, is_flat in zip(PARAMETER_NAMES, flat, strict=True) if is_flat]
        raise DegenerateStatisticsError(f"target columns {', '.join(names)} are constant over the training split")
    return NormalizationStats(
        feature_mean=mean,
        feature_std=std,
        target_min=target_min,
        target_max=target_max,
        target_mode=mode,
        target_mean=y.mean(axis=0),
        target_std=np.maximum(y.std(axis=0), STD_FLOOR),
    )


def normalize_features(features: npt.ArrayLike, stats: NormalizationStats) -> FloatArray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != stats.feature_mean.shape[0]:
        raise ShapeMismatchError(f"feature width {x.shape[-1]} does not match the fitted width {stats.feature_mean.shape[0]}")
    return (x - stats.feature_mean) / stats.feature_std


def normalize_targets(targets: npt.ArrayLike, stats: NormalizationStats) -> FloatArray:
    """Scale physical targets to ``[0, 1]`` (minmax) or zero-mean unit-variance (zscore)."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape[-1] != len(PARAMETER_NAMES):
        raise ShapeMismatchError(f"target width {y.shape[-1]} must be {len(PARAMETER_NAMES)}")
    if stats.target_mode is TargetMode.ZSCORE:
        return (y - stats.target_mean) / stats.target_std
    return (y - stats.target_min) / (stats.target_max - stats.target_min)


def normalize(sample: Sample, stats: NormalizationStats) -> tuple[FloatArray, FloatArray]:
    """Return the normalised ``(x, y)`` pair of one sample."""
    return normalize_features(sample.spectrum.features(), stats), normalize_targets(sample.geometry.as_array(), stats)


def denormalize(y_norm: npt.ArrayLike, stats: NormalizationStats) -> FloatArray:
    """Map normalised targets back to physical units (mm, and G unitless).

    Examples
    --------
    >>> stats = fit_normalizer([[0.0], [1.0]], [[4, 1, 1, 1, 1, 26], [10, 2, 2, 2, 2, 36]])
    >>> denormalize([0.5, 0, 0, 0, 0, 1], stats).tolist()
    [7.0, 1.0, 1.0, 1.0, 1.0, 36.0]
    """
    y = np.asarray(y_norm, dtype=np.float64)
    if y.shape[-1] != len(PARAMETER_NAMES):
        raise ShapeMismatchError(f"target width {y.shape[-1]} must be {len(PARAMETER_NAMES)}")
    if stats.target_mode is TargetMode.ZSCORE:
        return y * stats.target_std + stats.target_mean
    return y * (stats.target_max - stats.target_min) + stats.target_min


# ============================================================================
# Split
# ============================================================================


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def split(dataset: Dataset | int, spec: SplitSpec) -> SplitIndices:
    """Shuffle ordinals with a seeded Fisher-Yates pass and cut them into train/validation/test.

    The first ``train_fraction`` of the permutation is the training portion,
    of which the last ``validation_fraction`` (at least one sample) becomes
    validation; the remainder is test.

    Raises
    ------
    DatasetTooSmallError
        With fewer than :data:`MIN_SPLIT_SAMPLES` samples.
    """
    n = dataset if isinstance(dataset, int) else len(dataset)
    if n < MIN_SPLIT_SAMPLES:
        raise DatasetTooSmallError(f"need at least {MIN_SPLIT_SAMPLES} samples to split, got {n}")
    order = fisher_yates(n, spec.seed)
    n_trainval = min(n - 1, max(2, _round_half_up(n * spec.train_fraction)))
    n_validation = min(n_trainval - 1, max(1, _round_half_up(n_trainval * spec.validation_fraction)))
    n_train = n_trainval - n_validation
    return SplitIndices(
        train=tuple(order[:n_train]),
        validation=tuple(order[n_train:n_trainval]),
        test=tuple(order[n_trainval:]),
    )


def fisher_yates(n: int, seed: int) -> list[int]:
    """Return a seeded permutation of ``range(n)``; swaps run from the last position down."""
    rng = make_rng(seed)
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def prepare(dataset: Dataset, spec: SplitSpec, *, mode: TargetMode = TargetMode.MINMAX) -> Dataset:
    """Split the dataset and fit statistics on its training rows."""
    indices = split(dataset, spec)
    train_x, train_y = dataset.subset(indices.train)
    stats = fit_normalizer(train_x, train_y, mode=mode)
    logger.info(
        "Dataset split",
        extra={"train": len(indices.train), "validation": len(indices.validation), "test": len(indices.test), "seed": spec.seed},
    )
    return replace(dataset, stats=stats, split=indices, seed=spec.seed)


# ============================================================================
# Persistence
# ============================================================================


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StatsManifest(_Strict):
    feature_mean: list[float]
    feature_std: list[float]
    target_min: list[float]
    target_max: list[float]
    target_mode: TargetMode
    target_mean: list[float]
    target_std: list[float]


class SplitManifest(_Strict):
    seed: int
    train: list[int]
    validation: list[int]
    test: list[int]


class DatasetManifest(_Strict):
    """Schema of ``manifest.json``."""

    schema_version: Literal[1]
    count: int
    feature_dim: int
    target_dim: int
    dtype: Literal["<f4"]
    parameter_names: list[str]
    frequency_grid: dict[str, float | int]
    parameter_grid: dict[str, list[float]] | None
    substrate: dict[str, float]
    solver_version: str
    rng_algorithm: str
    wall_time_s: float
    checksums: dict[str, str]
    dataset_checksum: str
    stats: StatsManifest | None
    split: SplitManifest | None


def _to_bytes(array: npt.NDArray[Any]) -> bytes:
    return np.ascontiguousarray(array, dtype=_DTYPE).tobytes()


def _atomic_write(path: Path, data: bytes) -> None:
    temp = path.with_name(path.name + ".tmp")
    temp.write_bytes(data)
    temp.replace(path)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _stats_manifest(stats: NormalizationStats) -> StatsManifest:
    return StatsManifest(
        feature_mean=stats.feature_mean.tolist(),
        feature_std=stats.feature_std.tolist(),
        target_min=stats.target_min.tolist(),
        target_max=stats.target_max.tolist(),
        target_mode=stats.target_mode,
        target_mean=stats.target_mean.tolist(),
        target_std=stats.target_std.tolist(),
    )


def stats_from_manifest(manifest: StatsManifest) -> NormalizationStats:
    return NormalizationStats(
        feature_mean=np.asarray(manifest.feature_mean, dtype=np.float64),
        feature_std=np.asarray(manifest.feature_std, dtype=np.float64),
        target_min=np.asarray(manifest.target_min, dtype=np.float64),
        target_max=np.asarray(manifest.target_max, dtype=np.float64),
        target_mode=manifest.target_mode,
        target_mean=np.asarray(manifest.target_mean, dtype=np.float64),
        target_std=np.asarray(manifest.target_std, dtype=np.float64),
    )


def stats_to_dict(stats: NormalizationStats) -> dict[str, Any]:
    return _stats_manifest(stats).model_dump(mode="json")


def stats_from_dict(data: dict[str, Any]) -> NormalizationStats:
    return stats_from_manifest(StatsManifest.model_validate(data))


def save(dataset: Dataset, path: Path) -> Path:
    """Persist ``dataset`` into directory ``path`` and return the manifest path."""
    path.mkdir(parents=True, exist_ok=True)
    x_bytes = _to_bytes(dataset.features)
    y_bytes = _to_bytes(dataset.targets)
    grid = dataset.parameter_grid
    manifest = DatasetManifest(
        schema_version=SCHEMA_VERSION,
        count=len(dataset),
        feature_dim=int(dataset.features.shape[1]),
        target_dim=int(dataset.targets.shape[1]),
        dtype=_DTYPE,
        parameter_names=list(PARAMETER_NAMES),
        frequency_grid={"f_start_ghz": dataset.frequency_grid.f_start_ghz, "f_stop_ghz": dataset.frequency_grid.f_stop_ghz, "n_points": dataset.frequency_grid.n_points},
        parameter_grid=None if grid is None else {"d_values": list(grid.d_values), "r_values": list(grid.r_values), "g_values": list(grid.g_values)},
        substrate={
            "relative_permittivity": dataset.substrate.relative_permittivity,
            "total_width_mm": dataset.substrate.total_width_mm,
            "via_diameter_mm": dataset.substrate.via_diameter_mm,
            "via_pitch_mm": dataset.substrate.via_pitch_mm,
        },
        solver_version=dataset.solver_version,
        rng_algorithm=RNG_ALGORITHM,
        wall_time_s=dataset.wall_time_s,
        checksums={"X.bin": _sha256(x_bytes), "Y.bin": _sha256(y_bytes)},
        dataset_checksum=dataset.checksum,
        stats=None if dataset.stats is None else _stats_manifest(dataset.stats),
        split=None
        if dataset.split is None or dataset.seed is None
        else SplitManifest(seed=dataset.seed, train=list(dataset.split.train), validation=list(dataset.split.validation), test=list(dataset.split.test)),
    )
    _atomic_write(path / "X.bin", x_bytes)
    _atomic_write(path / "Y.bin", y_bytes)
    manifest_path = path / "manifest.json"
    _atomic_write(manifest_path, json.dumps(manifest.model_dump(mode="json"), indent=2).encode("utf-8"))
    logger.info("Saved dataset", extra={"path": str(path), "samples": len(dataset), "checksum": dataset.checksum[:12]})
    return manifest_path


def _read_manifest(path: Path) -> DatasetManifest:
    manifest_path = path / "manifest.json"
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetIntegrityError(f"{manifest_path} is not valid JSON: {exc}") from exc
    version = raw.get("schema_version") if isinstance(raw, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{manifest_path} declares schema version {version!r}; this release reads version {SCHEMA_VERSION}")
    try:
        return DatasetManifest.model_validate(raw)
    except ValidationError as exc:
        raise DatasetIntegrityError(f"{manifest_path} does not match the dataset schema: {exc}") from exc


def _read_blob(path: Path, *, rows: int, cols: int, checksum: str) -> Float32Array:
    data = path.read_bytes()
    expected = rows * cols * 4
    if len(data) != expected:
        raise DatasetIntegrityError(f"{path.name} holds {len(data)} bytes, expected {expected} (truncated or padded)")
    if _sha256(data) != checksum:
        raise DatasetIntegrityError(f"{path.name} failed its SHA-256 checksum")
    return np.frombuffer(data, dtype=_DTYPE).reshape(rows, cols).astype(np.float32)


def _physical_targets(targets: Float32Array) -> FloatArray:
    return np.round(targets.astype(np.float64), _REVALIDATION_DECIMALS)


def _revalidate(targets: Float32Array) -> None:
    for ordinal, row in enumerate(_physical_targets(targets)):
        try:
            Geometry.from_values(row)
        except GeometryInfeasibleError as exc:
            raise DatasetIntegrityError(f"persisted sample {ordinal} violates the geometry constraints: {exc}") from exc


def load(path: Path) -> Dataset:
    """Load and verify a dataset directory written by :func:`save`.

    Raises
    ------
    SchemaVersionError
        When the manifest declares another schema version.
    DatasetIntegrityError
        On checksum failure, truncated blobs, or a sample violating the geometry constraints.
    """
    manifest = _read_manifest(path)
    features = _read_blob(path / "X.bin", rows=manifest.count, cols=manifest.feature_dim, checksum=manifest.checksums["X.bin"])
    targets = _read_blob(path / "Y.bin", rows=manifest.count, cols=manifest.target_dim, checksum=manifest.checksums["Y.bin"])
    _revalidate(targets)

    pg = manifest.parameter_grid
    dataset = Dataset(
        features=features,
        targets=targets,
        frequency_grid=FrequencyGrid(float(manifest.frequency_grid["f_start_ghz"]), float(manifest.frequency_grid["f_stop_ghz"]), int(manifest.frequency_grid["n_points"])),
        substrate=SubstrateSpec(**manifest.substrate),
        parameter_grid=None if pg is None else ParameterGrid(tuple(pg["d_values"]), tuple(pg["r_values"]), tuple(pg["g_values"])),
        solver_version=manifest.solver_version,
        wall_time_s=manifest.wall_time_s,
        stats=None if manifest.stats is None else stats_from_manifest(manifest.stats),
        split=None if manifest.split is None else SplitIndices(tuple(manifest.split.train), tuple(manifest.split.validation), tuple(manifest.split.test)),
        seed=None if manifest.split is None else manifest.split.seed,
    )
    logger.info("Loaded dataset", extra={"path": str(path), "samples": len(dataset)})
    return dataset


__all__ = [
    "MIN_SPLIT_SAMPLES",
    "SCHEMA_VERSION",
    "STD_FLOOR",
    "Dataset",
    "DatasetManifest",
    "Sample",
    "SplitIndices",
    "denormalize",
    "enumerate_geometries",
    "fisher_yates",
    "fit_normalizer",
    "generate",
    "load",
    "normalize",
    "normalize_features",
    "normalize_targets",
    "prepare",
    "resolve_workers",
    "save",
    "split",
    "stats_from_dict",
    "stats_to_dict",
]
