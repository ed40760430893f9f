"""The three inverse-design pipelines: FIM, HiFR²-Net and IRC-Net.

Purpose
-------
Build the networks with their published widths, train them in stage order on
a prepared :class:`~siw_inverse.dataset.Dataset`, run them on spectra, and
persist the trained set as a bundle directory.

Contents
--------
* Architecture builders: :func:`fim_layers`, :func:`ffm_layers`,
  :func:`rrm_layers`, :func:`irc_layers`.
* :class:`PipelineBundle`, :class:`IrcStage`, :class:`Estimate`.
* Training: :func:`train_fim`, :func:`train_hifr2`, :func:`train_irc`.
* Inference: :func:`predict_fim`, :func:`predict_hifr2`, :func:`predict_irc`
  plus batch variants on normalised arrays.
* Persistence: :func:`save_bundle`, :func:`load_bundle`.

All networks work in normalised units: inputs are standardised spectra and
outputs are scaled geometry targets. Physical units appear only at the edges.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import denormalize, normalize_features, normalize_targets, stats_from_dict, stats_to_dict
from .errors import CheckpointError, DatasetIntegrityError, GridMismatchError, SchemaVersionError, StageOrderError
from .models import PARAMETER_NAMES, RNG_ALGORITHM, FloatArray, FrequencyGrid, TrainRecord
from .neural import Activation, LayerSpec, MlpModel, init_model, predict, regression_errors, train

if TYPE_CHECKING:
    from pathlib import Path

    from .dataset import Dataset
    from .models import ArchitectureSettings, NormalizationStats, RunConfig, Spectrum
    from .neural import Array

logger = logging.getLogger(__name__)

TARGET_DIM = len(PARAMETER_NAMES)
BUNDLE_SCHEMA_VERSION = 1

#: Seed offsets of the later stages relative to the run seed; corrector i uses ``seed + i``.
FFM_SEED_OFFSET = 100
RRM_SEED_OFFSET = 200

# Zero-based dense layers followed by dropout.
_FIM_DROPOUT_LAYERS = range(1, 6)
_FFM_DROPOUT_LAYERS = range(5)

IrcInput = Literal["updated", "fixed_p0"]


# ============================================================================
# Architectures
# ============================================================================


def _dense_stack(
    widths: list[int],
    *,
    hidden: Activation,
    head: Activation,
    dropout: float = 0.0,
    dropout_layers: range = range(0),
    slope: float = 0.01,
) -> list[LayerSpec]:
    last = len(widths) - 2
    return [
        LayerSpec(
            in_dim=widths[i],
            out_dim=widths[i + 1],
            activation=head if i == last else hidden,
            slope=slope,
            dropout_after=dropout if i in dropout_layers and i != last else 0.0,
        )
        for i in range(len(widths) - 1)
    ]


def fim_layers(feature_dim: int, arch: ArchitectureSettings) -> list[LayerSpec]:
    """Spectrum to geometry: ReLU throughout including the head, dropout after dense layers 2-6."""
    return _dense_stack([feature_dim, *arch.fim_hidden, TARGET_DIM], hidden=Activation.RELU, head=Activation.RELU, dropout=arch.dropout, dropout_layers=_FIM_DROPOUT_LAYERS)


def rrm_layers(feature_dim: int, arch: ArchitectureSettings) -> list[LayerSpec]:
    """FIM widths with a linear head, since corrections are signed."""
    return _dense_stack([feature_dim, *arch.fim_hidden, TARGET_DIM], hidden=Activation.RELU, head=Activation.LINEAR, dropout=arch.dropout, dropout_layers=_FIM_DROPOUT_LAYERS)


def ffm_layers(feature_dim: int, arch: ArchitectureSettings) -> list[LayerSpec]:
    """Geometry to spectrum: ReLU hidden layers, linear head, dropout after dense layers 1-5."""
    return _dense_stack([TARGET_DIM, *arch.ffm_hidden, feature_dim], hidden=Activation.RELU, head=Activation.LINEAR, dropout=arch.dropout, dropout_layers=_FFM_DROPOUT_LAYERS)


def irc_layers(arch: ArchitectureSettings) -> list[LayerSpec]:
    """One corrector: LeakyReLU hidden layers, linear head, no dropout."""
    return _dense_stack([TARGET_DIM, *arch.irc_hidden, TARGET_DIM], hidden=Activation.LEAKY_RELU, head=Activation.LINEAR, slope=arch.leaky_relu_slope)


# ============================================================================
# Bundle
# ============================================================================


@dataclass(eq=False)
class IrcStage:
    """Ordered correctors and the input convention they were trained with."""

    correctors: list[MlpModel]
    input_mode: IrcInput = "updated"


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    mse: float
    mae: float


@dataclass(eq=False)
class PipelineBundle:
    """Trained networks sharing one dataset, its statistics and its frequency grid.

    Components are filled in stage by stage; the ``trained_*`` accessors raise
    :class:`StageOrderError` for a stage that is still missing.
    """

    stats: NormalizationStats
    frequency_grid: FrequencyGrid
    dataset_checksum: str
    fim: MlpModel | None = None
    ffm: MlpModel | None = None
    rrm: MlpModel | None = None
    irc: IrcStage | None = None
    records: dict[str, TrainRecord] = field(default_factory=lambda: {})
    irc_trace: list[TracePoint] = field(default_factory=lambda: [])

    @classmethod
    def for_dataset(cls, dataset: Dataset) -> PipelineBundle:
        if dataset.stats is None or dataset.split is None:
            raise StageOrderError("dataset must be split and normalised before training")
        return cls(stats=dataset.stats, frequency_grid=dataset.frequency_grid, dataset_checksum=dataset.checksum)

    def trained_fim(self) -> MlpModel:
        if self.fim is None:
            raise StageOrderError("stage 'fim' has not been trained")
        return self.fim

    def trained_hifr2(self) -> tuple[MlpModel, MlpModel]:
        if self.ffm is None or self.rrm is None:
            raise StageOrderError("stage 'hifr2' has not been trained")
        return self.ffm, self.rrm

    def trained_irc(self) -> IrcStage:
        if self.irc is None:
            raise StageOrderError("stage 'irc' has not been trained")
        return self.irc

    def wall_times(self) -> dict[str, float]:
        return {name: record.wall_time_s for name, record in self.records.items()}


@dataclass(frozen=True)
class Estimate:
    """One geometry estimate in normalised and physical units."""

    normalized: FloatArray
    physical: FloatArray

    def as_dict(self) -> dict[str, float]:
        return {name: float(value) for name, value in zip(PARAMETER_NAMES, self.physical, strict=True)}


def _estimate(y_norm: Array, stats: NormalizationStats, *, clip: bool) -> Estimate:
    normalized = np.asarray(y_norm, dtype=np.float64)
    physical = denormalize(normalized, stats)
    if clip:
        physical = np.clip(physical, stats.target_min, stats.target_max)
    return Estimate(normalized=normalized, physical=physical)


# ============================================================================
# Training
# ============================================================================


@dataclass(frozen=True)
class _Splits:
    train_x: Array
    train_y: Array
    val_x: Array
    val_y: Array


def _normalised_splits(dataset: Dataset) -> _Splits:
    if dataset.stats is None or dataset.split is None:
        raise StageOrderError("dataset must be split and normalised before training")
    stats = dataset.stats

    def rows(indices: tuple[int, ...]) -> tuple[Array, Array]:
        x, y = dataset.subset(indices)
        return normalize_features(x, stats).astype(np.float32), normalize_targets(y, stats).astype(np.float32)

    train_x, train_y = rows(dataset.split.train)
    val_x, val_y = rows(dataset.split.validation)
    return _Splits(train_x, train_y, val_x, val_y)


def normalised_arrays(dataset: Dataset, indices: tuple[int, ...] | None = None) -> tuple[Array, Array]:
    """Return float32 normalised ``(x, y)`` for ``indices`` (default: every ordinal)."""
    if dataset.stats is None:
        raise StageOrderError("dataset has no normalisation statistics")
    x, y = dataset.subset(indices if indices is not None else tuple(range(len(dataset))))
    return normalize_features(x, dataset.stats).astype(np.float32), normalize_targets(y, dataset.stats).astype(np.float32)


def train_fim(dataset: Dataset, config: RunConfig) -> tuple[MlpModel, TrainRecord]:
    """Train the spectrum-to-geometry baseline on the training split."""
    splits = _normalised_splits(dataset)
    model = init_model(fim_layers(splits.train_x.shape[1], config.architecture), config.seed)
    schedule = config.training.fim.to_train_config(seed=config.seed, adam=config.optimizer.to_adam())
    return train(model, splits.train_x, splits.train_y, splits.val_x, splits.val_y, schedule, name="fim")


def train_hifr2(dataset: Dataset, fim: MlpModel | None, config: RunConfig) -> tuple[MlpModel, MlpModel, dict[str, TrainRecord]]:
    """Train the forward model, then the residual refinement model.

    The forward model learns ground-truth geometry to spectrum. The
    refinement model learns ``x - ffm(fim(x))`` to ``y - fim(x)``.

    Raises
    ------
    StageOrderError
        When ``fim`` has not been trained.
    """
    if fim is None:
        raise StageOrderError("train the FIM before HiFR2-Net")
    splits = _normalised_splits(dataset)
    adam = config.optimizer.to_adam()
    feature_dim = splits.train_x.shape[1]

    ffm_seed = config.seed + FFM_SEED_OFFSET
    ffm = init_model(ffm_layers(feature_dim, config.architecture), ffm_seed)
    ffm, ffm_record = train(ffm, splits.train_y, splits.train_x, splits.val_y, splits.val_x, config.training.ffm.to_train_config(seed=ffm_seed, adam=adam), name="ffm")

    def residual_pairs(x: Array, y: Array) -> tuple[Array, Array]:
        p0 = predict(fim, x)
        return x - predict(ffm, p0), y - p0

    train_r, train_dp = residual_pairs(splits.train_x, splits.train_y)
    val_r, val_dp = residual_pairs(splits.val_x, splits.val_y)
    rrm_seed = config.seed + RRM_SEED_OFFSET
    rrm = init_model(rrm_layers(feature_dim, config.architecture), rrm_seed)
    rrm, rrm_record = train(rrm, train_r, train_dp, val_r, val_dp, config.training.rrm.to_train_config(seed=rrm_seed, adam=adam), name="rrm")
    return ffm, rrm, {"ffm": ffm_record, "rrm": rrm_record}


def train_irc(dataset: Dataset, fim: MlpModel | None, config: RunConfig) -> tuple[IrcStage, dict[str, TrainRecord], list[TracePoint]]:
    """Train the correctors one after another.

    Corrector ``i`` learns ``y - P_{i-1}`` from ``P_{i-1}`` (or from ``P0`` in
    ``fixed_p0`` mode) for exactly the configured epochs, seeded with
    ``seed + i``. Afterwards ``P_i = P_{i-1} + corrector_i(input)``. The
    returned trace holds the error of ``P_0 .. P_T`` over every sample.

    Raises
    ------
    StageOrderError
        When ``fim`` has not been trained.
    """
    if fim is None:
        raise StageOrderError("train the FIM before IRC-Net")
    splits = _normalised_splits(dataset)
    all_x, all_y = normalised_arrays(dataset)
    adam = config.optimizer.to_adam()
    mode: IrcInput = config.irc_input

    p0 = {"train": predict(fim, splits.train_x), "val": predict(fim, splits.val_x), "all": predict(fim, all_x)}
    current = dict(p0)
    trace = [TracePoint(0, *regression_errors(current["all"], all_y))]
    correctors: list[MlpModel] = []
    records: dict[str, TrainRecord] = {}

    for iteration in range(1, config.irc_iterations + 1):
        inputs = current if mode == "updated" else p0
        seed = config.seed + iteration
        corrector = init_model(irc_layers(config.architecture), seed)
        corrector, record = train(
            corrector,
            inputs["train"],
            splits.train_y - current["train"],
            inputs["val"],
            splits.val_y - current["val"],
            config.training.irc.to_train_config(seed=seed, adam=adam),
            name=f"irc_{iteration}",
        )
        current = {key: current[key] + predict(corrector, inputs[key]) for key in current}
        correctors.append(corrector)
        records[f"irc_{iteration}"] = record
        trace.append(TracePoint(iteration, *regression_errors(current["all"], all_y)))
        logger.info("IRC iteration finished", extra={"iteration": iteration, "mse": trace[-1].mse, "mae": trace[-1].mae})
    return IrcStage(correctors=correctors, input_mode=mode), records, trace


# ============================================================================
# Inference
# ============================================================================


def spectrum_input(spectrum: Spectrum, bundle: PipelineBundle) -> Array:
    """Normalise one spectrum for the bundle's networks.

    Raises
    ------
    GridMismatchError
        When the spectrum is not sampled on the training grid.
    """
    if spectrum.grid != bundle.frequency_grid:
        raise GridMismatchError(f"spectrum grid {spectrum.grid} differs from the training grid {bundle.frequency_grid}; resampling is not supported")
    return normalize_features(spectrum.features(), bundle.stats).astype(np.float32)[np.newaxis, :]


def fim_batch(bundle: PipelineBundle, x_norm: Array) -> Array:
    return predict(bundle.trained_fim(), x_norm)


def hifr2_batch(bundle: PipelineBundle, x_norm: Array) -> tuple[Array, Array, Array]:
    """Return ``(P0, dP, P0 + dP)`` with ``dP = rrm(x - ffm(P0))``."""
    ffm, rrm = bundle.trained_hifr2()
    p0 = fim_batch(bundle, x_norm)
    delta = predict(rrm, x_norm - predict(ffm, p0))
    return p0, delta, p0 + delta


def irc_batch(bundle: PipelineBundle, x_norm: Array) -> list[Array]:
    """Return ``[P0, P1, ..., PT]`` in training order."""
    stage = bundle.trained_irc()
    p0 = fim_batch(bundle, x_norm)
    iterates = [p0]
    for corrector in stage.correctors:
        source = iterates[-1] if stage.input_mode == "updated" else p0
        iterates.append(iterates[-1] + predict(corrector, source))
    return iterates


def predict_fim(bundle: PipelineBundle, spectrum: Spectrum, *, clip: bool = False) -> Estimate:
    """Estimate ``P0`` for one spectrum."""
    return _estimate(fim_batch(bundle, spectrum_input(spectrum, bundle))[0], bundle.stats, clip=clip)


@dataclass(frozen=True)
class HybridEstimate:
    initial: Estimate
    correction: FloatArray
    refined: Estimate


def predict_hifr2(bundle: PipelineBundle, spectrum: Spectrum, *, clip: bool = False) -> HybridEstimate:
    """Return ``P0``, the normalised correction ``dP`` and ``P = P0 + dP``."""
    p0, delta, refined = hifr2_batch(bundle, spectrum_input(spectrum, bundle))
    return HybridEstimate(
        initial=_estimate(p0[0], bundle.stats, clip=clip),
        correction=delta[0].astype(np.float64),
        refined=_estimate(refined[0], bundle.stats, clip=clip),
    )


def predict_irc(bundle: PipelineBundle, spectrum: Spectrum, *, clip: bool = False) -> list[Estimate]:
    """Return the estimates ``P_0 .. P_T``; the last one is the IRC-Net answer."""
    return [_estimate(p[0], bundle.stats, clip=clip) for p in irc_batch(bundle, spectrum_input(spectrum, bundle))]


# ============================================================================
# Persistence
# ============================================================================


class _ComponentEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str
    sha256: str
    wall_time_s: float | None = None


class BundleManifest(BaseModel):
    """Schema of ``bundle.json``."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1]
    rng_algorithm: str
    dataset_checksum: str
    frequency_grid: dict[str, float | int]
    stats: dict[str, Any]
    components: dict[str, _ComponentEntry]
    irc_input: IrcInput | None = None
    irc_trace: list[dict[str, float]] = []
    config: dict[str, Any] = {}


def save_bundle(bundle: PipelineBundle, directory: Path, *, config: RunConfig | None = None) -> Path:
    """Write every trained component as a checkpoint plus ``bundle.json``; return the manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    named: list[tuple[str, MlpModel]] = [(name, model) for name, model in (("fim", bundle.fim), ("ffm", bundle.ffm), ("rrm", bundle.rrm)) if model is not None]
    if bundle.irc is not None:
        named.extend((f"irc_{i}", corrector) for i, corrector in enumerate(bundle.irc.correctors, start=1))

    components: dict[str, _ComponentEntry] = {}
    for name, model in named:
        filename = f"{name}.ckpt"
        record = bundle.records.get(name)
        digest = save_checkpoint(model, None, directory / filename, name=name, dataset_checksum=bundle.dataset_checksum)
        components[name] = _ComponentEntry(file=filename, sha256=digest, wall_time_s=None if record is None else record.wall_time_s)

    grid = bundle.frequency_grid
    manifest = BundleManifest(
        schema_version=BUNDLE_SCHEMA_VERSION,
        rng_algorithm=RNG_ALGORITHM,
        dataset_checksum=bundle.dataset_checksum,
        frequency_grid={"f_start_ghz": grid.f_start_ghz, "f_stop_ghz": grid.f_stop_ghz, "n_points": grid.n_points},
        stats=stats_to_dict(bundle.stats),
        components=components,
        irc_input=None if bundle.irc is None else bundle.irc.input_mode,
        irc_trace=[{"iteration": p.iteration, "mse": p.mse, "mae": p.mae} for p in bundle.irc_trace],
        config={} if config is None else config.model_dump(mode="json"),
    )
    path = directory / "bundle.json"
    temp = path.with_name(path.name + ".tmp")
    temp.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2), encoding="utf-8")
    temp.replace(path)
    logger.info("Saved pipeline bundle", extra={"path": str(directory), "components": sorted(components)})
    return path


def _read_bundle_manifest(path: Path) -> BundleManifest:
    raw = json.loads(path.read_text(encoding="utf-8"))
    version = raw.get("schema_version") if isinstance(raw, dict) else None
    if version != BUNDLE_SCHEMA_VERSION:
        raise SchemaVersionError(f"{path} declares bundle schema {version!r}; this release reads schema {BUNDLE_SCHEMA_VERSION}")
    try:
        return BundleManifest.model_validate(raw)
    except ValidationError as exc:
        raise CheckpointError(f"{path} is not a valid bundle manifest: {exc}") from exc


def load_bundle(directory: Path, *, dataset_checksum: str | None = None) -> PipelineBundle:
    """Load a bundle written by :func:`save_bundle`.

    Raises
    ------
    DatasetIntegrityError
        When a checkpoint file does not match the digest in ``bundle.json``.
    CheckpointError
        When a component was trained on another dataset than the bundle records.
    """
    manifest = _read_bundle_manifest(directory / "bundle.json")
    if dataset_checksum is not None and dataset_checksum != manifest.dataset_checksum:
        logger.warning("Bundle was trained on a different dataset", extra={"path": str(directory), "recorded": manifest.dataset_checksum, "current": dataset_checksum})

    models: dict[str, MlpModel] = {}
    for name, entry in manifest.components.items():
        path = directory / entry.file
        if hashlib.sha256(path.read_bytes()).hexdigest() != entry.sha256:
            raise DatasetIntegrityError(f"{path} does not match the digest recorded in bundle.json")
        loaded = load_checkpoint(path, dataset_checksum=manifest.dataset_checksum)
        if loaded.dataset_mismatch:
            raise CheckpointError(f"component {name} was trained on a different dataset than the bundle")
        models[name] = loaded.model

    correctors = [models[f"irc_{i}"] for i in range(1, len(models) + 1) if f"irc_{i}" in models]
    grid = manifest.frequency_grid
    bundle = PipelineBundle(
        stats=stats_from_dict(manifest.stats),
        frequency_grid=FrequencyGrid(float(grid["f_start_ghz"]), float(grid["f_stop_ghz"]), int(grid["n_points"])),
        dataset_checksum=manifest.dataset_checksum,
        fim=models.get("fim"),
        ffm=models.get("ffm"),
        rrm=models.get("rrm"),
        irc=IrcStage(correctors=correctors, input_mode=manifest.irc_input or "updated") if correctors else None,
        irc_trace=[TracePoint(int(p["iteration"]), p["mse"], p["mae"]) for p in manifest.irc_trace],
    )
    for name, entry in manifest.components.items():
        if entry.wall_time_s is not None:
            bundle.records[name] = TrainRecord(wall_time_s=entry.wall_time_s)
    logger.info("Loaded pipeline bundle", extra={"path": str(directory), "components": sorted(models)})
    return bundle


__all__ = [
    "BUNDLE_SCHEMA_VERSION",
    "FFM_SEED_OFFSET",
    "RRM_SEED_OFFSET",
    "BundleManifest",
    "Estimate",
    "HybridEstimate",
    "IrcStage",
    "PipelineBundle",
    "TracePoint",
    "ffm_layers",
    "fim_batch",
    "fim_layers",
    "hifr2_batch",
    "irc_batch",
    "irc_layers",
    "load_bundle",
    "normalised_arrays",
    "predict_fim",
    "predict_hifr2",
    "predict_irc",
    "rrm_layers",
    "save_bundle",
    "spectrum_input",
    "train_fim",
    "train_hifr2",
    "train_irc",
]
