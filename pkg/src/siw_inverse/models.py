"""Data models for the SIW filter inverse-design workflow.

Purpose
-------
Define the immutable value objects that flow between the surrogate solver,
the dataset builder, the dense-network engine and the pipeline, plus the
Pydantic models that validate run configuration at the boundary.

Contents
--------
* :class:`SubstrateSpec`, :class:`Geometry`, :class:`FrequencyGrid`,
  :class:`Spectrum` - physical inputs and outputs of the solver.
* :class:`ParameterGrid`, :class:`SplitSpec`, :class:`NormalizationStats`,
  :class:`TargetMode` - dataset description.
* :class:`EarlyStopping`, :class:`AdamSettings`, :class:`TrainConfig`,
  :class:`TrainRecord` - training description and history.
* :class:`RunConfig` and its sections - the validated run configuration.
* :func:`make_rng` - the one random generator used everywhere.

System Role
-----------
Domain model layer. Everything above imports from here; nothing here imports
from the rest of the package except :mod:`siw_inverse.errors`.

Architecture Notes
------------------
- Domain objects are frozen dataclasses; arrays inside them are never mutated.
- Run configuration is Pydantic with ``extra="forbid"`` so typos fail loudly.
- Lengths are millimetres, frequencies gigahertz, unless a name says otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import GeometryInfeasibleError, InvalidSubstrateError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

#: Name of the bit generator recorded in every manifest and checkpoint header.
RNG_ALGORITHM = "numpy.Philox"

#: Design-parameter order used for target vectors, CSV columns and reports.
PARAMETER_NAMES: tuple[str, ...] = ("D1", "D2", "R1", "R2", "R3", "G")

# Footprint constraint on the scaling factor: ((R1 + 2R2 + D1 + D2 + 2R3) * 2 - margin) / pitch < G
_FOOTPRINT_MARGIN_MM = 0.4
_FOOTPRINT_PITCH_MM = 1.3


def make_rng(seed: int) -> np.random.Generator:
    """Return the counter-based generator used for every random draw.

    Examples
    --------
    >>> a = make_rng(42).integers(0, 1000, size=3)
    >>> b = make_rng(42).integers(0, 1000, size=3)
    >>> bool((a == b).all())
    True
    """
    return np.random.Generator(np.random.Philox(seed))


def g_threshold(d1: float, d2: float, r1: float, r2: float, r3: float) -> float:
    """Return the lower bound the scaling factor G must strictly exceed.

    The operation order is fixed; enumeration and re-validation both call this
    helper so a geometry never flips between valid and invalid by rounding.

    Examples
    --------
    >>> round(g_threshold(5.5, 8.0, 0.2, 0.4, 0.8), 4)
    24.4615
    >>> round(g_threshold(10.0, 10.0, 1.0, 1.0, 1.0), 2)
    38.15
    """
    return ((r1 + 2 * r2 + d1 + d2 + 2 * r3) * 2 - _FOOTPRINT_MARGIN_MM) / _FOOTPRINT_PITCH_MM


# ============================================================================
# Physical Domain Models
# ============================================================================


@dataclass(frozen=True)
class SubstrateSpec:
    """Substrate and via-fence constants of the SIW.

    Attributes
    ----------
    relative_permittivity:
        Dielectric constant of the substrate (RT5880 by default).
    total_width_mm:
        Centre-to-centre distance W between the two via rows.
    via_diameter_mm:
        Sidewall via diameter d.
    via_pitch_mm:
        Centre-to-centre spacing p between neighbouring sidewall vias.

    Examples
    --------
    >>> SubstrateSpec().total_width_mm
    15.0
    >>> SubstrateSpec(via_diameter_mm=-0.1)
    Traceback (most recent call last):
    ...
    siw_inverse.errors.InvalidSubstrateError: via diameter -0.1 mm must be positive

    The leakage rule ``d < p`` is a design rule reported by
    :func:`siw_inverse.wave_core.check_via_rules`, not a construction error.
    """

    relative_permittivity: float = 2.2
    total_width_mm: float = 15.0
    via_diameter_mm: float = 0.8
    via_pitch_mm: float = 1.3

    def __post_init__(self) -> None:
        if self.relative_permittivity < 1:
            raise InvalidSubstrateError(f"relative permittivity {self.relative_permittivity} must be >= 1")
        if self.total_width_mm <= 0:
            raise InvalidSubstrateError(f"total width {self.total_width_mm} mm must be positive")
        if self.via_diameter_mm <= 0:
            raise InvalidSubstrateError(f"via diameter {self.via_diameter_mm} mm must be positive")
        if self.via_pitch_mm <= 0:
            raise InvalidSubstrateError(f"via pitch {self.via_pitch_mm} mm must be positive")


@dataclass(frozen=True)
class Geometry:
    """The six design parameters of the multimode filter.

    Attributes
    ----------
    d1, d2:
        First-to-second and second-to-third post spacing in mm.
    r1, r2, r3:
        Post radii in mm, ordered ``r3 >= r2 >= r1 > 0``.
    g:
        Dimensionless scaling factor; the active length is ``g * p + d``.

    Examples
    --------
    >>> Geometry(d1=5.5, d2=8.0, r1=0.2, r2=0.4, r3=0.8, g=26.0).as_tuple()
    (5.5, 8.0, 0.2, 0.4, 0.8, 26.0)
    >>> Geometry(d1=5.5, d2=8.0, r1=0.4, r2=0.2, r3=0.8, g=26.0)
    Traceback (most recent call last):
    ...
    siw_inverse.errors.GeometryInfeasibleError: radii must satisfy R3 >= R2 >= R1 > 0, got (0.4, 0.2, 0.8)
    """

    d1: float
    d2: float
    r1: float
    r2: float
    r3: float
    g: float

    def __post_init__(self) -> None:
        if not (self.r3 >= self.r2 >= self.r1 > 0):
            raise GeometryInfeasibleError(f"radii must satisfy R3 >= R2 >= R1 > 0, got ({self.r1}, {self.r2}, {self.r3})")
        if self.d1 <= 0 or self.d2 <= 0:
            raise GeometryInfeasibleError(f"spacings must be positive, got D1={self.d1}, D2={self.d2}")
        threshold = g_threshold(self.d1, self.d2, self.r1, self.r2, self.r3)
        if not threshold < self.g:
            raise GeometryInfeasibleError(f"scaling factor G={self.g} must exceed the footprint bound {threshold:.6g}")

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        """Return the parameters in :data:`PARAMETER_NAMES` order."""
        return (self.d1, self.d2, self.r1, self.r2, self.r3, self.g)

    def as_array(self) -> FloatArray:
        return np.asarray(self.as_tuple(), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PARAMETER_NAMES, self.as_tuple(), strict=True))

    @classmethod
    def from_values(cls, values: npt.ArrayLike) -> Geometry:
        """Build a geometry from a length-6 vector in :data:`PARAMETER_NAMES` order."""
        d1, d2, r1, r2, r3, g = (float(v) for v in np.asarray(values, dtype=np.float64).reshape(6))
        return cls(d1=d1, d2=d2, r1=r1, r2=r2, r3=r3, g=g)

    def with_parameter(self, name: str, value: float) -> Geometry:
        """Return a copy with one parameter (named as in :data:`PARAMETER_NAMES`) replaced."""
        values = self.as_dict()
        if name not in values:
            raise KeyError(f"unknown parameter {name!r}; expected one of {', '.join(PARAMETER_NAMES)}")
        values[name] = value
        return Geometry.from_values([values[key] for key in PARAMETER_NAMES])


#: Reference geometry of the fabricated filter.
REFERENCE_GEOMETRY = Geometry(d1=5.5, d2=8.0, r1=0.2, r2=0.4, r3=0.8, g=26.0)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency sampling in GHz.

    Examples
    --------
    >>> grid = FrequencyGrid()
    >>> grid.n_points, round(grid.step_ghz * 1000, 6)
    (1001, 11.0)
    """

    f_start_ghz: float = 9.0
    f_stop_ghz: float = 20.0
    n_points: int = 1001

    def __post_init__(self) -> None:
        if not self.f_start_ghz < self.f_stop_ghz:
            raise ValueError(f"f_start {self.f_start_ghz} GHz must be below f_stop {self.f_stop_ghz} GHz")
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")

    @property
    def step_ghz(self) -> float:
        return (self.f_stop_ghz - self.f_start_ghz) / (self.n_points - 1)

    def frequencies(self) -> FloatArray:
        """Return the sample frequencies in GHz."""
        return np.linspace(self.f_start_ghz, self.f_stop_ghz, self.n_points, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """|S11| and |S21| magnitudes sampled on a :class:`FrequencyGrid`."""

    s11_mag: FloatArray
    s21_mag: FloatArray
    grid: FrequencyGrid

    def __post_init__(self) -> None:
        if self.s11_mag.shape != (self.grid.n_points,) or self.s21_mag.shape != (self.grid.n_points,):
            raise ValueError(f"spectrum channels must both have length {self.grid.n_points}, got {self.s11_mag.shape} and {self.s21_mag.shape}")

    def features(self) -> FloatArray:
        """Return the concatenated feature vector ``[|S11|, |S21|]``."""
        return np.concatenate([self.s11_mag, self.s21_mag])

    @classmethod
    def from_features(cls, features: npt.ArrayLike, grid: FrequencyGrid) -> Spectrum:
        vector = np.asarray(features, dtype=np.float64)
        if vector.shape != (2 * grid.n_points,):
            raise ValueError(f"feature vector must have length {2 * grid.n_points}, got {vector.shape}")
        return cls(s11_mag=vector[: grid.n_points].copy(), s21_mag=vector[grid.n_points :].copy(), grid=grid)


# ============================================================================
# Dataset Models
# ============================================================================


def _stepped(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = round((stop - start) / step) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class ParameterGrid:
    """Sampling lists for the nested-loop enumeration.

    Examples
    --------
    >>> grid = ParameterGrid.full()
    >>> len(grid.d_values), grid.r_values, grid.g_values[:3]
    (13, (0.2, 0.4, 0.6, 0.8, 1.0), (26.0, 27.0, 28.0))
    >>> ParameterGrid.desk().d_values
    (4.0, 5.5, 7.0, 8.5, 10.0)
    """

    d_values: tuple[float, ...] = field(default_factory=lambda: _stepped(4.0, 10.0, 0.5))
    r_values: tuple[float, ...] = field(default_factory=lambda: _stepped(0.2, 1.0, 0.2))
    g_values: tuple[float, ...] = field(default_factory=lambda: _stepped(26.0, 36.0, 1.0))

    def __post_init__(self) -> None:
        for label, values in (("d_values", self.d_values), ("r_values", self.r_values), ("g_values", self.g_values)):
            if any(b <= a for a, b in zip(values, values[1:], strict=False)):
                raise ValueError(f"{label} must be strictly ascending, got {values}")
            if any(v <= 0 for v in values):
                raise ValueError(f"{label} must be positive, got {values}")

    @classmethod
    def full(cls) -> ParameterGrid:
        """D 4..10 step 0.5, R 0.2..1.0 step 0.2, integer G 26..36."""
        return cls()

    @classmethod
    def desk(cls) -> ParameterGrid:
        """Laptop-scale subset of :meth:`full` (1,921 valid geometries)."""
        return cls(d_values=(4.0, 5.5, 7.0, 8.5, 10.0), g_values=(26.0, 30.0, 34.0))


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test split.

    ``validation_fraction`` is carved out of the end of the training portion.
    """

    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    seed: int = 42

    def __post_init__(self) -> None:
        for label, value in (("train_fraction", self.train_fraction), ("validation_fraction", self.validation_fraction)):
            if not 0 < value < 1:
                raise ValueError(f"{label} must lie in (0, 1), got {value}")


class TargetMode(str, Enum):
    """How geometry targets are scaled before training."""

    MINMAX = "minmax"
    ZSCORE = "zscore"


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Feature and target scaling fitted on the training split.

    Attributes
    ----------
    feature_mean, feature_std:
        Per-feature population statistics; ``feature_std`` is floored at 1e-8.
    target_min, target_max:
        Per-parameter range over the training targets.
    target_mode:
        Which target scaling :func:`siw_inverse.dataset.normalize` applies.
    target_mean, target_std:
        Per-parameter population statistics used in z-score mode.
    """

    feature_mean: FloatArray
    feature_std: FloatArray
    target_min: FloatArray
    target_max: FloatArray
    target_mode: TargetMode = TargetMode.MINMAX
    target_mean: FloatArray = field(default_factory=lambda: np.zeros(6))
    target_std: FloatArray = field(default_factory=lambda: np.ones(6))


# ============================================================================
# Training Models
# ============================================================================


@dataclass(frozen=True)
class EarlyStopping:
    """Stop when validation MSE has not improved by ``min_delta`` for ``patience`` epochs."""

    patience: int = 20
    min_delta: float = 1e-6

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class AdamSettings:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch training schedule.

    ``early_stopping=None`` runs exactly ``max_epochs`` epochs and keeps the
    final parameters.
    """

    batch_size: int = 128
    max_epochs: int = 200
    early_stopping: EarlyStopping | None = field(default_factory=EarlyStopping)
    seed: int = 42
    loss: Literal["mse"] = "mse"
    adam: AdamSettings = field(default_factory=AdamSettings)

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class TrainRecord:
    """Per-epoch learning curve of one network.

    ``best_epoch`` and ``stopped_epoch`` are 1-based.
    """

    train_mse: list[float] = field(default_factory=lambda: [])
    val_mse: list[float] = field(default_factory=lambda: [])
    train_mae: list[float] = field(default_factory=lambda: [])
    val_mae: list[float] = field(default_factory=lambda: [])
    best_epoch: int = 0
    stopped_epoch: int = 0
    wall_time_s: float = 0.0

    @property
    def epochs(self) -> int:
        return len(self.train_mse)

    @property
    def best_val_mse(self) -> float | None:
        """Validation MSE of the best epoch; ``None`` before any epoch improved.

        >>> TrainRecord(val_mse=[0.5, 0.2, 0.3], best_epoch=2).best_val_mse
        0.2
        >>> TrainRecord(val_mse=[float("nan")]).best_val_mse is None
        True
        """
        return self.val_mse[self.best_epoch - 1] if self.best_epoch > 0 else None


# ============================================================================
# Run Configuration (Pydantic for external boundary parsing)
# ============================================================================


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SubstrateSettings(_Section):
    relative_permittivity: float = 2.2
    total_width_mm: float = 15.0
    via_diameter_mm: float = 0.8
    via_pitch_mm: float = 1.3

    @model_validator(mode="after")
    def _diameter_below_pitch(self) -> SubstrateSettings:
        if self.via_diameter_mm >= self.via_pitch_mm:
            raise ValueError(f"via diameter {self.via_diameter_mm} mm must be below the pitch {self.via_pitch_mm} mm")
        return self

    def to_spec(self) -> SubstrateSpec:
        return SubstrateSpec(**self.model_dump())


class GridSettings(_Section):
    """Parameter grid; explicit lists override the preset per axis."""

    preset: Literal["full", "desk"] = "full"
    d_values: list[float] | None = None
    r_values: list[float] | None = None
    g_values: list[float] | None = None

    def to_grid(self) -> ParameterGrid:
        base = ParameterGrid.desk() if self.preset == "desk" else ParameterGrid.full()
        return ParameterGrid(
            d_values=tuple(self.d_values) if self.d_values is not None else base.d_values,
            r_values=tuple(self.r_values) if self.r_values is not None else base.r_values,
            g_values=tuple(self.g_values) if self.g_values is not None else base.g_values,
        )


class FrequencySettings(_Section):
    f_start_ghz: float = 9.0
    f_stop_ghz: float = 20.0
    n_points: int = Field(default=1001, ge=2)

    def to_grid(self) -> FrequencyGrid:
        return FrequencyGrid(**self.model_dump())


class SplitSettings(_Section):
    train_fraction: float = Field(default=0.8, gt=0, lt=1)
    validation_fraction: float = Field(default=0.1, gt=0, lt=1)


class StageSettings(_Section):
    """Schedule of one trained network.

    ``patience=None`` disables early stopping; ``learning_rate=None`` uses the
    shared ``[optimizer]`` rate.
    """

    batch_size: int = Field(default=128, ge=1)
    max_epochs: int = Field(default=200, ge=1)
    patience: int | None = Field(default=20, ge=1)
    min_delta: float = Field(default=1e-6, ge=0)
    learning_rate: float | None = Field(default=None, gt=0)

    def to_train_config(self, *, seed: int, adam: AdamSettings) -> TrainConfig:
        stopping = EarlyStopping(self.patience, self.min_delta) if self.patience is not None else None
        if self.learning_rate is not None:
            adam = replace(adam, learning_rate=self.learning_rate)
        return TrainConfig(batch_size=self.batch_size, max_epochs=self.max_epochs, early_stopping=stopping, seed=seed, adam=adam)


class FimStageSettings(StageSettings):
    """FIM schedule; the ReLU head takes a 1e-4 Adam step unless configured otherwise."""

    learning_rate: float | None = Field(default=1e-4, gt=0)


class TrainingSettings(_Section):
    fim: FimStageSettings = FimStageSettings()
    ffm: StageSettings = StageSettings()
    rrm: StageSettings = StageSettings()
    irc: StageSettings = StageSettings(batch_size=32, max_epochs=100, patience=None)


class OptimizerSettings(_Section):
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)

    def to_adam(self) -> AdamSettings:
        return AdamSettings(**self.model_dump())


class ArchitectureSettings(_Section):
    """Hidden-layer widths; the defaults are the published architectures."""

    fim_hidden: list[int] = [1500, 1000, 500, 250, 125, 64, 32]
    ffm_hidden: list[int] = [32, 64, 128, 256, 512, 1024]
    irc_hidden: list[int] = [64, 64]
    dropout: float = Field(default=0.10, ge=0, lt=1)
    leaky_relu_slope: float = Field(default=0.01, ge=0)

    @field_validator("fim_hidden", "ffm_hidden", "irc_hidden")
    @classmethod
    def _positive_widths(cls, value: list[int]) -> list[int]:
        if not value or any(width < 1 for width in value):
            raise ValueError("hidden widths must be a non-empty list of positive integers")
        return value


class EvaluationSettings(_Section):
    channel: Literal["s21", "s11"] = "s21"
    verify_targets: int = Field(default=50, ge=1)
    clip: bool = False
    min_fim_throughput: float = 1000.0
    min_irc_throughput: float = 200.0


class RunConfig(_Section):
    """Complete, validated configuration of a run.

    Examples
    --------
    >>> RunConfig().training.irc.max_epochs
    100
    >>> RunConfig.model_validate({"sed": 1})  # doctest: +ELLIPSIS
    Traceback (most recent call last):
    ...
    pydantic_core._pydantic_core.ValidationError: 1 validation error for RunConfig
    ...
    """

    seed: int = 42
    workers: int | None = Field(default=None, ge=1)
    substrate: SubstrateSettings = SubstrateSettings()
    parameter_grid: GridSettings = GridSettings()
    frequency_grid: FrequencySettings = FrequencySettings()
    split: SplitSettings = SplitSettings()
    target_mode: TargetMode = TargetMode.MINMAX
    training: TrainingSettings = TrainingSettings()
    optimizer: OptimizerSettings = OptimizerSettings()
    architecture: ArchitectureSettings = ArchitectureSettings()
    irc_iterations: int = Field(default=5, ge=1)
    irc_input: Literal["updated", "fixed_p0"] = "updated"
    evaluation: EvaluationSettings = EvaluationSettings()

    @model_validator(mode="after")
    def _physical_sections_valid(self) -> RunConfig:
        # Surface substrate and grid invariant violations as validation errors.
        self.substrate.to_spec()
        self.parameter_grid.to_grid()
        self.frequency_grid.to_grid()
        return self

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.split.train_fraction, self.split.validation_fraction, self.seed)


__all__ = [
    "PARAMETER_NAMES",
    "REFERENCE_GEOMETRY",
    "RNG_ALGORITHM",
    "AdamSettings",
    "ArchitectureSettings",
    "EarlyStopping",
    "EvaluationSettings",
    "FloatArray",
    "FrequencyGrid",
    "FrequencySettings",
    "Geometry",
    "GridSettings",
    "NormalizationStats",
    "OptimizerSettings",
    "ParameterGrid",
    "RunConfig",
    "SplitSettings",
    "SplitSpec",
    "StageSettings",
    "SubstrateSettings",
    "SubstrateSpec",
    "TargetMode",
    "TrainConfig",
    "TrainRecord",
    "TrainingSettings",
    "g_threshold",
    "make_rng",
]
