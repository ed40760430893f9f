"""Tests for the domain models - the foundation of the type system.

This module validates:
- The footprint bound and geometry feasibility rules
- Substrate, frequency-grid and parameter-grid invariants
- Spectrum feature vectors
- Training schedules
- The Pydantic run configuration and its conversions

All tests here are pure domain logic - no I/O, no OS dependencies.
"""

from __future__ import annotations

from dataclasses import FrozenInstanceError

import numpy as np
import pytest
from pydantic import ValidationError

from siw_inverse.errors import GeometryInfeasibleError, InvalidSubstrateError
from siw_inverse.models import (
    PARAMETER_NAMES,
    REFERENCE_GEOMETRY,
    EarlyStopping,
    FrequencyGrid,
    Geometry,
    GridSettings,
    ParameterGrid,
    RunConfig,
    Spectrum,
    SplitSpec,
    StageSettings,
    SubstrateSpec,
    TrainConfig,
    TrainRecord,
    g_threshold,
    make_rng,
)

# ============================================================================
# Tests: Geometry
# ============================================================================


class TestFootprintBound:
    """G must strictly exceed the bound computed from spacings and radii."""

    @pytest.mark.os_agnostic
    def test_reference_bound(self) -> None:
        assert g_threshold(5.5, 8.0, 0.2, 0.4, 0.8) == pytest.approx(24.4615, abs=1e-4)

    @pytest.mark.os_agnostic
    def test_g_equal_to_the_bound_is_rejected(self) -> None:
        bound = g_threshold(5.5, 8.0, 0.2, 0.4, 0.8)

        with pytest.raises(GeometryInfeasibleError, match="footprint bound"):
            Geometry(5.5, 8.0, 0.2, 0.4, 0.8, bound)

    @pytest.mark.os_agnostic
    def test_g_just_above_the_bound_is_accepted(self) -> None:
        bound = g_threshold(5.5, 8.0, 0.2, 0.4, 0.8)

        assert Geometry(5.5, 8.0, 0.2, 0.4, 0.8, bound + 1e-9).g > bound


class TestGeometryFeasibility:
    """Radii ordering and positive spacings."""

    @pytest.mark.os_agnostic
    def test_equal_radii_are_allowed(self) -> None:
        assert Geometry(5.0, 5.0, 0.4, 0.4, 0.4, 30.0).r2 == 0.4

    @pytest.mark.os_agnostic
    @pytest.mark.parametrize(
        "values",
        [
            (5.0, 5.0, 0.0, 0.4, 0.6, 30.0),
            (5.0, 5.0, 0.6, 0.4, 0.8, 30.0),
            (5.0, 5.0, 0.2, 0.8, 0.6, 30.0),
            (0.0, 5.0, 0.2, 0.4, 0.6, 30.0),
        ],
    )
    def test_infeasible_values(self, values: tuple[float, ...]) -> None:
        with pytest.raises(GeometryInfeasibleError):
            Geometry.from_values(values)

    @pytest.mark.os_agnostic
    def test_geometry_is_immutable(self) -> None:
        with pytest.raises(FrozenInstanceError):
            REFERENCE_GEOMETRY.g = 30.0  # type: ignore[misc]


class TestGeometryConversions:
    """Vectors, dictionaries and single-parameter variants."""

    @pytest.mark.os_agnostic
    def test_dict_follows_parameter_order(self) -> None:
        assert tuple(REFERENCE_GEOMETRY.as_dict()) == PARAMETER_NAMES

    @pytest.mark.os_agnostic
    def test_from_values_accepts_arrays(self) -> None:
        assert Geometry.from_values(REFERENCE_GEOMETRY.as_array()) == REFERENCE_GEOMETRY

    @pytest.mark.os_agnostic
    def test_with_parameter_replaces_one_value(self) -> None:
        variant = REFERENCE_GEOMETRY.with_parameter("D2", 9.0)

        assert variant.d2 == 9.0
        assert variant.d1 == REFERENCE_GEOMETRY.d1

    @pytest.mark.os_agnostic
    def test_with_parameter_revalidates(self) -> None:
        with pytest.raises(GeometryInfeasibleError):
            REFERENCE_GEOMETRY.with_parameter("R1", 0.5)

    @pytest.mark.os_agnostic
    def test_with_unknown_parameter(self) -> None:
        with pytest.raises(KeyError, match="unknown parameter"):
            REFERENCE_GEOMETRY.with_parameter("W", 1.0)


# ============================================================================
# Tests: Substrate and grids
# ============================================================================


class TestSubstrateSpec:
    """Physical constants must be usable."""

    @pytest.mark.os_agnostic
    def test_permittivity_below_vacuum(self) -> None:
        with pytest.raises(InvalidSubstrateError, match="permittivity"):
            SubstrateSpec(relative_permittivity=0.5)

    @pytest.mark.os_agnostic
    def test_zero_width(self) -> None:
        with pytest.raises(InvalidSubstrateError, match="width"):
            SubstrateSpec(total_width_mm=0.0)


class TestFrequencyGrid:
    """Uniform sampling including both end points."""

    @pytest.mark.os_agnostic
    def test_end_points_are_sampled(self) -> None:
        freqs = FrequencyGrid(9.0, 20.0, 12).frequencies()

        assert (freqs[0], freqs[-1], len(freqs)) == (9.0, 20.0, 12)

    @pytest.mark.os_agnostic
    def test_reversed_band(self) -> None:
        with pytest.raises(ValueError, match="below"):
            FrequencyGrid(20.0, 9.0, 10)

    @pytest.mark.os_agnostic
    def test_single_point(self) -> None:
        with pytest.raises(ValueError, match="n_points"):
            FrequencyGrid(9.0, 20.0, 1)


class TestParameterGrid:
    """Presets and axis validation."""

    @pytest.mark.os_agnostic
    def test_default_axes(self) -> None:
        grid = ParameterGrid.full()

        assert (len(grid.d_values), len(grid.r_values), len(grid.g_values)) == (13, 5, 11)
        assert grid.d_values[-1] == 10.0

    @pytest.mark.os_agnostic
    def test_unsorted_axis(self) -> None:
        with pytest.raises(ValueError, match="strictly ascending"):
            ParameterGrid(d_values=(5.0, 4.0))

    @pytest.mark.os_agnostic
    def test_non_positive_axis(self) -> None:
        with pytest.raises(ValueError, match="positive"):
            ParameterGrid(r_values=(0.0, 0.2))


class TestSpectrum:
    """Feature vectors are |S11| followed by |S21|."""

    @pytest.mark.os_agnostic
    def test_feature_layout(self) -> None:
        grid = FrequencyGrid(9.0, 20.0, 3)
        spectrum = Spectrum(np.array([0.1, 0.2, 0.3]), np.array([0.9, 0.8, 0.7]), grid)

        assert spectrum.features().tolist() == [0.1, 0.2, 0.3, 0.9, 0.8, 0.7]
        assert Spectrum.from_features(spectrum.features(), grid).s21_mag.tolist() == [0.9, 0.8, 0.7]

    @pytest.mark.os_agnostic
    def test_wrong_length(self) -> None:
        with pytest.raises(ValueError, match="length 6"):
            Spectrum.from_features(np.zeros(5), FrequencyGrid(9.0, 20.0, 3))


# ============================================================================
# Tests: Training models
# ============================================================================


class TestTrainingModels:
    """Schedules reject nonsense; records count epochs."""

    @pytest.mark.os_agnostic
    def test_zero_patience(self) -> None:
        with pytest.raises(ValueError, match="patience"):
            EarlyStopping(patience=0)

    @pytest.mark.os_agnostic
    def test_zero_batch(self) -> None:
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(batch_size=0)

    @pytest.mark.os_agnostic
    def test_record_epochs(self) -> None:
        assert TrainRecord(train_mse=[0.3, 0.2, 0.1]).epochs == 3

    @pytest.mark.os_agnostic
    def test_split_fractions_stay_inside_the_unit_interval(self) -> None:
        with pytest.raises(ValueError, match="train_fraction"):
            SplitSpec(train_fraction=1.0)

    @pytest.mark.os_agnostic
    def test_rng_is_reproducible_per_seed(self) -> None:
        assert make_rng(7).random() == make_rng(7).random()
        assert make_rng(7).random() != make_rng(8).random()


# ============================================================================
# Tests: Run configuration
# ============================================================================


class TestRunConfig:
    """Validated at the boundary, converted into domain objects."""

    @pytest.mark.os_agnostic
    def test_defaults(self) -> None:
        config = RunConfig()

        assert config.irc_iterations == 5
        assert config.training.irc.patience is None
        assert config.architecture.fim_hidden[0] == 1500

    @pytest.mark.os_agnostic
    def test_stage_without_patience_runs_every_epoch(self) -> None:
        train_config = StageSettings(max_epochs=7, patience=None).to_train_config(seed=3, adam=RunConfig().optimizer.to_adam())

        assert train_config.early_stopping is None
        assert (train_config.max_epochs, train_config.seed) == (7, 3)

    @pytest.mark.os_agnostic
    def test_stage_learning_rate_overrides_the_shared_optimizer(self) -> None:
        adam = RunConfig().optimizer.to_adam()

        train_config = StageSettings(learning_rate=5e-4).to_train_config(seed=0, adam=adam)

        assert train_config.adam.learning_rate == 5e-4
        assert train_config.adam.beta2 == adam.beta2

    @pytest.mark.os_agnostic
    def test_fim_takes_a_smaller_step_than_the_other_networks(self) -> None:
        config = RunConfig.model_validate({"training": {"fim": {"max_epochs": 9}}})
        adam = config.optimizer.to_adam()

        assert config.training.fim.to_train_config(seed=0, adam=adam).adam.learning_rate == 1e-4
        assert config.training.ffm.to_train_config(seed=0, adam=adam).adam.learning_rate == 1e-3
        assert config.training.irc.to_train_config(seed=0, adam=adam).adam.learning_rate == 1e-3

    @pytest.mark.os_agnostic
    def test_fim_learning_rate_can_follow_the_optimizer_again(self) -> None:
        config = RunConfig.model_validate({"training": {"fim": {"learning_rate": None}}, "optimizer": {"learning_rate": 2e-3}})

        assert config.training.fim.to_train_config(seed=0, adam=config.optimizer.to_adam()).adam.learning_rate == 2e-3

    @pytest.mark.os_agnostic
    def test_explicit_axis_overrides_the_preset(self) -> None:
        grid = GridSettings(preset="desk", g_values=[30.0]).to_grid()

        assert grid.d_values == ParameterGrid.desk().d_values
        assert grid.g_values == (30.0,)

    @pytest.mark.os_agnostic
    def test_via_diameter_must_stay_below_the_pitch(self) -> None:
        with pytest.raises(ValidationError, match="below the pitch"):
            RunConfig.model_validate({"substrate": {"via_diameter_mm": 1.3, "via_pitch_mm": 1.3}})

    @pytest.mark.os_agnostic
    def test_physical_invariants_surface_as_validation_errors(self) -> None:
        with pytest.raises(ValidationError, match="below f_stop"):
            RunConfig.model_validate({"frequency_grid": {"f_start_ghz": 21.0}})

    @pytest.mark.os_agnostic
    def test_empty_hidden_widths(self) -> None:
        with pytest.raises(ValidationError, match="hidden widths"):
            RunConfig.model_validate({"architecture": {"irc_hidden": []}})

    @pytest.mark.os_agnostic
    def test_split_spec_carries_the_base_seed(self) -> None:
        assert RunConfig(seed=11).split_spec().seed == 11
