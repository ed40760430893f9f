"""Inverse-design pipelines: architectures, stage order, inference and bundles."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from conftest import kink_free_inputs

from siw_inverse import dataset as ds
from siw_inverse.errors import DatasetIntegrityError, GridMismatchError, SchemaVersionError, StageOrderError
from siw_inverse.models import ArchitectureSettings, FrequencyGrid, RunConfig, Spectrum, make_rng
from siw_inverse.neural import Activation, gradient_check, init_model, predict
from siw_inverse.pipeline import (
    IrcStage,
    PipelineBundle,
    ffm_layers,
    fim_batch,
    fim_layers,
    irc_batch,
    irc_layers,
    load_bundle,
    normalised_arrays,
    predict_fim,
    predict_hifr2,
    predict_irc,
    rrm_layers,
    save_bundle,
    train_hifr2,
    train_irc,
)


def _test_spectrum(dataset: ds.Dataset) -> Spectrum:
    assert dataset.split is not None
    return dataset.sample(dataset.split.test[0]).spectrum


# ============================================================================
# Tests: architectures
# ============================================================================


class TestArchitectures:
    """Published widths, activations and dropout placement."""

    @pytest.mark.os_agnostic
    def test_fim_shape(self) -> None:
        layers = fim_layers(2002, ArchitectureSettings())

        assert [spec.out_dim for spec in layers] == [1500, 1000, 500, 250, 125, 64, 32, 6]
        assert all(spec.activation is Activation.RELU for spec in layers)
        assert [i for i, spec in enumerate(layers) if spec.dropout_after > 0] == [1, 2, 3, 4, 5]

    @pytest.mark.os_agnostic
    def test_ffm_mirrors_the_spectrum(self) -> None:
        layers = ffm_layers(2002, ArchitectureSettings())

        assert layers[0].in_dim == 6
        assert layers[-1].out_dim == 2002
        assert layers[-1].activation is Activation.LINEAR
        assert [i for i, spec in enumerate(layers) if spec.dropout_after > 0] == [0, 1, 2, 3, 4]

    @pytest.mark.os_agnostic
    def test_rrm_has_a_signed_head(self) -> None:
        assert rrm_layers(42, ArchitectureSettings())[-1].activation is Activation.LINEAR

    @pytest.mark.os_agnostic
    def test_corrector_is_a_small_leaky_network(self) -> None:
        layers = irc_layers(ArchitectureSettings())

        assert [spec.describe() for spec in layers] == ["6->64 leaky_relu(0.01)", "64->64 leaky_relu(0.01)", "64->6 linear"]

    @pytest.mark.os_agnostic
    def test_shrunk_fim_backward_matches_central_differences(self) -> None:
        layers = fim_layers(12, ArchitectureSettings(fim_hidden=[10, 9, 8, 8, 7, 7, 6]))
        model = init_model(layers, seed=21, dtype=np.float64)
        x = kink_free_inputs(make_rng(22), model.weights[0], rows=8)
        y = make_rng(23).uniform(size=(8, 6))

        assert layers[-1].activation is Activation.RELU
        assert [i for i, spec in enumerate(layers) if spec.dropout_after > 0] == [1, 2, 3, 4, 5]
        assert np.any(predict(model, x) > 0)
        assert gradient_check(model, x, y) < 1e-4

    @pytest.mark.os_agnostic
    def test_shrunk_ffm_backward_matches_central_differences(self) -> None:
        layers = ffm_layers(10, ArchitectureSettings(ffm_hidden=[6, 7, 8, 8, 9, 9]))
        model = init_model(layers, seed=31, dtype=np.float64)
        x = kink_free_inputs(make_rng(32), model.weights[0], rows=8)
        y = make_rng(33).normal(size=(8, 10))

        assert [i for i, spec in enumerate(layers) if spec.dropout_after > 0] == [0, 1, 2, 3, 4]
        assert gradient_check(model, x, y) < 1e-4


# ============================================================================
# Tests: stage order
# ============================================================================


class TestStageOrder:
    """Later stages need the FIM and a prepared dataset."""

    @pytest.mark.os_agnostic
    def test_unprepared_dataset_is_refused(self, raw_dataset: ds.Dataset) -> None:
        with pytest.raises(StageOrderError):
            PipelineBundle.for_dataset(raw_dataset)

    @pytest.mark.os_agnostic
    def test_hifr2_needs_the_fim(self, prepared_dataset: ds.Dataset, tiny_config: RunConfig) -> None:
        with pytest.raises(StageOrderError, match="FIM"):
            train_hifr2(prepared_dataset, None, tiny_config)

    @pytest.mark.os_agnostic
    def test_irc_needs_the_fim(self, prepared_dataset: ds.Dataset, tiny_config: RunConfig) -> None:
        with pytest.raises(StageOrderError, match="FIM"):
            train_irc(prepared_dataset, None, tiny_config)

    @pytest.mark.os_agnostic
    def test_missing_stage_cannot_predict(self, prepared_dataset: ds.Dataset) -> None:
        bundle = PipelineBundle.for_dataset(prepared_dataset)

        with pytest.raises(StageOrderError, match="hifr2"):
            predict_hifr2(bundle, _test_spectrum(prepared_dataset))


# ============================================================================
# Tests: training
# ============================================================================


class TestTraining:
    """Every stage trains with its own seed and schedule."""

    @pytest.mark.os_agnostic
    def test_records_cover_every_network(self, trained_bundle: PipelineBundle) -> None:
        assert set(trained_bundle.records) == {"fim", "ffm", "rrm", "irc_1", "irc_2"}

    @pytest.mark.os_agnostic
    def test_correctors_run_their_full_schedule(self, trained_bundle: PipelineBundle) -> None:
        assert trained_bundle.records["irc_1"].epochs == 2
        assert trained_bundle.records["irc_2"].epochs == 2

    @pytest.mark.os_agnostic
    def test_stage_seeds_are_offset_from_the_run_seed(self, trained_bundle: PipelineBundle) -> None:
        ffm, rrm = trained_bundle.trained_hifr2()
        correctors = trained_bundle.trained_irc().correctors

        assert (trained_bundle.trained_fim().seed, ffm.seed, rrm.seed) == (42, 142, 242)
        assert [c.seed for c in correctors] == [43, 44]

    @pytest.mark.os_agnostic
    def test_trace_starts_at_the_fim_estimate(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        x, y = normalised_arrays(prepared_dataset)
        p0 = fim_batch(trained_bundle, x)

        assert [p.iteration for p in trained_bundle.irc_trace] == [0, 1, 2]
        assert trained_bundle.irc_trace[0].mse == pytest.approx(float(np.mean((p0.astype(np.float64) - y) ** 2)), rel=1e-5)


# ============================================================================
# Tests: inference
# ============================================================================


class TestInference:
    """Single-spectrum estimates in physical units."""

    @pytest.mark.os_agnostic
    def test_fim_estimate_names_every_parameter(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        estimate = predict_fim(trained_bundle, _test_spectrum(prepared_dataset))

        assert list(estimate.as_dict()) == ["D1", "D2", "R1", "R2", "R3", "G"]

    @pytest.mark.os_agnostic
    def test_clip_keeps_estimates_inside_the_training_range(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        estimate = predict_fim(trained_bundle, _test_spectrum(prepared_dataset), clip=True)
        stats = trained_bundle.stats

        assert np.all(estimate.physical >= stats.target_min - 1e-9)
        assert np.all(estimate.physical <= stats.target_max + 1e-9)

    @pytest.mark.os_agnostic
    def test_hybrid_estimate_adds_the_correction(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        result = predict_hifr2(trained_bundle, _test_spectrum(prepared_dataset))

        assert np.allclose(result.refined.normalized, result.initial.normalized + result.correction, atol=1e-6)

    @pytest.mark.os_agnostic
    def test_irc_iterates_start_from_the_fim(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        spectrum = _test_spectrum(prepared_dataset)

        iterates = predict_irc(trained_bundle, spectrum)

        assert len(iterates) == 3
        assert np.allclose(iterates[0].physical, predict_fim(trained_bundle, spectrum).physical)

    @pytest.mark.os_agnostic
    def test_fixed_input_mode_diverges_after_the_first_corrector(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset) -> None:
        x, _ = normalised_arrays(prepared_dataset)
        other = PipelineBundle(
            stats=trained_bundle.stats,
            frequency_grid=trained_bundle.frequency_grid,
            dataset_checksum=trained_bundle.dataset_checksum,
            fim=trained_bundle.fim,
            irc=IrcStage(correctors=trained_bundle.trained_irc().correctors, input_mode="fixed_p0"),
        )

        updated_iterates = irc_batch(trained_bundle, x)
        fixed_iterates = irc_batch(other, x)

        assert np.array_equal(updated_iterates[1], fixed_iterates[1])
        assert not np.array_equal(updated_iterates[2], fixed_iterates[2])

    @pytest.mark.os_agnostic
    def test_other_grid_is_refused(self, trained_bundle: PipelineBundle) -> None:
        foreign = Spectrum.from_features(np.full(42, 0.5), FrequencyGrid(10.0, 20.0, 21))

        with pytest.raises(GridMismatchError, match="resampling"):
            predict_fim(trained_bundle, foreign)


# ============================================================================
# Tests: bundle persistence
# ============================================================================


class TestBundlePersistence:
    """Bundles restore every component and refuse tampering."""

    @pytest.mark.os_agnostic
    def test_round_trip_predicts_identically(self, trained_bundle: PipelineBundle, prepared_dataset: ds.Dataset, tmp_path: Path) -> None:
        save_bundle(trained_bundle, tmp_path / "models")
        x, _ = normalised_arrays(prepared_dataset)

        loaded = load_bundle(tmp_path / "models", dataset_checksum=prepared_dataset.checksum)

        assert np.array_equal(irc_batch(loaded, x)[-1], irc_batch(trained_bundle, x)[-1])
        assert loaded.irc_trace == trained_bundle.irc_trace
        assert loaded.frequency_grid == trained_bundle.frequency_grid
        assert set(loaded.wall_times()) == set(trained_bundle.records)

    @pytest.mark.os_agnostic
    def test_manifest_records_the_configuration(self, trained_bundle: PipelineBundle, tiny_config: RunConfig, tmp_path: Path) -> None:
        manifest = json.loads(save_bundle(trained_bundle, tmp_path / "models", config=tiny_config).read_text(encoding="utf-8"))

        assert manifest["config"]["irc_iterations"] == 2
        assert sorted(manifest["components"]) == ["ffm", "fim", "irc_1", "irc_2", "rrm"]

    @pytest.mark.os_agnostic
    def test_replaced_checkpoint_is_detected(self, trained_bundle: PipelineBundle, tmp_path: Path) -> None:
        directory = tmp_path / "models"
        save_bundle(trained_bundle, directory)
        (directory / "fim.ckpt").write_bytes((directory / "rrm.ckpt").read_bytes())

        with pytest.raises(DatasetIntegrityError, match="fim.ckpt"):
            load_bundle(directory)

    @pytest.mark.os_agnostic
    def test_future_schema_is_refused(self, trained_bundle: PipelineBundle, tmp_path: Path) -> None:
        directory = tmp_path / "models"
        manifest_path = save_bundle(trained_bundle, directory)
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        manifest["schema_version"] = 2
        manifest_path.write_text(json.dumps(manifest), encoding="utf-8")

        with pytest.raises(SchemaVersionError):
            load_bundle(directory)
