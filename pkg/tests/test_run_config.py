"""Run-configuration layering: defaults, [run] section, --config file and CLI flags."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from siw_inverse import run_config
from siw_inverse.models import RunConfig
from siw_inverse.run_config import RunConfigError, deep_merge, load_config_file, resolve_run_config
from siw_inverse.run_dir import RunDirectory


def _write(tmp_path: Path, data: object, name: str = "run.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestDeepMerge:
    """Nested sections merge key by key."""

    @pytest.mark.os_agnostic
    def test_inputs_are_not_mutated(self) -> None:
        base = {"training": {"fim": {"max_epochs": 200}}}

        deep_merge(base, {"training": {"fim": {"max_epochs": 5}}})

        assert base == {"training": {"fim": {"max_epochs": 200}}}

    @pytest.mark.os_agnostic
    def test_scalar_replaces_a_mapping(self) -> None:
        assert deep_merge({"workers": {"auto": True}}, {"workers": 4}) == {"workers": 4}


class TestLoadConfigFile:
    """JSON files must hold one object."""

    @pytest.mark.os_agnostic
    def test_reads_an_object(self, tmp_path: Path) -> None:
        assert load_config_file(_write(tmp_path, {"seed": 1})) == {"seed": 1}

    @pytest.mark.os_agnostic
    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(RunConfigError, match="cannot read"):
            load_config_file(tmp_path / "absent.json")

    @pytest.mark.os_agnostic
    def test_invalid_json(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.json"
        path.write_text("{seed: 1", encoding="utf-8")

        with pytest.raises(RunConfigError, match="not valid JSON"):
            load_config_file(path)

    @pytest.mark.os_agnostic
    def test_top_level_list(self, tmp_path: Path) -> None:
        with pytest.raises(RunConfigError, match="JSON object"):
            load_config_file(_write(tmp_path, [1, 2]))

    @pytest.mark.os_agnostic
    def test_run_manifest_yields_its_recorded_config(self, tmp_path: Path) -> None:
        manifest = {"schema_version": 1, "package": "siw_inverse", "config": {"seed": 3}, "seeds": {"base": 3}, "commands": [{"command": "generate"}]}

        assert load_config_file(_write(tmp_path, manifest, "run_manifest.json")) == {"seed": 3}

    @pytest.mark.os_agnostic
    def test_config_with_a_config_key_alone_is_not_a_manifest(self, tmp_path: Path) -> None:
        assert load_config_file(_write(tmp_path, {"config": {"seed": 3}})) == {"config": {"seed": 3}}


class TestResolveRunConfig:
    """Precedence: flags over file over [run] section over defaults."""

    @pytest.mark.os_agnostic
    def test_defaults_when_nothing_is_set(self) -> None:
        assert resolve_run_config(layered={}) == RunConfig()

    @pytest.mark.os_agnostic
    def test_file_overrides_the_layered_section(self, tmp_path: Path) -> None:
        path = _write(tmp_path, {"training": {"fim": {"max_epochs": 3}}})

        resolved = resolve_run_config(path, layered={"seed": 5, "training": {"fim": {"max_epochs": 50, "patience": 4}}})

        assert resolved.seed == 5
        assert resolved.training.fim.max_epochs == 3
        assert resolved.training.fim.patience == 4

    @pytest.mark.os_agnostic
    def test_flags_override_the_file(self, tmp_path: Path) -> None:
        path = _write(tmp_path, {"seed": 5, "workers": 2})

        resolved = resolve_run_config(path, seed=9, threads=3, layered={})

        assert (resolved.seed, resolved.workers) == (9, 3)

    @pytest.mark.os_agnostic
    def test_desk_flag_selects_the_desk_grid(self) -> None:
        resolved = resolve_run_config(desk=True, layered={})

        assert resolved.parameter_grid.to_grid().d_values == (4.0, 5.5, 7.0, 8.5, 10.0)

    @pytest.mark.os_agnostic
    def test_unknown_key_is_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(RunConfigError, match="invalid run configuration"):
            resolve_run_config(_write(tmp_path, {"sed": 1}), layered={})

    @pytest.mark.os_agnostic
    def test_invalid_value_is_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(RunConfigError):
            resolve_run_config(_write(tmp_path, {"split": {"train_fraction": 1.5}}), layered={})

    @pytest.mark.os_agnostic
    def test_layered_section_is_read_when_not_given(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(run_config, "run_section", lambda: {"irc_iterations": 3})

        assert resolve_run_config().irc_iterations == 3

    @pytest.mark.os_agnostic
    def test_recorded_manifest_replays_the_same_config(self, tmp_path: Path) -> None:
        original = resolve_run_config(
            _write(tmp_path, {"seed": 11, "parameter_grid": {"preset": "desk"}, "training": {"fim": {"max_epochs": 7}}}),
            threads=2,
            layered={},
        )
        run = RunDirectory(tmp_path / "run")
        run.record_command("generate", original)
        run.record_command("train", original, model="all")

        replayed = resolve_run_config(run.manifest_path, layered={})

        assert replayed == original

    @pytest.mark.os_agnostic
    def test_flags_override_a_replayed_manifest(self, tmp_path: Path) -> None:
        run = RunDirectory(tmp_path / "run")
        run.record_command("generate", RunConfig(seed=11))

        assert resolve_run_config(run.manifest_path, seed=12, layered={}).seed == 12
