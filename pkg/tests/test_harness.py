"""Experiment configs, scenario runs, emitted artifacts, and the CLI."""

import json
import math
import os
from pathlib import Path

import pytest

from triplab.errors import ConfigError
from triplab.harness.cli import main
from triplab.harness.config import (
    SCENARIOS,
    BudgetSpec,
    DataSpec,
    ExperimentSpec,
    budget,
    embed_config_from_dict,
    load_spec,
)
from triplab.harness.figures import render_figures
from triplab.harness.plotdata import panel_table, write_tables
from triplab.harness.runner import run_experiment
from triplab.harness.stimuli import (
    parameter_grid,
    read_parameter_table,
    stimulus_items,
    write_parameter_table,
)


def _tiny_spec(**overrides):
    obj = {
        "scenario": "methods_vs_n",
        "seed": 77,
        "data": {"kind": "unit_cube", "n": [8], "d": 2},
        "budget": {"rule": "fixed", "m": 80},
        "methods": ["SOE", "counting"],
        "embed": {"d": 2, "max_iters": 60, "restarts": 1},
        "runs": 2,
    }
    obj.update(overrides)
    return ExperimentSpec.from_dict(obj)


class TestBudget:
    def test_loglinear_values(self):
        assert budget("3nlog2n", 100) == 1994
        assert budget("3nlog2n", 20) == math.ceil(60 * math.log2(20))

    def test_quadratic_values(self):
        assert budget("3n2log2n", 60) == 63795

    def test_fixed_passthrough(self):
        assert budget("fixed", 4, m=10) == 10
        with pytest.raises(ValueError, match="needs m"):
            budget("fixed", 4)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            budget("3nlog2n", 2)

    def test_unknown_rule(self):
        with pytest.raises(ValueError, match="unknown budget rule"):
            budget("quadratic", 10)


class TestConfigValidation:
    def test_scenarios_are_closed_set(self):
        assert len(SCENARIOS) == 7
        with pytest.raises(ConfigError, match="scenario"):
            ExperimentSpec.from_dict({"scenario": "anova"})

    def test_missing_scenario(self):
        with pytest.raises(ConfigError, match="needs a scenario"):
            ExperimentSpec.from_dict({})

    @pytest.mark.parametrize(
        "patch",
        [
            {"bogus": 1},
            {"data": {"kind": "parquet"}},
            {"data": {"kind": "unit_cube", "n": [2]}},
            {"data": {"kind": "vectors"}},
            {"data": {"kind": "answers"}},
            {"budget": {"rule": "fixed"}},
            {"budget": {"rule": "fixed", "m": 10, "x": 1}},
            {"noise_p": [0.5]},
            {"noise_p": [-0.1]},
            {"methods": ["kmeans"]},
            {"embed": {"d": 0}},
            {"embed": {"hidden_layers": 2}},
            {"runs": 0},
            {"params": {"not_a_knob": 1}},
        ],
    )
    def test_bad_configs_rejected(self, patch):
        obj = {"scenario": "methods_vs_n"}
        obj.update(patch)
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict(obj)

    def test_params_merge_with_scenario_defaults(self):
        spec = ExperimentSpec.from_dict(
            {"scenario": "repeated_vs_random", "params": {"l_values": [3]}}
        )
        assert spec.params["l_values"] == [3]
        assert spec.params["base_m"] == 2000  # default survives

    def test_method_split(self):
        spec = _tiny_spec(methods=["soe", "t-ste", "counting", "serial_rank"])
        assert spec.embedding_methods == ("SOE", "tSTE")
        assert spec.ranking_methods == ("counting", "serial_rank")

    def test_round_trip(self):
        spec = _tiny_spec()
        again = ExperimentSpec.from_dict(spec.to_dict())
        assert again == spec

    def test_scalar_n_and_noise_promoted(self):
        spec = ExperimentSpec.from_dict(
            {"scenario": "single_fit", "data": {"kind": "unit_cube", "n": 9, "d": 2},
             "noise_p": 0.1}
        )
        assert spec.data.n == (9,)
        assert spec.noise_p == (0.1,)

    def test_load_spec_rejects_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_spec(path)

    def test_embed_config_errors_become_config_errors(self):
        with pytest.raises(ConfigError):
            embed_config_from_dict({"margin": -1.0})


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    document = run_experiment(_tiny_spec(), out, workers=0)
    return out, document


class TestRunArtifacts:
    def test_expected_files(self, run_dir):
        out, _ = run_dir
        assert (out / "manifest.json").is_file()
        assert (out / "raw.csv").is_file()
        assert (out / "results.json").is_file()
        assert (out / "tables").is_dir()
        assert list((out / "tables").glob("*.csv"))

    def test_manifest_lists_run_seeds_without_wall_clock(self, run_dir):
        out, _ = run_dir
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["run_seeds"]) == 2
        assert "versions" in manifest
        assert not any("time" in k or "date" in k for k in manifest)

    def test_raw_rows_cover_methods_and_runs(self, run_dir):
        _, document = run_dir
        rows = document["raw"]
        assert {r["method"] for r in rows} == {"SOE", "counting"}
        assert {r["run"] for r in rows} == {0, 1}
        assert document["errors"] == []

    def test_rerun_is_byte_identical(self, run_dir, tmp_path):
        out, _ = run_dir
        manifest = json.loads((out / "manifest.json").read_text())
        spec = ExperimentSpec.from_dict(manifest["spec"])
        again = tmp_path / "again"
        run_experiment(spec, again, workers=0)
        for name in ("manifest.json", "raw.csv", "results.json"):
            assert (again / name).read_bytes() == (out / name).read_bytes()
        for table in sorted((out / "tables").glob("*.csv")):
            assert (again / "tables" / table.name).read_bytes() == table.read_bytes()

    def test_parallel_workers_match_serial(self, run_dir, tmp_path):
        out, _ = run_dir
        par = tmp_path / "par"
        run_experiment(_tiny_spec(), par, workers=2)
        assert (par / "raw.csv").read_bytes() == (out / "raw.csv").read_bytes()

    def test_different_seed_changes_rows(self, tmp_path):
        a = run_experiment(_tiny_spec(seed=1), None, workers=0)
        b = run_experiment(_tiny_spec(seed=2), None, workers=0)
        assert a["raw"] != b["raw"]


def test_failed_run_is_isolated(tmp_path, monkeypatch):
    import triplab.harness.runner as runner_mod

    real = runner_mod._SCENARIO_RUNNERS["methods_vs_n"]

    def flaky(spec, run):
        if run == 1:
            raise RuntimeError("injected failure")
        return real(spec, run)

    monkeypatch.setitem(runner_mod._SCENARIO_RUNNERS, "methods_vs_n", flaky)
    document = run_experiment(_tiny_spec(), None, workers=0)
    assert len(document["errors"]) == 1
    assert "injected failure" in document["errors"][0]["error"]
    assert {r["run"] for r in document["raw"]} == {0}


class TestPanelTables:
    def test_table_layout(self):
        panel = {
            "x_label": "n",
            "x": [10, 20],
            "series": {
                "SOE": {"mean": [0.9, 0.95], "sd": [0.01, 0.0]},
                "counting": {"mean": [0.8, 0.85], "sd": [0.02, 0.01]},
            },
        }
        text = panel_table(panel)
        lines = text.splitlines()
        assert lines[0] == "n,SOE_mean,SOE_sd,counting_mean,counting_sd"
        assert lines[1] == "10,0.9,0.01,0.8,0.02"

    def test_missing_series_named_in_error(self):
        panel = {"x_label": "n", "x": [], "series": {"SOE": {"mean": [], "sd": []}}}
        with pytest.raises(ValueError, match="tSTE"):
            panel_table(panel, require=("SOE", "tSTE"))

    def test_missing_panel_named_in_error(self):
        with pytest.raises(ValueError, match="accuracy_vs_n"):
            write_tables({"panels": {}}, "/tmp/nowhere", require={"accuracy_vs_n": ()})

    def test_reemission_is_byte_identical(self, tmp_path):
        document = run_experiment(_tiny_spec(runs=1), tmp_path / "first", workers=0)
        loaded = json.loads((tmp_path / "first" / "results.json").read_text())
        write_tables(loaded, tmp_path / "second")
        for table in sorted((tmp_path / "first" / "tables").glob("*.csv")):
            assert (tmp_path / "second" / table.name).read_bytes() == table.read_bytes()


class TestStimuli:
    def test_grid_is_full_factorial(self):
        grid = parameter_grid()
        assert len(grid) == 100
        assert len(set(grid)) == 100
        reaches, grains, coherences = zip(*grid)
        assert set(reaches) == {5, 12, 26, 61, 128}
        assert set(grains) == {5, 12, 26, 61, 128}
        assert set(coherences) == {0.0, 0.33, 0.67, 1.0}

    def test_items_carry_parameter_labels(self):
        items = stimulus_items()
        assert items.n == 100
        assert len(items.labels) == 100
        assert len(set(items.labels)) == 100

    def test_table_round_trip(self, tmp_path):
        path = tmp_path / "stimuli.csv"
        write_parameter_table(path)
        assert read_parameter_table(path) == parameter_grid()


def test_figures_render_png_per_panel(tmp_path):
    document = run_experiment(_tiny_spec(runs=1), None, workers=0)
    written = render_figures(document, tmp_path / "figs")
    assert written
    for path in written:
        assert path.suffix == ".png"
        assert path.stat().st_size > 0
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestCli:
    def _write_config(self, tmp_path, obj):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(obj))
        return str(path)

    def test_simulate_writes_timestamped_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("TRIPLAB_OUT_ROOT", str(tmp_path / "root"))
        cfg = self._write_config(
            tmp_path,
            {"scenario": "methods_vs_n", "seed": 3,
             "data": {"kind": "unit_cube", "n": [8], "d": 2},
             "budget": {"rule": "fixed", "m": 60},
             "methods": ["counting"], "runs": 1},
        )
        assert main(["simulate", "--config", cfg, "--workers", "0"]) == 0
        dirs = list((tmp_path / "root").glob("methods_vs_n-*"))
        assert len(dirs) == 1
        assert (dirs[0] / "results.json").is_file()
        assert "results:" in capsys.readouterr().out

    def test_explicit_out_and_figures(self, tmp_path):
        cfg = self._write_config(
            tmp_path,
            {"scenario": "single_fit", "seed": 3,
             "data": {"kind": "unit_cube", "n": [8], "d": 2},
             "budget": {"rule": "fixed", "m": 60},
             "methods": ["SOE"], "embed": {"d": 2, "max_iters": 40, "restarts": 1},
             "runs": 1},
        )
        out = tmp_path / "out"
        assert main(["fit", "--config", cfg, "--out", str(out),
                     "--workers", "0", "--figures"]) == 0
        assert (out / "figures").is_dir()
        assert list((out / "figures").glob("*.png"))

    def test_scenario_pinning_conflict(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path, {"scenario": "pooling"})
        assert main(["fit", "--config", cfg]) == 2
        assert "single_fit" in capsys.readouterr().err

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path, {"scenario": "methods_vs_n", "runs": 0})
        assert main(["simulate", "--config", cfg]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = self._write_config(
            tmp_path,
            {"scenario": "methods_vs_n",
             "data": {"kind": "unit_cube", "n": [8], "d": 2},
             "budget": {"rule": "fixed", "m": 60},
             "methods": ["counting"], "runs": 1, "seed": 1},
        )
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(a), "--workers", "0"]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b), "--workers", "0",
                     "--seed", "2"]) == 0
        assert (a / "raw.csv").read_bytes() != (b / "raw.csv").read_bytes()

    def test_evaluate_reports_stored_embedding(self, tmp_path, capsys):
        from triplab.embedding import EmbedConfig, embed, export_embedding
        from triplab.core import write_answer_set
        from triplab.oracle import NoisyOracle, sample_unit_cube
        from triplab.sampling import sample_random

        ds = sample_unit_cube(10, 2, 1)
        ans = NoisyOracle(ds, 0.0, 2).answer_set(sample_random(ds.items, 200, 3))
        e = embed(ans, "SOE", EmbedConfig(d=2, max_iters=80, restarts=1), 4)
        emb_path = tmp_path / "emb.csv"
        ans_path = tmp_path / "answers.csv"
        export_embedding(emb_path, e)
        write_answer_set(ans_path, ans)
        out = tmp_path / "report.csv"
        rc = main(["evaluate", "--answers", str(ans_path),
                   "--embedding", str(emb_path), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert "embedding:SOE" in lines[1]

    def test_emit_plots_from_run_dir(self, tmp_path):
        out = tmp_path / "run"
        run_experiment(_tiny_spec(runs=1), out, workers=0)
        dest = tmp_path / "plots"
        assert main(["emit-plots", "--config", str(out), "--out", str(dest)]) == 0
        assert list(dest.glob("tables/*.csv"))
        assert list(dest.glob("figures/*.png"))
