import json
import os

import pytest

from olpsim.cli import FigurePreset, figure_preset, main
from olpsim.inputs import InputKind


def run_cli(*args) -> int:
    return main(list(args))


class TestFigurePresets:
    def test_first_figure_is_single_policy_with_bound(self):
        preset = figure_preset(1)
        assert len(preset.plans) == 1
        plan = preset.plans[0]
        assert plan.input.kind is InputKind.QUANTITY_DEPENDENT
        assert [p.name for p in plan.policies] == ["alg2"]
        assert plan.bound_coefficient == 25.0
        assert max(plan.horizon_grid) == 10000
        assert len(plan.seeds) == 20

    @staticmethod
    def _essence(preset):
        return [(p.input, tuple(q.name for q in p.policies), p.horizon_grid,
                 p.seeds, p.bound_coefficient, p.emit_consumption)
                for p in preset.plans]

    def test_consumption_sibling_shares_preset(self):
        assert self._essence(figure_preset(2)) == self._essence(figure_preset(1))
        assert self._essence(figure_preset(6)) == self._essence(figure_preset(5))
        assert all(p.emit_consumption for p in figure_preset(1).plans)

    def test_iid_regret_figure(self):
        plan = figure_preset(5).plans[0]
        assert plan.input.kind is InputKind.IID_PRICE
        assert plan.bound_coefficient == 4.0

    def test_paired_comparison_figure(self):
        plan = figure_preset(13).plans[0]
        assert plan.input.kind is InputKind.QUANTITY_DEPENDENT
        assert sorted(p.name for p in plan.policies) == ["alg2", "alg4"]

    def test_trend_figures_span_both_inputs(self):
        preset = figure_preset(20)
        kinds = [p.input.kind for p in preset.plans]
        assert kinds == [InputKind.DRIFT_WALK, InputKind.LINEAR_TREND]
        assert all([q.name for q in p.policies] == ["alg4"]
                   for p in preset.plans)

    def test_adaptive_comparison_figure(self):
        preset = figure_preset(21)
        assert all(sorted(q.name for q in p.policies) == ["alg4", "alg5"]
                   for p in preset.plans)

    def test_walk_demo_figure(self):
        preset = figure_preset(19)
        assert isinstance(preset, FigurePreset)
        assert preset.walk_demo and preset.plans == ()

    def test_unknown_figure(self):
        with pytest.raises(ValueError):
            figure_preset(24)
        with pytest.raises(ValueError):
            figure_preset(0)


class TestRunCommand:
    def test_basic_run_writes_outputs(self, tmp_path):
        out = str(tmp_path / "o")
        assert run_cli("run", "--input", "3", "--policy", "alg2",
                       "--n", "200", "--seeds", "2", "--out", out) == 0
        names = sorted(os.listdir(out))
        assert names == ["manifest.json", "runs.csv", "summary.csv"]
        lines = open(os.path.join(out, "runs.csv")).read().splitlines()
        assert len(lines) == 1 + 2  # header + grid x seeds

    def test_json_format(self, tmp_path):
        out = str(tmp_path / "j")
        assert run_cli("run", "--input", "3", "--policy", "alg2", "--n", "200",
                       "--seeds", "2", "--out", out, "--format", "json") == 0
        payload = json.load(open(os.path.join(out, "results.json")))
        assert len(payload["records"]) == 2
        assert "alg2" in payload["summary"]

    def test_repeatable_policy_flag(self, tmp_path):
        out = str(tmp_path / "p")
        assert run_cli("run", "--input", "3", "--policy", "alg2", "--policy",
                       "alg4", "--n", "150", "--seeds", "1", "--out", out) == 0
        rows = open(os.path.join(out, "runs.csv")).read()
        assert "alg2," in rows and "alg4," in rows

    def test_unknown_input_exits_2(self, tmp_path):
        assert run_cli("run", "--input", "9", "--out", str(tmp_path)) == 2

    def test_unknown_policy_exits_2(self, tmp_path):
        assert run_cli("run", "--input", "3", "--policy", "alg7",
                       "--out", str(tmp_path)) == 2

    def test_figure_conflicts_with_input(self, tmp_path):
        assert run_cli("run", "--figure", "5", "--input", "1",
                       "--out", str(tmp_path)) == 2

    def test_grid_flags_are_exclusive(self, tmp_path):
        assert run_cli("run", "--input", "3", "--n", "100",
                       "--n-grid", "100,200", "--out", str(tmp_path)) == 2

    def test_unknown_figure_exits_2(self, tmp_path):
        assert run_cli("run", "--figure", "99", "--out", str(tmp_path)) == 2

    def test_walk_demo(self, tmp_path):
        out = str(tmp_path / "w")
        assert run_cli("run", "--figure", "19", "--n", "60", "--out", out) == 0
        lines = open(os.path.join(out, "walks.csv")).read().splitlines()
        assert lines[0] == "t,fair,weighted_down"
        assert len(lines) == 61


class TestConfigFile:
    def test_file_supplies_flags(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("input=3\npolicy=alg2\nn=150\nseeds=1\n")
        out = str(tmp_path / "o")
        assert run_cli("run", "--config", str(cfg), "--out", out) == 0
        assert os.path.exists(os.path.join(out, "runs.csv"))

    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("input=3\npolicy=alg2\nn=150\nseeds=3\n")
        out = str(tmp_path / "o")
        assert run_cli("run", "--config", str(cfg), "--seeds", "1",
                       "--out", out) == 0
        lines = open(os.path.join(out, "runs.csv")).read().splitlines()
        assert len(lines) == 2  # one seed, not three

    def test_unknown_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("inputt=3\n")
        assert run_cli("run", "--config", str(cfg)) == 2
        err = capsys.readouterr().err
        assert "inputt" in err and len(err.strip().splitlines()) == 1

    def test_missing_file_exits_2(self, tmp_path):
        assert run_cli("run", "--config", str(tmp_path / "nope.cfg")) == 2


class TestReplay:
    def test_replay_fresh_run_succeeds(self, tmp_path):
        out = str(tmp_path / "o")
        run_cli("run", "--input", "3", "--policy", "alg2", "--n", "200",
                "--seeds", "2", "--out", out)
        assert run_cli("replay", os.path.join(out, "manifest.json")) == 0

    def test_replay_detects_seed_tampering(self, tmp_path):
        out = str(tmp_path / "o")
        run_cli("run", "--input", "3", "--policy", "alg2", "--n", "200",
                "--seeds", "2", "--out", out)
        path = os.path.join(out, "manifest.json")
        manifest = json.load(open(path))
        manifest["plan"]["seeds"] = [7, 8]
        json.dump(manifest, open(path, "w"))
        assert run_cli("replay", path) == 1

    def test_replay_missing_manifest_exits_2(self, tmp_path):
        assert run_cli("replay", str(tmp_path / "manifest.json")) == 2

    def test_replay_corrupt_manifest_exits_2(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        assert run_cli("replay", str(path)) == 2

    def test_replay_unknown_policy_in_manifest_exits_2(self, tmp_path):
        out = str(tmp_path / "o")
        run_cli("run", "--input", "3", "--policy", "alg2", "--n", "150",
                "--seeds", "1", "--out", out)
        path = os.path.join(out, "manifest.json")
        manifest = json.load(open(path))
        manifest["plan"]["policies"] = [{"name": "alg9"}]
        json.dump(manifest, open(path, "w"))
        assert run_cli("replay", path) == 2

    def test_replay_json_run(self, tmp_path):
        out = str(tmp_path / "j")
        run_cli("run", "--input", "3", "--policy", "alg2", "--n", "150",
                "--seeds", "1", "--out", out, "--format", "json")
        assert run_cli("replay", os.path.join(out, "manifest.json")) == 0

    def test_replay_walk_demo(self, tmp_path):
        out = str(tmp_path / "w")
        run_cli("run", "--figure", "19", "--n", "50", "--out", out)
        assert run_cli("replay", os.path.join(out, "manifest.json")) == 0


class TestValidateCommand:
    def test_default_inputs_are_clean(self, tmp_path):
        for kind in ("1", "4"):
            assert run_cli("validate", "--input", kind, "--n", "200",
                           "--seeds", "2") == 0

    def test_unknown_input(self):
        assert run_cli("validate", "--input", "6") == 2


class TestLabCommand:
    def test_lln_lab_round_trip(self, tmp_path):
        out = str(tmp_path / "lab")
        assert run_cli("lab", "--lab", "lln", "--n-grid", "50,100",
                       "--seeds", "100", "--out", out) == 0
        lines = open(os.path.join(out, "lln.csv")).read().splitlines()
        assert lines[0] == "t,median_abs_dev" and len(lines) == 3
        assert run_cli("replay", os.path.join(out, "manifest.json")) == 0

    def test_concentration_lab_emits_all_configs(self, tmp_path):
        out = str(tmp_path / "lab")
        assert run_cli("lab", "--lab", "concentration", "--seeds", "150",
                       "--out", out) == 0
        lines = open(os.path.join(out, "concentration.csv")).read().splitlines()
        assert len(lines) == 11
        assert all(line.endswith(",true") for line in lines[1:])

    def test_concentration_lab_minimum_trials(self, tmp_path):
        assert run_cli("lab", "--lab", "concentration", "--seeds", "50",
                       "--out", str(tmp_path / "x")) == 2

    def test_convergence_lab_rejects_trending_input(self, tmp_path):
        assert run_cli("lab", "--lab", "convergence", "--input", "4",
                       "--out", str(tmp_path / "x")) == 2
