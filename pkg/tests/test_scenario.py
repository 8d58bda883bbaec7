import json
import subprocess
import sys

import numpy as np
import pytest

from econsim.cli import main as cli_main
from econsim.scenario import (
    SCHEMA_VERSION,
    ScenarioError,
    emit_trajectory,
    list_presets,
    load_preset,
    parse_scenario,
    parse_trajectory_csv,
    run_episode,
    run_sweep,
)


class TestParsing:
    def test_bundled_presets_shape(self):
        aging = load_preset("aging-pension")
        assert aging.economy.governments == ("pension",)
        assert aging.economy.individual == "olg"
        assert aging.economy.firms == "perfect"
        assert aging.economy.bank == "non_profit"
        tax = load_preset("optimal-tax")
        assert tax.economy.governments == ("fiscal",)
        assert tax.economy.individual == "ramsey"
        assert set(list_presets()) >= {
            "aging-pension", "optimal-tax", "fiscal-monetary", "three-government"}

    def test_unknown_key_reports_path(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("economy:\n  population:\n    sizee: 10\n")
        with pytest.raises(ScenarioError, match="economy.population.sizee"):
            parse_scenario(path)

    def test_unknown_policy_kind(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(
            "economy: {individual: ramsey}\npolicies:\n  households: {kind: psychic}\n")
        with pytest.raises(ScenarioError, match="households"):
            parse_scenario(path)

    def test_policy_for_inactive_role_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(
            "economy: {individual: ramsey}\npolicies:\n  pension: {kind: constant}\n")
        with pytest.raises(ScenarioError, match="pension"):
            parse_scenario(path)

    def test_missing_bank_warns_and_defaults(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(
            "economy:\n  individual: olg\n  governments: [pension]\n")
        spec = parse_scenario(path)
        assert spec.economy.bank == "non_profit"
        assert any("non_profit" in w for w in spec.warnings)

    def test_role_grammar_violation_surfaces(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(
            "economy:\n  individual: ramsey\n  governments: [pension]\n  bank: non_profit\n")
        with pytest.raises(ScenarioError, match="pension requires OLG"):
            parse_scenario(path)

    def test_default_bindings_resolved(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(
            "economy:\n  individual: olg\n  governments: [pension]\n  bank: non_profit\n")
        spec = parse_scenario(path)
        assert spec.bindings["households"].kind == "heuristic"
        assert spec.bindings["pension"].kind == "constant"


class TestTrajectoryIO:
    def rows(self, n=5):
        spec = load_preset("aging-pension")
        _, rows = run_episode(spec, 0, max_steps=n)
        return rows

    def test_csv_round_trip_is_byte_identical(self, tmp_path):
        rows = self.rows()
        p1 = emit_trajectory(rows, tmp_path / "a.csv", "csv")
        parsed = parse_trajectory_csv(p1)
        p2 = emit_trajectory(parsed, tmp_path / "b.csv", "csv")
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_run_header_only(self, tmp_path):
        path = emit_trajectory([], tmp_path / "empty.csv", "csv")
        lines = path.read_text().splitlines()
        assert lines[0] == f"# trajectory-schema: {SCHEMA_VERSION}"
        assert len(lines) == 2

    def test_jsonl_row_count_and_header(self, tmp_path):
        rows = self.rows(7)
        path = emit_trajectory(rows, tmp_path / "t.jsonl", "jsonl")
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["trajectory_schema"] == SCHEMA_VERSION
        assert len(lines) == 1 + 7

    def test_jsonl_floats_round_trip_exactly(self, tmp_path):
        rows = self.rows(4)
        path = emit_trajectory(rows, tmp_path / "t.jsonl", "jsonl")
        lines = path.read_text().splitlines()[1:]
        for raw, row in zip(lines, rows):
            parsed = json.loads(raw)
            assert parsed["gdp"] == row["gdp"]  # bit-exact through JSON
            assert parsed["gini_income"] == row["gini_income"]


class TestEpisodes:
    def test_same_seed_byte_identical_files(self, tmp_path):
        spec = load_preset("aging-pension")
        run_episode(spec, 4, out_dir=tmp_path / "a", max_steps=25)
        run_episode(spec, 4, out_dir=tmp_path / "b", max_steps=25)
        a = (tmp_path / "a" / "trajectory-seed4.csv").read_bytes()
        b = (tmp_path / "b" / "trajectory-seed4.csv").read_bytes()
        assert a == b

    def test_summary_year_is_termination_step(self):
        spec = load_preset("aging-pension")
        summary, rows = run_episode(spec, 0, max_steps=12)
        assert summary.year == len(rows) == 12

    def test_panel_emission(self, tmp_path):
        spec = load_preset("aging-pension")
        import dataclasses
        from econsim.core import config_replace
        spec = dataclasses.replace(
            spec, economy=config_replace(spec.economy, "population.size", 50))
        run_episode(spec, 0, out_dir=tmp_path, panel=True, max_steps=3)
        panel = (tmp_path / "panel-seed0.csv").read_text().splitlines()
        assert panel[0].startswith("t,id,age,savings")
        assert len(panel) > 3 * 50  # one row per agent-step


class TestSweep:
    def small_spec(self):
        import dataclasses
        from econsim.core import config_replace
        spec = load_preset("aging-pension")
        return dataclasses.replace(
            spec, economy=config_replace(spec.economy, "population.size", 120))

    def test_single_cell_matches_run_episode(self):
        spec = self.small_spec()
        rows = run_sweep(spec, {"pension.tau_p": [0.08]}, seeds=[0], max_steps=10)
        direct, _ = run_episode(spec, 0, max_steps=10)
        cell = rows[0]
        assert cell["gdp"] == direct.gdp
        assert cell["welfare"] == direct.welfare
        assert rows[1]["seed"] == "mean"

    def test_grid_counting(self):
        spec = self.small_spec()
        grid = {"demographics.retirement_age": [60, 65],
                "pension.tau_p": [0.06, 0.10]}
        rows = run_sweep(spec, grid, seeds=[0, 1, 2], max_steps=5)
        # 4 cells x 3 seeds + 4 mean rows.
        assert len(rows) == 16
        assert sum(r["seed"] == "mean" for r in rows) == 4

    def test_cell_failure_recorded_and_continues(self):
        spec = self.small_spec()
        rows = run_sweep(spec, {"pension.tau_p": [0.08, 2.0]}, seeds=[0], max_steps=5)
        errors = [r for r in rows if "error" in r]
        ok = [r for r in rows if "error" not in r and r["seed"] != "mean"]
        assert len(errors) == 1 and "tau_p" in errors[0]["error"]
        assert len(ok) == 1

    def test_retirement_grid_orderings_via_sweep(self):
        spec = self.small_spec()
        rows = run_sweep(spec, {"demographics.retirement_age": [60, 65, 70]},
                         seeds=[0, 1], max_steps=80)
        means = {r["demographics.retirement_age"]: r for r in rows
                 if r["seed"] == "mean"}
        deps = [means[a]["mean_dependency"] for a in (60, 65, 70)]
        assert deps[0] > deps[1] > deps[2]


def test_fiscal_brackets_binding_end_to_end(tmp_path):
    from econsim.scenario import preset_dir
    (tmp_path / "brackets.csv").write_text(
        (preset_dir() / "us2022_brackets.csv").read_text())
    scenario = tmp_path / "s.yaml"
    scenario.write_text(
        "economy:\n"
        "  individual: ramsey\n"
        "  governments: [fiscal]\n"
        "  bank: non_profit\n"
        "  population: {size: 60}\n"
        "policies:\n"
        "  fiscal: {kind: brackets, params: {file: brackets.csv}}\n")
    spec = parse_scenario(scenario)
    from econsim.scenario import EpisodeRunner
    runner = EpisodeRunner(spec, 0)
    result = None
    for _ in range(4):
        result = runner.step()
    assert runner.env.fiscal.brackets is not None
    assert runner.env.fiscal.brackets[0] == (0.0, 0.10)
    assert runner.env.fiscal.revenue > 0.0
    assert result.row["government_debt"] is not None


def test_government_observation_shared_identically():
    spec = load_preset("three-government")
    import dataclasses
    from econsim.core import config_replace
    spec = dataclasses.replace(
        spec, economy=config_replace(spec.economy, "population.size", 80))
    from econsim.scenario import EpisodeRunner
    runner = EpisodeRunner(spec, 0)
    obs = runner.env.build_observations()
    # One shared macro vector serves every active authority.
    assert obs.government is not None
    v1 = obs.government.vector()
    v2 = runner.env.build_observations().government.vector()
    assert np.array_equal(v1, v2)
    assert v1.shape == (15,)


class TestCli:
    def test_validate_ok(self, capsys):
        assert cli_main(["validate", "aging-pension"]) == 0
        assert "ok" in capsys.readouterr().out

    def test_presets_list(self, capsys):
        assert cli_main(["presets", "list"]) == 0
        assert "aging-pension" in capsys.readouterr().out

    def test_unknown_scenario_errors(self, capsys):
        assert cli_main(["validate", "no-such-scenario"]) == 1
        assert "error" in capsys.readouterr().err

    def test_run_writes_artifacts(self, tmp_path, capsys):
        code = cli_main([
            "run", "aging-pension", "--seed", "1", "--out", str(tmp_path),
            "--set", "population.size=80", "--max-steps", "6",
        ])
        assert code == 0
        assert (tmp_path / "trajectory-seed1.csv").exists()
        assert (tmp_path / "summary-seed1.json").exists()
        summary = json.loads((tmp_path / "summary-seed1.json").read_text())
        assert summary["year"] == 6

    def test_run_module_entrypoint(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "econsim", "run", "aging-pension",
             "--seed", "0", "--out", str(tmp_path),
             "--set", "population.size=60", "--max-steps", "4", "--quiet"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "trajectory-seed0.csv").exists()

    def test_sweep_cli(self, tmp_path):
        grid = tmp_path / "grid.yaml"
        grid.write_text("demographics.retirement_age: [60, 70]\n")
        code = cli_main([
            "sweep", "aging-pension", "--grid", str(grid), "--seeds", "2",
            "--out", str(tmp_path), "--set", "population.size=60",
            "--max-steps", "4",
        ])
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2 + 2  # header + cells x seeds + means

    def test_out_dir_env_override(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ECONSIM_OUT", str(tmp_path))
        code = cli_main(["run", "aging-pension", "--seed", "0",
                         "--set", "population.size=50", "--max-steps", "3"])
        assert code == 0
        assert (tmp_path / "out-aging-pension" / "trajectory-seed0.csv").exists()
