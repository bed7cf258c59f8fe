import csv
import json

import pytest

from railtrace.cli import main
from railtrace.scenario import decode_scenario


class TestGen:
    def test_writes_scenario(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert main(["gen", "--seed", "7", "--obstacles", "20", "--ctrl-points", "16", "--out", str(out)]) == 0
        s = decode_scenario(out.read_bytes())
        assert len(s.obstacles) == 20

    def test_reproducible_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["gen", "--seed", "3", "--out", str(a)])
        main(["gen", "--seed", "3", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestUsageErrors:
    def test_unknown_flag_exit_1(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["gen", "--florp", "1"])
        assert e.value.code == 1

    def test_unknown_subcommand_exit_1(self):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 1

    def test_runtime_error_exit_2(self, tmp_path, capsys):
        # missing scenario file surfaces as a runtime failure
        assert main(["simulate", "--scenario", str(tmp_path / "nope.json")]) == 2


class TestSimulate:
    def test_json_and_csv(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        main(["gen", "--seed", "2", "--obstacles", "5", "--ctrl-points", "6", "--out", str(scenario)])
        out, table = tmp_path / "sim.json", tmp_path / "table.csv"
        code = main(["simulate", "--scenario", str(scenario), "--out", str(out), "--csv", str(table)])
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["total_time"] > 0
        assert len(obj["steps"]) == 100
        with open(table) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 100
        assert set(rows[0].keys()) == {"step", "time", "acceleration", "air_resistance", "cost", "curvature", "velocity"}

    def test_fixture_check_passes_on_shipped_fixture(self, capsys):
        import importlib.resources

        ref = importlib.resources.files("railtrace").joinpath("data", "reference_steps_v1.csv")
        code = main(["simulate", "--fixture-check", str(ref)])
        assert code == 0
        assert "25/25 rows pass" in capsys.readouterr().out


class TestOptimize:
    def test_run_directory(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "optimize", "--seed", "7", "--optimizer", "adam", "--steps", "6",
            "--lr", "5e-3", "--schedule", "cosine", "--obstacles", "6",
            "--ctrl-points", "6", "--out", str(out),
        ])
        assert code == 0
        for name in ("scenario.json", "config.json", "theta_history.jsonl", "signals.jsonl", "trace.jsonl", "meta.json"):
            assert (out / name).exists(), name

    def test_seeded_reproducibility(self, tmp_path):
        args = ["optimize", "--seed", "4", "--steps", "5", "--obstacles", "4", "--ctrl-points", "5"]
        main(args + ["--out", str(tmp_path / "r1")])
        main(args + ["--out", str(tmp_path / "r2")])
        for name in ("scenario.json", "config.json", "theta_history.jsonl", "signals.jsonl", "trace.jsonl"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


class TestBatch:
    def test_sweep_csv(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main([
            "batch", "--seeds", "2", "--optimizers", "adam,sgd", "--objectives", "1,2",
            "--steps", "4", "--obstacles", "4", "--ctrl-points", "5", "--out", str(out),
        ])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8  # 2 seeds x 2 optimizers x 2 objectives
        assert {r["optimizer"] for r in rows} == {"adam", "sgd"}
        assert {"time_savings", "cost_savings"} <= set(rows[0].keys())


class TestBatchParallel:
    def test_jobs_flag_uses_processes(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "batch", "--seeds", "2", "--optimizers", "adam", "--objectives", "1",
            "--steps", "3", "--obstacles", "3", "--ctrl-points", "4",
            "--jobs", "2", "--out", str(out),
        ])
        assert code == 0
        with open(out) as fh:
            assert len(list(csv.DictReader(fh))) == 2


class TestDescribe:
    def test_without_lm_env_exit_2(self, tmp_path, monkeypatch, capsys):
        for var in ("LM_API_BASE", "LM_MODEL", "LM_API_KEY"):
            monkeypatch.delenv(var, raising=False)
        main(["optimize", "--seed", "1", "--steps", "3", "--obstacles", "3",
              "--ctrl-points", "4", "--out", str(tmp_path / "r")])
        assert main(["describe", "--run", str(tmp_path / "r")]) == 2
        assert "no LM endpoint configured" in capsys.readouterr().err


class TestEvalStubs:
    def test_eval_qa_echo(self, tmp_path, capsys):
        out = tmp_path / "qa"
        code = main([
            "eval-qa", "--instances", "1", "--obstacles", "6", "--ctrl-points", "6",
            "--steps", "4", "--stub", "echo", "--out", str(out),
        ])
        assert code == 0
        summary = json.loads((out / "qa_summary.json").read_text())
        assert summary["accuracy"] == 1.0
        assert (out / "qa_report.csv").exists()
        assert (out / "qa_accuracy.svg").exists()

    def test_eval_discrim_oracle(self, tmp_path, capsys):
        out = tmp_path / "discrim"
        code = main([
            "eval-discrim", "--instances", "1", "--obstacles", "4", "--ctrl-points", "6",
            "--steps", "4", "--sigmas", "0.06,0.1", "--stub", "oracle", "--out", str(out),
        ])
        assert code == 0
        summary = json.loads((out / "discrimination_summary.json").read_text())
        assert summary["accuracy"] == 1.0
        assert (out / "discrimination_success.svg").exists()
