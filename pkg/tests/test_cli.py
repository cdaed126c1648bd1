import csv
import json
import math

import pytest

from rmflab.analysis import LambdaParams, lambda_asymptotic, lambda_exact
from rmflab.cli import CSV_HEADER, run


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_unknown_flag_exits_2_without_output(self, tmp_path, capsys):
        out = tmp_path / "x.csv"
        with pytest.raises(SystemExit) as exc:
            run(["lambda", "--N", "5", "--x", "100", "--bogus-flag", "--out", str(out)])
        assert exc.value.code == 2
        assert not out.exists()

    def test_parameter_error_exit_2(self, capsys):
        assert run(["lambda", "--N", "0", "--x", "100"]) == 2
        assert "rmflab: error: parameter:" in capsys.readouterr().err

    def test_resource_error_exit_3(self, capsys):
        code = run(
            ["avg-v", "--x", "1e6", "--samples", "50", "--seed", "1", "--budget", "1000"]
        )
        assert code == 3
        assert "rmflab: error: resource:" in capsys.readouterr().err

    def test_selftest_requires_seed(self, capsys):
        assert run(["selftest"]) == 2


class TestLambdaCommand:
    def test_prints_exact_asymptotic_ratio(self, capsys):
        assert run(["lambda", "--N", "100", "--x", "1e50", "--q", "1"]) == 0
        out = capsys.readouterr().out
        params = LambdaParams(N=100, q=1.0, x=1e50)
        assert f"{lambda_exact(params):.6g}" in out
        assert f"{lambda_asymptotic(params):.6g}" in out
        assert "ratio=" in out

    def test_loglog_parametrization(self, capsys):
        assert run(["lambda", "--N", "10", "--loglog-x", "100", "--q", "1,1.5"]) == 0


class TestMertensCommand:
    def test_census_row(self, tmp_path):
        out = tmp_path / "m.csv"
        assert run(["mertens", "--x", "10000", "--out", str(out)]) == 0
        rows = read_csv(out)
        by_exp = {r["experiment"]: r for r in rows}
        assert float(by_exp["mertens-final"]["point"]) == -23.0


class TestExport:
    def test_csv_round_trip(self, tmp_path):
        out = tmp_path / "r.csv"
        assert run(
            ["moments", "--x", "100,1000", "--q", "1,2", "--samples", "50",
             "--seed", "7", "--out", str(out)]
        ) == 0
        with open(out) as fh:
            assert fh.readline().strip() == CSV_HEADER
        rows = read_csv(out)
        assert len(rows) == 4
        # 17-significant-digit serialization round-trips the doubles
        from rmflab.models import ModelSpec
        from rmflab.montecarlo import ExperimentPlan, moment_table

        plan = ExperimentPlan(master_seed=7, samples=50, model=ModelSpec("rmf"))
        table = moment_table(plan, [100.0, 1000.0], [1.0, 2.0])
        for r in rows:
            est = table[(float(r["x"]), float(r["q"]))]
            assert float(r["point"]) == est.point
            assert float(r["ci_lo"]) == est.ci_lo

    def test_jsonl_includes_manifest_reference(self, tmp_path):
        out = tmp_path / "r.jsonl"
        assert run(
            ["moments", "--x", "100", "--q", "2", "--samples", "20", "--seed", "3",
             "--out", str(out), "--format", "jsonl"]
        ) == 0
        rows = [json.loads(line) for line in open(out)]
        assert rows[0]["manifest"] == "r.jsonl.manifest.json"
        manifest = json.load(open(str(out) + ".manifest.json"))
        assert manifest["plan"]["master_seed"] == 3
        assert manifest["zero_policy"] == "zero-skip"

    def test_byte_identical_reruns(self, tmp_path):
        args = ["signprob", "--x", "100,200", "--N", "2", "--samples", "40", "--seed", "11"]
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("samples = 30\nseed = 9\n# comment\n")
        out1 = tmp_path / "o1.csv"
        assert run(["moments", "--x", "100", "--q", "2", "--config", str(cfg),
                    "--out", str(out1)]) == 0
        rows = read_csv(out1)
        assert rows[0]["n_samples"] == "30"
        assert rows[0]["seed"] == "9"
        out2 = tmp_path / "o2.csv"
        assert run(["moments", "--x", "100", "--q", "2", "--config", str(cfg),
                    "--samples", "25", "--out", str(out2)]) == 0
        assert read_csv(out2)[0]["n_samples"] == "25"

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no_such_key = 5\n")
        assert run(["moments", "--x", "100", "--q", "2", "--seed", "1",
                    "--config", str(cfg)]) == 2


class TestExportErrors:
    def test_empty_records_rejected(self, tmp_path):
        from rmflab.cli import export
        from rmflab.errors import ParameterError, ResourceError

        with pytest.raises(ParameterError):
            export([], "csv", str(tmp_path / "x.csv"))
        with pytest.raises(ResourceError):
            export([{"experiment": "e"}], "csv", str(tmp_path / "nodir" / "x.csv"))


class TestModelsCommand:
    def test_lists_all_kinds(self, capsys):
        assert run(["models"]) == 0
        out = capsys.readouterr().out
        for kind in ("rmf", "iid_rademacher", "sidon_cosine", "bounded_martingale"):
            assert kind in out


class TestSimulateCommand:
    def test_trace_with_checkpoints(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert run(["simulate", "--model", "rmf", "--x", "1000",
                    "--checkpoints", "10,100", "--seed", "5", "--out", str(out)]) == 0
        rows = read_csv(out)
        kinds = {r["experiment"] for r in rows}
        assert {"simulate-final", "simulate-changes", "simulate-checkpoint"} <= kinds
