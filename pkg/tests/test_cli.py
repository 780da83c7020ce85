import json

import numpy as np
import pytest

from eventproc.cli import run
from eventproc.events import load_dataset
from eventproc.models import load_model, save_model

from conftest import constant_sempp, random_dsmpp


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    save_model(random_dsmpp(np.random.default_rng(0), 2), path)
    return path


@pytest.fixture
def data_file(tmp_path, model_file):
    path = tmp_path / "s.jsonl"
    assert run(["sample", "--model", str(model_file), "--max-events", "12", "--n", "20", "--seed", "3",
                "--out", str(path)]) == 0
    return path


class TestParamCount:
    @pytest.mark.parametrize("argv, expected", [
        (["--kind", "nsmmpp", "--K", "3", "--D", "256"], 921091),
        (["--kind", "nsmmpp", "--K", "5000", "--D", "64"], 702856),
        (["--kind", "sempp", "--K", "5000"], 50005000),
        (["--kind", "dsmpp", "--K", "5000"], 50010000),
        (["--kind", "sempp", "--K", "3"], 21),
    ])
    def test_goldens(self, capsys, argv, expected):
        assert run(["paramcount", *argv]) == 0
        assert int(capsys.readouterr().out) == expected

    def test_missing_D(self, capsys):
        assert run(["paramcount", "--kind", "nsmmpp", "--K", "3"]) == 1
        assert "--D" in capsys.readouterr().err


class TestErrors:
    @pytest.mark.parametrize("argv", [["train"], ["sample", "--model", "m.json"], ["nope"],
                                      ["paramcount", "--kind", "sempp", "--K", "2", "--bogus", "1"]])
    def test_usage_errors_exit_one(self, capsys, argv):
        assert run(argv) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and err.count("\n") == 1

    def test_seed_required(self, model_file):
        assert run(["sample", "--model", str(model_file), "--T", "5", "--n", "2", "--out", "x"]) == 1

    def test_unreadable_file(self, tmp_path, capsys):
        assert run(["eval", "--model", str(tmp_path / "none.json"), "--data", "x", "--seed", "1"]) == 1

    def test_invalid_stream_file(self, tmp_path, model_file, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"T": 3.0, "K": 2, "events": [{"k": 1, "t": 2.0}, {"k": 1, "t": 1.0}]}\n')
        assert run(["eval", "--model", str(model_file), "--data", str(bad), "--seed", "1"]) == 1
        assert "non-increasing times at index 1" in capsys.readouterr().err

    def test_k_mismatch(self, tmp_path, data_file):
        other = tmp_path / "m3.json"
        save_model(constant_sempp([1.0, 1.0, 1.0]), other)
        assert run(["eval", "--model", str(other), "--data", str(data_file), "--seed", "1"]) == 1

    def test_numerical_failure_exits_two(self, tmp_path):
        dead = tmp_path / "dead.json"
        save_model(constant_sempp([1.0, 0.0]), dead)
        data = tmp_path / "d.jsonl"
        data.write_text('{"T": 2.0, "K": 2, "events": [{"k": 2, "t": 1.0}]}\n')
        assert run(["eval", "--model", str(dead), "--data", str(data), "--seed", "1"]) == 2


class TestWorkflow:
    def test_sample_writes_valid_lines_with_header(self, tmp_path, model_file):
        out = tmp_path / "s.jsonl"
        assert run(["sample", "--model", str(model_file), "--T", "10", "--n", "100", "--seed", "3",
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# ") and json.loads(lines[0][2:])["seed"] == 3
        assert len(lines) == 101 and len(load_dataset(out)) == 100

    def test_sample_is_idempotent(self, tmp_path, model_file):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            run(["sample", "--model", str(model_file), "--T", "4", "--n", "10", "--seed", "5",
                 "--out", str(tmp_path / name)])
            outs.append((tmp_path / name).read_text().splitlines()[1:])
        assert outs[0] == outs[1]

    def test_eval_report(self, tmp_path, model_file, data_file):
        out = tmp_path / "r.json"
        assert run(["eval", "--model", str(model_file), "--data", str(data_file), "--seed", "1",
                    "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        agg = rep["aggregate"]
        assert len(rep["streams"]) == 20 and rep["config"]["seed"] == 1
        assert agg["type_term"] + agg["time_term"] == pytest.approx(agg["total"])
        assert agg["total_per_event"] == pytest.approx(agg["total"] / agg["events"])

    def test_train_then_predict(self, tmp_path, data_file):
        params = tmp_path / "fit.json"
        log = tmp_path / "log.csv"
        assert run(["train", "--kind", "nsmmpp", "--D", "3", "--train", str(data_file), "--dev", str(data_file),
                    "--seed", "2", "--max-epochs", "2", "--out", str(params), "--log", str(log)]) == 0
        assert load_model(params).kind == "nsmmpp"
        lines = log.read_text().splitlines()
        assert lines[0].startswith("# ") and lines[1] == "epoch,train_ll,dev_ll" and len(lines) == 5
        metrics = tmp_path / "m.json"
        rows = tmp_path / "p.csv"
        assert run(["predict", "--model", str(params), "--data", str(data_file), "--seed", "4", "--m", "20",
                    "--out", str(metrics), "--csv", str(rows)]) == 0
        m = json.loads(metrics.read_text())
        assert m["n_predictions"] == 240 and 0 <= m["error_rate"] <= 1
        assert len(rows.read_text().splitlines()) == 242

    def test_gradcheck(self, capsys):
        assert run(["gradcheck", "--kind", "nsmmpp", "--K", "2", "--D", "4", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("max_rel_error") and out.strip().endswith("PASS")

    def test_superposition_experiment(self, tmp_path):
        out = tmp_path / "sup.json"
        assert run(["experiment", "--mode", "superposition", "--seed", "0", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["passed"] is True
