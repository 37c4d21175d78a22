import json

import pytest

from dscd.cli import main
from dscd.harness import TRACE_COLUMNS


def test_optimize_writes_trace(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    rc = main(["optimize", "--function", "styblinski-tang", "--dim", "4", "--budget", "300",
               "--method", "adam+dscd", "--lr", "0.05", "--seed", "3", "--k", "100", "--t", "20",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 301
    assert "best" in capsys.readouterr().out


@pytest.mark.parametrize("method,extra", [
    ("adam", ["--lr-schedule", "linear:0.1:0.001"]),
    ("dscd", []),
    ("uniform", []),
    ("adam+dscd", ["--lr", "0.01", "--t", "inf"]),
])
def test_optimize_methods(tmp_path, method, extra):
    out = tmp_path / "t.csv"
    rc = main(["optimize", "--function", "schwefel", "--dim", "3", "--budget", "50", "--method", method,
               "--out", str(out), *extra])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 51


def test_optimize_errors_are_one_line(tmp_path, capsys):
    rc = main(["optimize", "--function", "schwefel", "--budget", "10", "--method", "adam",
               "--out", str(tmp_path / "x.csv")])
    assert rc != 0
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 and "--lr" in err
    rc = main(["optimize", "--function", "schwefel", "--budget", "0", "--method", "dscd",
               "--out", str(tmp_path / "x.csv")])
    assert rc != 0


def test_bench_command(tmp_path):
    cfg = {
        "objective": "schwefel", "dim": 2, "budget": 200, "replicates": 3, "base_seed": 1,
        "methods": [{"optimizer": "adam", "lr": 0.1}, {"optimizer": "adam", "lr": 0.1, "with_dscd": True},
                    {"optimizer": "uniform"}],
        "bootstrap_resamples": 200,
    }
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(cfg))
    assert main(["bench", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "aggregate.csv").exists()
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert set(summary["final"]) == {"adam-0.1", "adam-0.1+dscd", "uniform"}


def test_bench_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"objective": "schwefel", "methods": [{"optimizer": "uniform"}], "extra": 1}))
    assert main(["bench", "--config", str(path), "--out", str(tmp_path / "o")]) != 0
    assert "unknown config keys" in capsys.readouterr().err
    assert main(["bench", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) != 0


def test_bilevel_command(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps({"steps": 120, "checkpoint_every": 40, "T": 10, "K": 50}))
    assert main(["bilevel", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS) and len(lines) == 122
    ckpt = json.loads((tmp_path / "out" / "checkpoints.json").read_text())
    assert [c["step"] for c in ckpt["checkpoints"]] == [0, 40, 80, 120]
    assert set(ckpt["checkpoints"][0]) == {"step", "group_means", "valid_after_discretization"}
