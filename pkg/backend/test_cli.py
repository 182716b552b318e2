"""End-to-end tests of the command-line entry point."""
import json

import pandas as pd
import pytest

from backend.main import main


@pytest.fixture
def three_region_args(three_region_dir):
    return [
        "--regions", str(three_region_dir / "regions.json"),
        "--rtt", str(three_region_dir / "rtt.json"),
        "--prices", str(three_region_dir / "prices.json"),
    ]


@pytest.fixture
def trace_path(tmp_path):
    path = tmp_path / "trace.ndjson"
    assert main(["generate", "--periods", "6", "--rate", "4", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_help_and_usage(capsys):
    assert main(["train", "--help"]) == 0
    assert "--trace" in capsys.readouterr().out
    assert main([]) == 2
    assert main(["solve"]) == 2


def test_bad_config_path(tmp_path, capsys):
    code = main(["oracle-check", "--config", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)])
    assert code == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "FileNotFoundError"


def test_solve_golden(tmp_path, three_region_dir, three_region_args):
    code = main(["solve", "--instances", str(three_region_dir / "instances.json"), "--out-dir", str(tmp_path),
                 *three_region_args])
    assert code == 0
    got = json.loads((tmp_path / "solve_reports.json").read_text())
    expected = json.loads((three_region_dir / "golden_solve.json").read_text())
    assert len(got) == len(expected)
    for g, e in zip(got, expected):
        assert g["decision"] == e["decision"]
        assert g["video_id"] == e["video_id"]
        for key in ("storage_cost", "migration_cost", "serving_cost", "avg_delay_ms"):
            assert g[key] == pytest.approx(e[key])
    assert (tmp_path / "solve_summary.csv").exists()


def test_solve_threshold_override(tmp_path, three_region_dir, three_region_args):
    code = main(["solve", "--instances", str(three_region_dir / "instances.json"), "--threshold", "5",
                 "--out-dir", str(tmp_path), *three_region_args])
    assert code == 0
    got = json.loads((tmp_path / "solve_reports.json").read_text())
    assert [r["infeasible"] for r in got] == [True, True, False]


def test_domain_error_exit_code(tmp_path, capsys):
    instances = tmp_path / "instances.json"
    instances.write_text(json.dumps({"threshold_ms": 40, "instances": [{"broadcaster_region": 0, "demand": [1, 2]}]}))
    assert main(["solve", "--instances", str(instances), "--out-dir", str(tmp_path)]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "DimensionMismatchError"


def test_malformed_trace_exit_code(tmp_path, capsys):
    trace = tmp_path / "bad.ndjson"
    trace.write_text('{"schema_version": 1, "n_regions": 10}\n{"video_id": 1}\n')
    assert main(["simulate", "--trace", str(trace), "--out-dir", str(tmp_path)]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "TraceFormatError"
    assert error["details"]["row"] == 2


@pytest.mark.parametrize("flag", ["--regions", "--rtt", "--prices"])
def test_missing_input_file_is_a_usage_error(tmp_path, trace_path, three_region_args, capsys, flag):
    args = list(three_region_args)
    missing = str(tmp_path / "missing.json")
    args[args.index(flag) + 1] = missing
    capsys.readouterr()
    assert main(["simulate", "--trace", str(trace_path), "--out-dir", str(tmp_path), *args]) == 2
    err = capsys.readouterr().err
    assert err.startswith("usage:")
    error = json.loads(err.strip().splitlines()[-1])
    assert error["error"] == "FileNotFoundError"
    assert error["details"] == {flag[2:]: missing}


def test_simulate_is_deterministic(tmp_path, trace_path):
    first, second = tmp_path / "a", tmp_path / "b"
    base = ["simulate", "--trace", str(trace_path), "--periods", "6", "--thresholds", "8.8,371"]
    assert main([*base, "--out-dir", str(first)]) == 0
    assert main([*base, "--out-dir", str(second), "--jobs", "2"]) == 0
    assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()

    summary = json.loads((first / "summary.json").read_text())["thresholds"]
    assert summary[0]["threshold_ms"] == 8.8
    assert summary[0]["system_total_cost"] >= summary[1]["system_total_cost"]


def test_generate_is_deterministic(tmp_path, trace_path):
    again = tmp_path / "again.ndjson"
    assert main(["generate", "--periods", "6", "--rate", "4", "--seed", "1", "--out", str(again)]) == 0
    assert again.read_bytes() == trace_path.read_bytes()


def test_train_then_simulate_with_model(tmp_path, trace_path):
    out = tmp_path / "model"
    assert main(["train", "--trace", str(trace_path), "--trees", "3,5", "--max-depth", "6,none",
                 "--out-dir", str(out)]) == 0
    for name in ("model.json", "r2.csv", "train_report.json"):
        assert (out / name).exists()
    report = json.loads((out / "train_report.json").read_text())
    assert len(report["grid"]) == 4

    sim = tmp_path / "sim"
    code = main(["simulate", "--trace", str(trace_path), "--model", str(out / "model.json"), "--periods", "6",
                 "--thresholds", "60", "--xlsx", "--out-dir", str(sim)])
    assert code == 0
    metrics = pd.read_csv(sim / "metrics.csv")
    assert len(metrics) == 6
    assert (sim / "simulation.xlsx").exists()


def test_oracle_check_command(tmp_path):
    assert main(["oracle-check", "--count", "50", "--seed", "2", "--out-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "oracle_check.json").read_text())
    assert summary["n_instances"] == 50
    assert summary["n_mismatches"] == 0
