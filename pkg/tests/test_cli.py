"""Command-line interface: exit codes, output routing, determinism."""

import json

import pytest

from qdata.cli import DEMOS, main

MINI = {
    "name": "cli-mini",
    "master_seed": 5,
    "box": {"family": "linear", "channel": {"kind": "identity"}},
    "parameter_grid": [{}],
    "detectors": [{"name": "helstrom", "settings": {"trials": 200}}],
}


@pytest.fixture
def mini_path(tmp_path):
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(MINI))
    return str(path)


def drop_timestamp(text):
    return "\n".join(line for line in text.splitlines() if '"timestamp"' not in line)


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    captured = capsys.readouterr()
    assert "usage:" in captured.err


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_demo_gisin_prints_verdict_lines(capsys):
    assert main(["demo", "gisin"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if "ensemble-signalling" in l]
    assert len(lines) == 2
    assert "statistic=" in lines[0] and "threshold=" in lines[0]
    assert "verdict=quantum-consistent" in lines[0]
    assert "verdict=post-quantum" in lines[1]


def test_demo_names_match_packaged_files():
    assert set(DEMOS) == {
        "gisin",
        "helstrom",
        "basis-invariance",
        "ancilla",
        "qrac",
        "nsq-survey",
        "composition",
    }


def test_run_missing_file_diagnostic(capsys):
    assert main(["run", "/nonexistent/scenario.json"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("qdata: ")
    assert "scenario file not found" in err


def test_run_emits_report_json(mini_path, capsys):
    assert main(["run", mini_path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema_version"] == 1
    assert report["scenario"]["name"] == "cli-mini"
    assert report["summary"]["cell_count"] == 1


def test_run_is_reproducible_modulo_timestamp(mini_path, capsys):
    assert main(["run", mini_path, "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["run", mini_path, "--seed", "7"]) == 0
    second = capsys.readouterr().out
    assert drop_timestamp(first) == drop_timestamp(second)
    assert json.loads(first)["provenance"]["seed"] == 7


def test_run_seed_validation(mini_path, capsys):
    assert main(["run", mini_path, "--seed", "-1"]) == 1
    assert "64 unsigned bits" in capsys.readouterr().err


def test_run_out_writes_file_and_prints_digest(mini_path, tmp_path, capsys):
    out_file = tmp_path / "report.json"
    assert main(["run", mini_path, "--out", str(out_file)]) == 0
    digest = capsys.readouterr().out
    assert "scenario: cli-mini" in digest
    report = json.loads(out_file.read_text())
    assert report["summary"]["error_count"] == 0


def test_run_out_unwritable_is_internal_error(mini_path, capsys):
    assert main(["run", mini_path, "--out", "/nonexistent/dir/report.json"]) == 2
    assert "Traceback" in capsys.readouterr().err


def test_report_summarize_round_trip(mini_path, tmp_path, capsys):
    out_file = tmp_path / "report.json"
    assert main(["run", mini_path, "--out", str(out_file)]) == 0
    capsys.readouterr()
    assert main(["report", "summarize", str(out_file)]) == 0
    digest = capsys.readouterr().out
    assert "scenario: cli-mini" in digest
    assert "cells: 1" in digest


def test_report_summarize_missing_file(capsys):
    assert main(["report", "summarize", "/nonexistent/report.json"]) == 1
    assert "report file not found" in capsys.readouterr().err


def test_threads_env_validation(mini_path, capsys, monkeypatch):
    monkeypatch.setenv("QDATA_THREADS", "zero")
    assert main(["run", mini_path]) == 1
    assert "QDATA_THREADS must be a positive integer" in capsys.readouterr().err


def test_threads_flag_accepted(mini_path, capsys):
    assert main(["run", mini_path, "--threads", "2", "--seed", "7"]) == 0
    baseline = capsys.readouterr().out
    assert main(["run", mini_path, "--threads", "1", "--seed", "7"]) == 0
    assert drop_timestamp(capsys.readouterr().out) == drop_timestamp(baseline)
