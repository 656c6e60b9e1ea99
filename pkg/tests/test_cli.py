"""End-to-end command-line tests in temporary directories."""

import json
import subprocess
import sys

import pytest

from synclab.cli import main

CONFIG = {"scheme": "reverse-oneway", "duration_s": 20, "si_s": 1}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(CONFIG))
    return path


def test_run_writes_outputs(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    code = main([
        "run", "--config", str(config_path), "--out-dir", str(out),
        "--save-trace", "--event-log",
    ])
    assert code == 0
    for name in ("measurements.csv", "summary.json", "trace.json", "events.csv"):
        assert (out / name).exists(), name
    line = capsys.readouterr().out
    assert "reverse-oneway" in line and "mae=" in line
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scheme"] == "reverse-oneway"
    assert summary["accuracy"]["n_translated"] > 0
    assert summary["energy"]["total_j"] > 0


def test_run_is_byte_identical_across_invocations(tmp_path, config_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(config_path), "--out-dir", str(a)]) == 0
    assert main(["run", "--config", str(config_path), "--out-dir", str(b)]) == 0
    assert (a / "measurements.csv").read_bytes() == (b / "measurements.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_seed_override_changes_results(tmp_path, config_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(config_path), "--out-dir", str(a), "--seed", "0"])
    main(["run", "--config", str(config_path), "--out-dir", str(b), "--seed", "1"])
    assert (a / "measurements.csv").read_bytes() != (b / "measurements.csv").read_bytes()


def test_count_closed_forms(capsys):
    assert main(["count", "--hops", "4", "--per-hop-measurements", "2"]) == 0
    out = capsys.readouterr().out
    assert "39" in out and "16" in out and "7" in out


def test_count_table(capsys):
    assert main(["count", "--table1"]) == 0
    out = capsys.readouterr().out
    for scheme in ("reverse-oneway", "reverse-twoway",
                   "conventional-oneway", "conventional-twoway"):
        assert scheme in out
    assert "n_tx=  3700" in out  # two-way at SI=1 s
    assert "n_rx=     0" in out  # beaconless never receives


def test_count_requires_hops(capsys):
    assert main(["count"]) == 2
    assert "error:" in capsys.readouterr().err


def test_sweep_writes_rows(tmp_path, config_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--config", str(config_path), "--seeds", "0",
        "--windows", "2", "all", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("scheme,")
    assert len(lines) == 3  # header + one row per window
    assert "wrote 2 rows" in capsys.readouterr().out


def test_replay_reproduces_run_outputs(tmp_path, config_path):
    first = tmp_path / "first"
    main(["run", "--config", str(config_path), "--out-dir", str(first), "--save-trace"])
    again = tmp_path / "again"
    code = main([
        "replay", "--trace", str(first / "trace.json"), "--out-dir", str(again),
    ])
    assert code == 0
    assert (
        (first / "measurements.csv").read_bytes()
        == (again / "measurements.csv").read_bytes()
    )
    narrowed = tmp_path / "narrow"
    main([
        "replay", "--trace", str(first / "trace.json"), "--window", "2",
        "--out-dir", str(narrowed),
    ])
    assert (
        (first / "measurements.csv").read_bytes()
        != (narrowed / "measurements.csv").read_bytes()
    )


def test_missing_config_is_a_usage_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_window_is_rejected_by_the_parser(config_path):
    with pytest.raises(SystemExit):
        main(["sweep", "--config", str(config_path), "--windows", "1", "--out", "x"])
    with pytest.raises(SystemExit):
        main(["sweep", "--config", str(config_path), "--windows", "wide", "--out", "x"])


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "synclab.cli", "count", "--hops", "2"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "conventional n=2" in proc.stdout
