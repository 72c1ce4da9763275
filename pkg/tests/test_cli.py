import json
import subprocess
import sys

import pytest

from fpphyp.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_GATE, EXIT_OK, main

CONFIG = """
[model]
kind = free
rank = 2
[distribution]
kind = uniform
a = 0
b = 1
[experiment]
kind = velocity
seed = 8
directions = a
n_grid = 5
replications = 4
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    return path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_builtin(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "validate", "--radius", "4", "--out", tmp_path)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["verification"]["ok"]
    assert data["spectral"]["lambda"] == pytest.approx(3.0)
    assert (tmp_path / "validation.json").exists()


def test_validate_defective_automaton(capsys, tmp_path):
    aut = tmp_path / "bad.aut"
    aut.write_text("states 3 initial 1\n1 a 2\n2 A 3\n")
    code, out, _ = run_cli(capsys, "validate", "--automaton", aut, "--radius", "2")
    assert code == EXIT_GATE
    assert json.loads(out)["verification"]["non_geodesic"]


def test_validate_malformed_automaton(capsys, tmp_path):
    aut = tmp_path / "broken.aut"
    aut.write_text("states 2 initial 1\n1 z 2\n")
    code, _, err = run_cli(capsys, "validate", "--automaton", aut)
    assert code == EXIT_CONFIG
    assert "line 2" in err


def test_query_verbs(capsys):
    code, out, _ = run_cli(capsys, "query", "passage", "1", "a^3", "--seed", "4")
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["edges"] == 3 and res["path"][-1] == "a^3"
    code, out, _ = run_cli(capsys, "query", "cone", "ab")
    assert json.loads(out)["cone_measure"] == pytest.approx(1 / 12)
    code, out, _ = run_cli(capsys, "query", "gromov", "a^2b", "a^2B", "1")
    assert json.loads(out)["gromov_product"] == 2.0
    code, _, _ = run_cli(capsys, "query", "gromov", "a")
    assert code == EXIT_CONFIG


def test_run_and_report(capsys, cfg_file, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(capsys, "run", "--config", cfg_file, "--out", out_dir, "--jsonl")
    assert code == EXIT_OK
    for name in ("manifest.json", "records.csv", "records.jsonl", "summary.json"):
        assert (out_dir / name).exists()
    code, out, _ = run_cli(capsys, "report", "--out", out_dir)
    assert code == EXIT_OK and json.loads(out)["experiment"] == "velocity"


def test_run_gate_failure(capsys, cfg_file, tmp_path):
    cfg_file.write_text(CONFIG + "expect_velocity = 5.0\n")
    code, _, _ = run_cli(capsys, "run", "--config", cfg_file, "--out", tmp_path / "o")
    assert code == EXIT_GATE


def test_run_budget_and_config_errors(capsys, cfg_file, tmp_path):
    code, _, _ = run_cli(capsys, "run", "--config", cfg_file, "--out", tmp_path / "b",
                         "--budget-relaxations", "5")
    assert code == EXIT_BUDGET
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nkind = free\n")
    code, _, err = run_cli(capsys, "run", "--config", bad)
    assert code == EXIT_CONFIG and "error" in err
    code, _, _ = run_cli(capsys, "run", "--config", tmp_path / "missing.ini")
    assert code == EXIT_CONFIG
    code, _, _ = run_cli(capsys, "report", "--out", tmp_path / "nowhere")
    assert code == EXIT_CONFIG


def test_seed_override_changes_records(capsys, cfg_file, tmp_path):
    run_cli(capsys, "run", "--config", cfg_file, "--out", tmp_path / "s1")
    run_cli(capsys, "run", "--config", cfg_file, "--out", tmp_path / "s2", "--seed", "9")
    a = (tmp_path / "s1" / "records.csv").read_bytes()
    assert a != (tmp_path / "s2" / "records.csv").read_bytes()
    m = json.loads((tmp_path / "s2" / "manifest.json").read_text())
    assert m["seed"] == 9


def test_console_entry_point(cfg_file, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fpphyp.cli", "run", "--config", str(cfg_file),
                           "--out", str(tmp_path / "sub"), "--workers", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"] is True
