import json
import subprocess
import sys

import numpy as np
import pytest

from multistop.cli import main
from multistop.fixtures import synthetic_low
from multistop.grid import SimplexGrid
from multistop.model import model_to_dict, save_model


@pytest.fixture
def table1(tmp_path):
    p = tmp_path / "t1.json"
    save_model(synthetic_low(), p)
    return str(p)


def test_validate_ok(table1, capsys):
    assert main(["validate", table1]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_validate_negative_entry(tmp_path, capsys):
    d = model_to_dict(synthetic_low())
    d["transition"][0] = [1.1, -0.1, 0.0]
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert main(["validate", str(tmp_path / "bad.json")]) == 1


def test_validate_non_tp2_lists_minors(tmp_path, capsys):
    d = model_to_dict(synthetic_low())
    d["observation"] = [row[::-1] for row in d["observation"]]
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert main(["validate", str(tmp_path / "bad.json")]) == 1
    out = capsys.readouterr().out
    assert "FAIL  observation TP2" in out and "(1, 2, 1, 2)" in out


def test_unreadable_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["validate", str(tmp_path / "junk.json")]) == 2


def test_bad_usage():
    assert main(["frobnicate"]) == 2


def test_solve_outputs(table1, tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", table1, "--grid", "10", "--out", str(out)]) == 0
    n = SimplexGrid.expected_size(3, 10)
    assert len((out / "mine_sets.csv").read_text().splitlines()) == n + 1
    assert len((out / "value_table.csv").read_text().splitlines()) == 3 * n + 1
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["grid"] == 10
    assert "monotone=True" in (out / "structure.txt").read_text()
    # refuses to overwrite, then succeeds with --force
    assert main(["solve", table1, "--grid", "10", "--out", str(out)]) == 2
    assert main(["solve", table1, "--grid", "10", "--out", str(out), "--force"]) == 0
    assert not list(out.glob(".*"))


def test_train_outputs(table1, tmp_path):
    out = tmp_path / "train"
    rc = main(["train", table1, "--iterations", "15", "--spsa-rollouts", "100", "--rollouts", "500",
               "--out", str(out), "--seed", "4"])
    assert rc == 0
    assert len((out / "trace.csv").read_text().splitlines()) == 16
    assert (out / "policy.txt").read_text().startswith("num_stops 3\nnum_states 3\n")


def test_compare_single_policy_and_determinism(table1, tmp_path):
    args = ["compare", table1, "--policies", "first-l", "--rollouts", "2000", "--seed", "42"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "comparison.txt").read_bytes()
    assert a == (tmp_path / "b" / "comparison.txt").read_bytes()
    assert len(a.decode().splitlines()) == 2


def test_compare_rejects_unknown_policy(table1, tmp_path):
    assert main(["compare", table1, "--policies", "oracle", "--out", str(tmp_path / "c")]) == 2


def test_compare_with_policy_file(table1, tmp_path):
    pf = tmp_path / "p.txt"
    pf.write_text("num_stops 3\nnum_states 3\n0.1 1\n0.2 1\n0.3 1\n")
    assert main(["compare", table1, "--policies", "linear,random", "--policy-file", str(pf),
                 "--rollouts", "1000", "--out", str(tmp_path / "c")]) == 0


def test_simulate(table1, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", table1, "--policy", "first-l", "--rollouts", "500", "--out", str(out)]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("t,state,action") and len(lines) == 4


def test_estimate(tmp_path):
    from importlib import resources
    with resources.as_file(resources.files("multistop") / "data" / "btc_standin_2022.csv") as csv:
        assert main(["estimate", str(csv), "--out", str(tmp_path / "e")]) == 0
    rep = json.loads((tmp_path / "e" / "estimation_report.json").read_text())
    assert rep["num_records"] == 153 and rep["observation_is_tp2"]
    assert main(["validate", str(tmp_path / "e" / "model.json")]) in (0, 1)


def test_estimate_constant_series(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("timestamp,hash_rate,difficulty\n2022-01-01,1,1\n2022-01-02,1,1\n")
    assert main(["estimate", str(p), "--out", str(tmp_path / "e")]) == 1


def test_optimize_stops(table1, tmp_path, capsys):
    assert main(["optimize-stops", table1, "--cost", "0.005", "--lmax", "4", "--grid", "10",
                 "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "stops.csv").read_text().splitlines()
    assert rows[0] == "L,value,cost,net" and len(rows) == 6


def test_module_entry_point(table1):
    r = subprocess.run([sys.executable, "-m", "multistop", "validate", table1], capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
