import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stackelberg_observer.cli import main
from stackelberg_observer.config import bundled_config_text

TRAJ_HEADER = ["k", "x_1", "x_2", "xhat1_1", "xhat1_2", "xhat2_1", "xhat2_2",
               "xtilde1_1", "xtilde1_2", "xtilde2_1", "xtilde2_2", "u1_1", "u2_1",
               "y1_1", "y2_1", "stage_cost_1", "stage_cost_2"]


def run_cli(tmp_path, *args, out="out"):
    return main([*args, "--out", str(tmp_path / out)])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def write_config(tmp_path, edit):
    data = json.loads(bundled_config_text())
    edit(data)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data), encoding="utf-8")
    return str(p)


def test_solve_writes_solution(tmp_path, capsys):
    assert run_cli(tmp_path, "solve") == 0
    sol = json.loads((tmp_path / "out" / "solution.json").read_text())
    assert sol["K1"][0] == pytest.approx([0.2028, -0.1374], abs=1e-3)
    assert "K1[1,1]" in capsys.readouterr().out


def test_simulate_zero_steps(tmp_path):
    assert run_cli(tmp_path, "simulate", "--steps", "0", "--quiet") == 0
    raw = (tmp_path / "out" / "trajectory.csv").read_bytes()
    assert b"\r" not in raw
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert rows[0] == TRAJ_HEADER
    assert len(rows) == 2 and rows[1][0] == "0"
    assert [float(v) for v in rows[1][1:3]] == [1.0, -1.0]


def test_trajectory_values_round_trip(tmp_path):
    assert run_cli(tmp_path, "simulate", "--steps", "20", "--quiet") == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert len(rows) == 22
    for row in rows[1:]:
        for text in row[1:]:
            assert repr(float(text)) == repr(float(format(float(text), ".17g")))


def test_gains_round_trip(tmp_path):
    assert run_cli(tmp_path, "design", "--quiet", out="a") == 0
    assert run_cli(tmp_path, "simulate", "--quiet", out="b") == 0
    gains = tmp_path / "a" / "observer.json"
    assert main(["simulate", "--gains", str(gains), "--quiet", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "b" / "trajectory.csv").read_bytes() == (tmp_path / "c" / "trajectory.csv").read_bytes()


def test_analyze_decay_table(tmp_path, capsys):
    assert run_cli(tmp_path, "analyze") == 0
    out = capsys.readouterr().out
    assert "decay_bound_holds,yes" in out
    rows = read_csv(tmp_path / "out" / "decay.csv")
    assert rows[0] == ["N", "delta_J1", "delta_J2", "bound_1", "bound_2"]
    table = np.array([[float(v) for v in r] for r in rows[1:]])
    assert table[0, 0] == 0 and table[-1, 0] == 200
    for col in (1, 2):
        assert abs(table[-1, col]) < 1e-8 * abs(table[0, col])
    costs = json.loads((tmp_path / "out" / "costs.json").read_text())
    assert costs["matching_form"] == ["rederived", "rederived"]


def test_from_filters_decay_list(tmp_path):
    assert run_cli(tmp_path, "analyze", "--from", "150", "--quiet") == 0
    rows = read_csv(tmp_path / "out" / "decay.csv")
    assert rows[1][0] == "150" and len(rows) == 52


def test_quiet_is_silent(tmp_path, capsys):
    assert run_cli(tmp_path, "solve", "--quiet") == 0
    captured = capsys.readouterr()
    assert captured.out == "" and captured.err == ""


def test_parse_error_exit_and_cleanup(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"A\": [[1]],,\n}")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path / "out")]) == 2
    assert "ParseError" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_validation_error_exit(tmp_path, capsys):
    cfg = write_config(tmp_path, lambda d: d.pop("R22"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
    assert "R22" in capsys.readouterr().err


def test_nonconvergence_exit(tmp_path):
    def unstabilizable(d):
        d["A"] = [[2, 0], [0, 0.5]]
        d["B1"] = [[0], [1]]
        d["B2"] = [[0], [1]]
    cfg = write_config(tmp_path, unstabilizable)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "out"), "--quiet"]) == 3
    assert not (tmp_path / "out").exists()


def test_observer_failure_exit_removes_partial_outputs(tmp_path):
    def blind(d):
        d["H1"] = [[0, 0]]
        d["H2"] = [[0, 0]]
        d["A"] = [[1.2, -0.7], [1, -0.3]]
        d["observer"] = {"method": "lmi", "max_iter": 500}
    cfg = write_config(tmp_path, blind)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "out"), "--quiet"]) == 4
    assert not (tmp_path / "out" / "solution.json").exists()
    assert not (tmp_path / "out" / "trajectory.csv").exists()


def test_bad_gains_rejected(tmp_path):
    gains = tmp_path / "g.json"
    gains.write_text(json.dumps({"K1": [[0.2, -0.1]], "K2": [[-0.4, 0.1]], "L1": [[5], [5]], "L2": [[5], [5]]}))
    assert main(["simulate", "--gains", str(gains), "--out", str(tmp_path / "out"), "--quiet"]) == 4


def test_reproduce_is_deterministic(tmp_path, capsys):
    assert run_cli(tmp_path, "reproduce-paper", out="a") == 0
    text = capsys.readouterr().out
    assert run_cli(tmp_path, "reproduce-paper", "--quiet", out="b") == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert a == b and "decay.png" in a and "reproduce.csv" in a
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert "K1[1],0.2028" not in text  # computed value printed, not the reference
    assert any(line.startswith("K1[1],") and line.endswith(",pass") for line in text.splitlines())


def test_verify_pristine_and_faulted(tmp_path):
    assert run_cli(tmp_path, "verify", "--quiet", out="a") == 0
    rows = read_csv(tmp_path / "a" / "verify.csv")
    assert all(r[1] == "pass" for r in rows[1:])
    assert run_cli(tmp_path, "verify", "--inject-fault", "--quiet", out="b") == 5


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "stackelberg_observer", "solve", "--quiet", "--out", str(tmp_path / "o")],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "solution.json").exists()
