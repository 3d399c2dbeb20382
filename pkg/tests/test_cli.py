import csv
import json

import numpy as np
import pytest

from conftest import FIXTURES
from switchvi import shipped_problem
from switchvi.cli import main
from switchvi.problemfile import read_field_csv

D1 = str(shipped_problem("d1"))
SMALL = "-3,3,41;20"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_shipped_problem(capsys):
    code, out, _ = run(capsys, "validate", D1)
    assert code == 0 and "passed" in out


def test_validate_zero_loop_prints_loop(capsys):
    code, out, _ = run(capsys, "validate", FIXTURES / "zero_loop.json")
    assert code == 1
    assert "(1,1) -> (2,1) -> (2,2) -> (1,2) -> (1,1)" in out


def test_validate_terminal_violation_prints_pair_and_point(capsys):
    code, out, _ = run(capsys, "validate", FIXTURES / "terminal_violation.json")
    assert code == 1
    line = next(l for l in out.splitlines() if l.strip().startswith("terminal"))
    assert "FAILED" in line and "pair (2, 1)" in line and "x=" in line


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "T": }')
    code, _, err = run(capsys, "validate", bad)
    assert code == 3 and "line 2" in err
    doc = json.loads(shipped_problem("d1").read_text())
    doc["generators"]["f_1_1"] = "x1 +"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "validate", bad)
    assert code == 3 and "f_1_1" in err


def test_solve_bilateral_csv(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", D1, "--scheme", "bilateral-min", "--out", tmp_path)
    assert code == 0
    with open(tmp_path / "field.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "i", "j", "value"]
    assert len(rows) == 1 + 61 * 121 * 4
    assert rows[1][:4] == ["0", "-3", "1", "1"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"field", "report"}
    assert manifest["validation"]["ok"] is True


def test_solve_decreasing_schedule_table(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", D1, f"--grid={SMALL}", "--scheme", "decreasing", "--schedule", "1,2,4,8",
                       "--out", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("field_*.csv")) == [
        "field_n0_m1.csv", "field_n0_m2.csv", "field_n0_m4.csv", "field_n0_m8.csv"]
    table = [l for l in out.splitlines() if l.split()[2:3] == ["decreasing"]]
    assert len(table) == 3
    assert all(float(l.split()[-1]) <= 1e-7 for l in table)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["max_violation"] <= 1e-7


def test_solve_oracle(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", D1, "--scheme", "oracle", "--n-steps", "8", "--out", tmp_path)
    assert code == 0
    assert out.count("v^(") == 4
    rows = (tmp_path / "oracle.csv").read_text().splitlines()
    assert rows[0] == "i,j,value" and len(rows) == 5
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["steps"] == 8


def test_solve_refuses_invalid_problem(tmp_path, capsys):
    code, _, err = run(capsys, "solve", FIXTURES / "zero_loop.json", "--out", tmp_path)
    assert code == 1 and "no_free_loop" in err
    assert not (tmp_path / "field.csv").exists()


def test_solver_failure_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "solve", D1, f"--grid={SMALL}", "--tol", "1e-30", "--out", tmp_path)
    assert code == 2
    report = json.loads((tmp_path / "report.json").read_text())
    assert "error" in report and str(tmp_path / "report.json") in err


def test_csv_round_trip_is_exact(tmp_path, capsys, d1):
    run(capsys, "solve", D1, f"--grid={SMALL}", "--scheme", "doubly", "--n", 4, "--m", 4, "--out", tmp_path)
    times, points, data = read_field_csv(tmp_path / "field.csv")
    from switchvi.grid import GridSpec, build_grid
    from switchvi.schemes import PenalizedConfig, solve_penalized
    g = build_grid(GridSpec([-3], [3], [41], 20), d1)
    field, _ = solve_penalized(d1, g, PenalizedConfig(n=4, m=4))
    np.testing.assert_array_equal(times, g.times)
    np.testing.assert_array_equal(points, g.points)
    np.testing.assert_array_equal(data, field.data)


def test_manifest_rerun_is_identical(tmp_path, capsys):
    first = tmp_path / "a"
    run(capsys, "solve", D1, f"--grid={SMALL}", "--scheme", "increasing", "--n", 8, "--out", first)
    code, out, _ = run(capsys, "rerun", first / "manifest.json", "--out", tmp_path / "b")
    assert code == 0 and "field: identical" in out
    a = json.loads((first / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["outputs"]["field"]["sha256"] == b["outputs"]["field"]["sha256"]


def test_verify_fast_passes(capsys):
    code, out, _ = run(capsys, "verify", D1, "--level", "fast")
    assert code == 0 and "all properties passed" in out


def test_verify_negated_cost_fails_before_solving(tmp_path, capsys):
    doc = json.loads(shipped_problem("d1").read_text())
    doc["costs"]["g_lower_1_2"] = "-0.3"
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "verify", path, "--report", tmp_path / "r.json")
    assert code == 1
    assert "validation FAILED before any solve" in out and "g_lower_1_2" in out
    assert json.loads((tmp_path / "r.json").read_text())["results"] == []


def test_verify_tightened_tolerances_fail(capsys):
    code, out, _ = run(capsys, "verify", D1, f"--grid={SMALL}", "--tighten", 1000)
    assert code == 1
    failed = [l.split()[1] for l in out.splitlines() if l.strip().startswith("FAIL")]
    assert "oracle_gap" in failed and "decreasing_limit" in failed


def test_bad_grid_flag(capsys):
    code, _, err = run(capsys, "validate", D1, "--grid=-3,3;10")
    assert code == 3


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2
