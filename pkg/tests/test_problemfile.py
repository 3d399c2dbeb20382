import copy
import json

import pytest

from switchvi import shipped_problem
from switchvi.problemfile import ProblemFileError, load_problem, parse_grid_flag, parse_problem

DOC = json.loads(shipped_problem("d1").read_text())


def edited(**changes):
    doc = copy.deepcopy(DOC)
    for path, value in changes.items():
        *head, last = path.split("__")
        target = doc
        for key in head:
            target = target[key]
        if value is None:
            del target[last]
        else:
            target[last] = value
    return doc


def test_shipped_problems_load():
    for name in ("d1", "heat"):
        pf = load_problem(shipped_problem(name))
        assert pf.grid_spec is not None and pf.problem.name == name


def test_numbers_accepted_as_expressions():
    pf = parse_problem(edited(costs__g_lower_1_2=0.3))
    assert pf.problem.cost_lower_g[0][1].source == "0.3"


@pytest.mark.parametrize("changes, match", [
    (dict(modes=None), "modes"),
    (dict(costs__g_upper_2_1=None), "g_upper_2_1"),
    (dict(costs__g_lower_3_1="1"), "outside the mode range"),
    (dict(costs__other="1"), "unexpected key"),
    (dict(terminal__h_1_1="t"), "h_1_1"),
    (dict(dynamics__b=["x1 *"]), r"dynamics\.b\[0\]"),
    (dict(generators__f_1_2=True), "generators.f_1_2"),
    (dict(grid__nodes=[2]), "grid"),
    (dict(extra={}), "unknown sections"),
])
def test_parse_errors(changes, match):
    with pytest.raises(ProblemFileError, match=match):
        parse_problem(edited(**changes))


def test_json_error_location(tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{\n  "name": "x",\n  "T": 1.0,,\n}')
    with pytest.raises(ProblemFileError, match="line 3"):
        load_problem(path)
    with pytest.raises(ProblemFileError):
        load_problem(tmp_path / "missing.json")


def test_grid_flag():
    spec = parse_grid_flag("-1,1,11,0,2,5;20")
    assert spec.box_lo == (-1.0, 0.0) and spec.box_hi == (1.0, 2.0)
    assert spec.nodes_per_dim == (11, 5) and spec.time_steps == 20
    for bad in ("-1,1,11", "-1,1;20", "a,b,c;1", "-1,1,2;4"):
        with pytest.raises(ProblemFileError):
            parse_grid_flag(bad)
