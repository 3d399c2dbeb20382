"""JSON problem files, value-field CSV files and run manifests.

Problem file layout::

    {
      "name": "d1", "T": 1.0,
      "modes": {"count1": 2, "count2": 2},
      "dynamics": {"b": ["0"], "sigma": [["0.5"]]},
      "generators": {"f_1_1": "...", ...},
      "costs": {"g_lower_1_2": "0.3", "g_upper_1_2": "...", ...},
      "terminal": {"h_1_1": "...", ...},
      "grid": {"lo": [-3], "hi": [3], "nodes": [121], "time_steps": 60, "boundary": "extrapolate"},
      "solver": {"tol": 1e-8, "max_iters": 2000},
      "oracle": {"x0": [0], "steps": 60}
    }

Diagonal costs may be omitted; every off-diagonal cost must be present.
Expressions may be given as strings or plain numbers.
"""
from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exprlang import ExprNameError, ExprSyntaxError, parse
from .grid import Grid, GridSpec, ValueField, build_grid
from .model import ModeSpace, ProblemError, ProblemSpec

__all__ = ["ProblemFileError", "ProblemFile", "load_problem", "parse_problem", "parse_grid_flag",
           "write_field_csv", "read_field_csv", "sha256", "write_json"]

SECTIONS = ("name", "T", "modes", "dynamics", "generators", "costs", "terminal", "grid", "solver", "oracle")
_KEY_RE = re.compile(r"^(f|h|g_lower|g_upper)_([1-9][0-9]*)_([1-9][0-9]*)$")


class ProblemFileError(ValueError):
    pass


@dataclass
class ProblemFile:
    problem: ProblemSpec
    grid_spec: GridSpec | None
    solver: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    path: str | None = None

    def grid(self, override: GridSpec | None = None) -> Grid:
        spec = override or self.grid_spec
        if spec is None:
            raise ProblemFileError("no grid section in the problem file and no --grid flag")
        return build_grid(spec, self.problem)


def _expr_text(value, where):
    """Parsed expression; syntax and name errors are reported with their location."""
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ProblemFileError(f"{where}: expected an expression string or number")
    text = value if isinstance(value, str) else repr(float(value))
    try:
        return parse(text)
    except (ExprSyntaxError, ExprNameError) as err:
        raise ProblemFileError(f"{where}: {err}") from None


def _section(doc, name, kind=dict):
    if name not in doc:
        raise ProblemFileError(f"missing section {name!r}")
    if not isinstance(doc[name], kind):
        raise ProblemFileError(f"section {name!r} has the wrong type")
    return doc[name]


def _indexed(section, prefix, a_count, b_count, where, required=True, diagonal_zero=False):
    out = [[parse("0")] * b_count for _ in range(a_count)] if diagonal_zero else {}
    seen = set()
    for key, value in section.items():
        m = _KEY_RE.match(key)
        if not m or m.group(1) != prefix:
            raise ProblemFileError(f"{where}: unexpected key {key!r}")
        a, b = int(m.group(2)), int(m.group(3))
        if a > a_count or b > b_count:
            raise ProblemFileError(f"{where}: {key!r} is outside the mode range")
        text = _expr_text(value, f"{where}.{key}")
        seen.add((a, b))
        if diagonal_zero:
            out[a - 1][b - 1] = text
        else:
            out[(a, b)] = text
    if required:
        for a in range(1, a_count + 1):
            for b in range(1, b_count + 1):
                if diagonal_zero and a == b:
                    continue
                if (a, b) not in seen:
                    raise ProblemFileError(f"{where}: missing {prefix}_{a}_{b}")
    return out


def parse_grid_section(sec) -> GridSpec:
    try:
        return GridSpec(list(sec["lo"]), list(sec["hi"]), [int(v) for v in sec["nodes"]],
                        int(sec["time_steps"]), sec.get("boundary", "extrapolate"))
    except KeyError as err:
        raise ProblemFileError(f"grid: missing key {err.args[0]!r}") from None
    except (TypeError, ValueError) as err:
        raise ProblemFileError(f"grid: {err}") from None


def parse_problem(doc: dict, path: str | None = None) -> ProblemFile:
    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be a JSON object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ProblemFileError(f"unknown sections {sorted(unknown)}")
    modes_sec = _section(doc, "modes")
    try:
        modes = ModeSpace(int(modes_sec["count1"]), int(modes_sec["count2"]))
    except (KeyError, TypeError, ValueError) as err:
        raise ProblemFileError(f"modes: {err}") from None
    dyn = _section(doc, "dynamics")
    if "b" not in dyn or "sigma" not in dyn:
        raise ProblemFileError("dynamics needs 'b' and 'sigma'")
    b = [_expr_text(v, f"dynamics.b[{c}]") for c, v in enumerate(dyn["b"])]
    sigma = [[_expr_text(v, f"dynamics.sigma[{r}][{c}]") for c, v in enumerate(row)]
             for r, row in enumerate(dyn["sigma"])]
    if not b or not sigma or not sigma[0]:
        raise ProblemFileError("dynamics: b and sigma must be non-empty")
    gens = _indexed(_section(doc, "generators"), "f", modes.count1, modes.count2, "generators")
    term = _indexed(_section(doc, "terminal"), "h", modes.count1, modes.count2, "terminal")
    costs = _section(doc, "costs")
    low = _indexed({k: v for k, v in costs.items() if k.startswith("g_lower")}, "g_lower",
                   modes.count1, modes.count1, "costs", diagonal_zero=True)
    up = _indexed({k: v for k, v in costs.items() if k.startswith("g_upper")}, "g_upper",
                  modes.count2, modes.count2, "costs", diagonal_zero=True)
    stray = [k for k in costs if not k.startswith(("g_lower", "g_upper"))]
    if stray:
        raise ProblemFileError(f"costs: unexpected keys {stray}")
    try:
        T = float(doc.get("T", 1.0))
        problem = ProblemSpec(len(b), len(sigma[0]), T, modes, b, sigma, gens, low, up, term,
                              name=str(doc.get("name", "problem")))
    except (ExprSyntaxError, ExprNameError, ProblemError) as err:
        raise ProblemFileError(str(err)) from None
    grid_spec = parse_grid_section(doc["grid"]) if "grid" in doc else None
    return ProblemFile(problem, grid_spec, dict(doc.get("solver", {})), dict(doc.get("oracle", {})),
                       doc, path)


def load_problem(path) -> ProblemFile:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ProblemFileError(f"cannot read {path}: {err.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemFileError(f"{path}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_problem(doc, str(path))


def parse_grid_flag(text: str) -> GridSpec:
    """'lo,hi,nodes[,lo,hi,nodes...];time_steps' -> GridSpec."""
    try:
        box, steps = text.split(";")
        vals = [v.strip() for v in box.split(",")]
        if len(vals) % 3 or not vals:
            raise ValueError
        lo = [float(v) for v in vals[0::3]]
        hi = [float(v) for v in vals[1::3]]
        nodes = [int(v) for v in vals[2::3]]
        return GridSpec(lo, hi, nodes, int(steps))
    except ValueError as err:
        detail = f": {err}" if str(err) else ""
        raise ProblemFileError(f"bad --grid value {text!r}; expected 'lo,hi,nodes[,...];time_steps'{detail}") from None


# -- value fields as CSV ----------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_field_csv(path, field: ValueField) -> None:
    """Rows ordered by slice, node, then pair (i, j) lexicographic."""
    grid = field.grid
    k = grid.k
    c1, c2 = field.modes.count1, field.modes.count2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[f"x{c + 1}" for c in range(k)], "i", "j", "value"])
        for s, t in enumerate(field.times):
            ts = _fmt(float(t))
            for q in range(grid.size):
                xs = [_fmt(float(grid.points[c, q])) for c in range(k)]
                for i in range(c1):
                    for j in range(c2):
                        w.writerow([ts, *xs, i + 1, j + 1, _fmt(float(field.data[i, j, s, q]))])


def read_field_csv(path):
    """Returns (times (S,), points (k, N), data (c1, c2, S, N)) from a file written above."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProblemFileError(f"{path}: empty file")
    header = rows[0]
    k = len(header) - 4
    if k < 1 or header[0] != "t" or header[-3:] != ["i", "j", "value"]:
        raise ProblemFileError(f"{path}: unexpected header {header}")
    arr = np.array([[float(v) for v in r] for r in rows[1:]])
    times = np.unique(arr[:, 0])
    c1, c2 = int(arr[:, k + 1].max()), int(arr[:, k + 2].max())
    S = times.size
    N = arr.shape[0] // (S * c1 * c2)
    if N * S * c1 * c2 != arr.shape[0]:
        raise ProblemFileError(f"{path}: row count does not match a full field")
    data = arr[:, -1].reshape(S, N, c1, c2).transpose(2, 3, 0, 1)
    points = arr[:: c1 * c2, 1:k + 1][:N].T.copy()
    return arr[:: N * c1 * c2, 0].copy(), points, np.ascontiguousarray(data)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)
