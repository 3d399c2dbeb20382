"""Property suite run by ``switchvi verify``.

Every check measures one number and compares it with a tolerance.  The
``tighten`` factor divides all tolerances, which turns the suite into a
probe of how much margin each property has.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bilateral import check_assumptions, compare_sub_super, feasibility, residual, solve_bilateral
from .exprlang import parse, pretty
from .grid import Grid, GridSpec, build_grid, interpolate
from .model import ProblemSpec
from .oracle import _nodal_projection, build_tree, switching_game_value
from .problemfile import ProblemFile
from .schemes import PenalizedConfig, _pair_layout, run_schedule, run_until_stagnation, solve_penalized

__all__ = ["TOLERANCES", "PropertyResult", "SuiteReport", "run_suite", "shifted_generator"]

TOLERANCES = {
    "residual": 1e-6,
    "lower_feasibility": 1e-6,
    "upper_feasibility": 1e-6,
    "uniqueness_probe": 1e-7,
    "min_max_ordering": 1e-7,
    "comparison_shift": 1e-7,
    "schedule_monotonicity": 1e-7,
    "family_ordering": 1e-7,
    "decreasing_limit": 5e-2,
    "oracle_gap": 5e-2,
    "oracle_refinement": 1.2,        # largest allowed ratio of successive gaps
    "penalized_oracle": 1e-6,
    "oracle_nodal_monotone": 1e-12,
}


@dataclass
class PropertyResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "tolerance": self.tolerance, "detail": self.detail, "seconds": round(self.seconds, 3)}


@dataclass
class SuiteReport:
    level: str
    tighten: float
    validation: dict
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.validation.get("ok", False)) and all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def as_dict(self):
        return {"level": self.level, "tighten": self.tighten, "passed": self.passed,
                "validation": self.validation, "results": [r.as_dict() for r in self.results]}


def shifted_generator(problem: ProblemSpec, shift: float) -> ProblemSpec:
    """Same problem with every f^{ij} replaced by f^{ij} + shift."""
    gens = {p: parse(f"{pretty(e)} + {shift!r}") for p, e in problem.gen_f.items()}
    return problem.replace(gen_f=gens)


def _oracle_setup(pf: ProblemFile, problem: ProblemSpec, grid: Grid):
    x0 = np.asarray(pf.oracle.get("x0", [0.0] * problem.dim_k), dtype=float)
    steps = int(pf.oracle.get("steps", grid.spec.time_steps))
    return x0, steps


def _grid_value(field_, x0) -> np.ndarray:
    modes = field_.modes
    return np.array([[interpolate(field_, i, j, 0.0, x0) for j in range(1, modes.count2 + 1)]
                     for i in range(1, modes.count1 + 1)])


def _scaled_grid(spec: GridSpec, factor: float) -> GridSpec:
    nodes = [int(round((n - 1) * factor)) + 1 for n in spec.nodes_per_dim]
    return replace(spec, nodes_per_dim=tuple(nodes), time_steps=int(round(spec.time_steps * factor)))


def run_suite(pf: ProblemFile, *, level: str = "fast", tighten: float = 1.0, grid: Grid | None = None,
              workers: int = 1, seed: int = 0, log=None) -> SuiteReport:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    if not tighten > 0:
        raise ValueError("tighten must be positive")
    problem = pf.problem
    grid = grid or pf.grid()
    tol = float(pf.solver.get("tol", 1e-8))
    max_iters = int(pf.solver.get("max_iters", 2000))
    tols = {k: v / tighten for k, v in TOLERANCES.items()}
    tols["oracle_refinement"] = TOLERANCES["oracle_refinement"]
    validation = check_assumptions(problem, grid)
    report = SuiteReport(level, tighten, validation.as_dict())
    if not validation.ok:
        return report

    def record(name, measured, detail="", t0=None, passed=None):
        ok = measured <= tols[name] if passed is None else passed
        res = PropertyResult(name, bool(ok), float(measured), tols[name], detail,
                             time.perf_counter() - t0 if t0 else 0.0)
        report.results.append(res)
        if log:
            log(res)
        return res

    solve = lambda p, **kw: solve_bilateral(p, grid, tol=tol, max_iters=max_iters, force=True, **kw)[0]
    t0 = time.perf_counter()
    vmin = solve(problem)
    res = residual(vmin, problem, grid)
    record("residual", res.max_abs, f"worst (i, j, slice, node) = {res.worst}", t0)
    t0 = time.perf_counter()
    feas = feasibility(vmin, problem, grid, band=tols["upper_feasibility"])
    record("lower_feasibility", feas.lower, "", t0)
    record("upper_feasibility", feas.upper, "where v - L exceeds the band", t0)

    t0 = time.perf_counter()
    vzero = solve(problem, init="zeros")
    record("uniqueness_probe", float(np.max(np.abs(vzero.data - vmin.data))),
           "sweeps started from zeros vs previous slice", t0)

    t0 = time.perf_counter()
    vmax = solve(problem, variant="max_first")
    gap = float(np.max(np.abs(vmax.data - vmin.data)))
    record("min_max_ordering", compare_sub_super(vmax, vmin), f"max |max_first - min_first| = {gap:.3e}", t0)

    t0 = time.perf_counter()
    vshift = solve(shifted_generator(problem, 0.1))
    record("comparison_shift", compare_sub_super(vmin, vshift), "f vs f + 0.1", t0)

    t0 = time.perf_counter()
    vals = [0, 1, 2, 4, 8] if level == "full" else [0, 1, 4]
    base = PenalizedConfig("doubly", fixed_point_tol=1e-10)
    sched = run_schedule(problem, grid, base, list(itertools.product(vals, vals)), workers=workers)
    record("schedule_monotonicity", sched.max_violation,
           f"{len(sched.comparisons)} neighbour comparisons over n, m in {vals}", t0)

    t0 = time.perf_counter()
    pens = (1, 4, 16)
    lows = [solve_penalized(problem, grid, PenalizedConfig("upper_only", n=n, fixed_point_tol=1e-10))[0]
            for n in pens]
    highs = [solve_penalized(problem, grid, PenalizedConfig("lower_only", m=m, fixed_point_tol=1e-10))[0]
             for m in pens]
    record("family_ordering", max(compare_sub_super(a, b) for a in lows for b in highs),
           f"increasing family n in {pens} below decreasing family m in {pens}", t0)

    t0 = time.perf_counter()
    stag = run_until_stagnation(problem, grid, PenalizedConfig("lower_only", fixed_point_tol=1e-10), tol=1e-4)
    d = float(np.max(np.abs(stag.field.data - vmin.data)))
    record("decreasing_limit", d if stag.converged else float("inf"),
           f"stagnated at m = {stag.penalties[-1]:g}" if stag.converged else "family did not stagnate", t0)

    if problem.generator_uses_z:
        return report
    x0, steps = _oracle_setup(pf, problem, grid)
    t0 = time.perf_counter()
    tree = build_tree(problem, x0, steps)
    oracle = switching_game_value(tree, problem)
    record("oracle_gap", float(np.max(np.abs(oracle - _grid_value(vmin, x0)))),
           f"lattice with {steps} steps at x0 = {x0.tolist()}", t0)

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    low_src, low_ik, up_src, up_jl = _pair_layout(problem.modes)
    P = problem.modes.size
    X = tree.level_points(min(steps, 3))
    GL, GU = problem.costs_lower(0.0, X), problem.costs_upper(0.0, X)
    lc = GL[low_ik[..., 0], low_ik[..., 1]] if low_src.shape[1] else np.zeros((P, 0, X.shape[1]))
    uc = GU[up_jl[..., 0], up_jl[..., 1]] if up_src.shape[1] else np.zeros((P, 0, X.shape[1]))
    worst = 0.0
    for _ in range(20):
        C = rng.normal(scale=0.5, size=(P, X.shape[1]))
        bump = C.copy()
        bump[rng.integers(P)] += rng.uniform(0.0, 0.5)
        out0 = _nodal_projection(C, low_src, lc, up_src, uc, max(P * P, 4))[0]
        out1 = _nodal_projection(bump, low_src, lc, up_src, uc, max(P * P, 4))[0]
        worst = max(worst, float(np.max(out0 - out1)))
    record("oracle_nodal_monotone", worst, "20 random single-pair increases", t0)

    if level == "full":
        t0 = time.perf_counter()
        pen = switching_game_value(tree, problem, penalty=(2.0 ** 20, 2.0 ** 20), check=False)
        record("penalized_oracle", float(np.max(np.abs(pen - oracle))), "n = m = 2^20 on the same lattice", t0)

        t0 = time.perf_counter()
        gaps = []
        for factor in (0.5, 1.0, 2.0):
            g = build_grid(_scaled_grid(grid.spec, factor), problem)
            f = solve_bilateral(problem, g, tol=tol, max_iters=max_iters, force=True)[0]
            o = switching_game_value(build_tree(problem, x0, max(1, int(round(steps * factor)))), problem,
                                     check=False)
            gaps.append(float(np.max(np.abs(o - _grid_value(f, x0)))))
        ratios = [b / a if a > 0 else 0.0 for a, b in zip(gaps[:-1], gaps[1:])]
        record("oracle_refinement", max(ratios), f"gaps {['%.3e' % v for v in gaps]}", t0)
    return report
