"""Acceptance criteria on the shipped desk problem D1 and the heat benchmark.

Each test prints one ``[PASS]``/``[FAIL] criterion N: ...`` line; the lines are
repeated in the pytest summary.  Also runnable directly:
``python3 tests/test_acceptance.py``.
"""
import functools
import itertools
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, FIXTURES
from switchvi import shipped_problem
from switchvi.bilateral import (check_assumptions, compare_sub_super, feasibility, residual,
                                solve_bilateral)
from switchvi.grid import GridSpec, build_grid, interpolate
from switchvi.oracle import build_tree, switching_game_value
from switchvi.problemfile import load_problem
from switchvi.schemes import PenalizedConfig, run_schedule, run_until_stagnation, solve_penalized
from switchvi.verify import shifted_generator


def record(number, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def d1():
    pf = load_problem(shipped_problem("d1"))
    return pf.problem, pf.grid()


@functools.lru_cache(maxsize=None)
def d1_bilateral():
    problem, grid = d1()
    return solve_bilateral(problem, grid, "min_first")[0]


def test_criterion_1_double_index_monotonicity():
    problem, grid = d1()
    t0 = time.perf_counter()
    vals = [0, 1, 2, 4, 8]
    res = run_schedule(problem, grid, PenalizedConfig("doubly"), list(itertools.product(vals, vals)))
    secs = time.perf_counter() - t0
    record(1, res.max_violation <= 1e-7 and secs <= 120,
           f"max violation {res.max_violation:.2e} over {len(res.comparisons)} comparisons "
           f"(tol 1e-07), {secs:.1f} s (limit 120 s)")


def test_criterion_2_family_ordering():
    problem, grid = d1()
    t0 = time.perf_counter()
    inc = {n: solve_penalized(problem, grid, PenalizedConfig("upper_only", n=n))[0] for n in (1, 4, 16)}
    dec = {m: solve_penalized(problem, grid, PenalizedConfig("lower_only", m=m))[0] for m in (1, 4, 16)}
    worst = max(compare_sub_super(inc[n], dec[m]) for n in inc for m in dec)
    secs = time.perf_counter() - t0
    record(2, worst <= 1e-7 and secs <= 120,
           f"increasing family below decreasing family, violation {worst:.2e} (tol 1e-07), "
           f"{secs:.1f} s (limit 120 s)")


def test_criterion_3_decreasing_limit():
    problem, grid = d1()
    t0 = time.perf_counter()
    stag = run_until_stagnation(problem, grid, PenalizedConfig("lower_only"), tol=1e-4, max_levels=40)
    gap = float(np.max(np.abs(stag.field.data - d1_bilateral().data)))
    secs = time.perf_counter() - t0
    record(3, stag.converged and gap <= 5e-2 and secs <= 180,
           f"stagnation at m = {stag.penalties[-1]:g} (last change {stag.changes[-1]:.1e}), "
           f"gap to bilateral {gap:.2e} (tol 5e-02), {secs:.1f} s (limit 180 s)")


def test_criterion_4_complementarity_residual():
    problem, grid = d1()
    field = d1_bilateral()
    res = residual(field, problem, grid, "min_first")
    feas = feasibility(field, problem, grid, band=1e-6)
    ok = res.max_abs <= 1e-6 and feas.lower <= 1e-6 and feas.upper <= 1e-6
    record(4, ok, f"residual {res.max_abs:.2e}, lower feasibility {feas.lower:.2e}, "
                  f"upper feasibility {feas.upper:.2e} (tol 1e-06 each)")


def _oracle_gap(nodes, steps):
    problem, _ = d1()
    grid = build_grid(GridSpec([-3.0], [3.0], [nodes], steps), problem)
    field = solve_bilateral(problem, grid, "min_first")[0]
    grid_vals = np.array([[interpolate(field, i, j, 0.0, [0.0]) for j in (1, 2)] for i in (1, 2)])
    lattice = switching_game_value(build_tree(problem, [0.0], steps), problem)
    return float(np.max(np.abs(lattice - grid_vals)))


def test_criterion_5_oracle_equivalence():
    gaps = [_oracle_gap(61, 30), _oracle_gap(121, 60), _oracle_gap(241, 120)]
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    ok = gaps[1] <= 5e-2 and max(ratios) <= 1.2
    record(5, ok, f"gap at 60 steps {gaps[1]:.2e} (tol 5e-02); gaps for 30/60/120 steps "
                  f"{', '.join(f'{g:.2e}' for g in gaps)}, worst ratio {max(ratios):.2f} (limit 1.20)")


def test_criterion_6_uniqueness_probe():
    problem, grid = d1()
    other = solve_bilateral(problem, grid, "min_first", init="zeros")[0]
    diff = float(np.max(np.abs(other.data - d1_bilateral().data)))
    record(6, diff <= 1e-7, f"zero start vs previous-slice start differ by {diff:.2e} (tol 1e-07)")


def test_criterion_7_comparison_audit():
    problem, grid = d1()
    shifted = solve_bilateral(shifted_generator(problem, 0.1), grid, "min_first")[0]
    violation = compare_sub_super(d1_bilateral(), shifted)
    record(7, violation <= 1e-7, f"solution with f below solution with f + 0.1, violation {violation:.2e} "
                                 f"(tol 1e-07)")


def test_criterion_8_validator():
    zero = load_problem(FIXTURES / "zero_loop.json")
    rep_zero = check_assumptions(zero.problem, zero.grid())
    loop_ok = (not rep_zero.ok and not rep_zero.no_free_loop.ok
               and rep_zero.no_free_loop.witness == [(1, 1), (2, 1), (2, 2), (1, 2), (1, 1)])
    term = load_problem(FIXTURES / "terminal_violation.json")
    rep_term = check_assumptions(term.problem, term.grid())
    term_ok = (not rep_term.ok and not rep_term.terminal.ok and rep_term.no_free_loop.ok
               and rep_term.terminal.witness == ((2, 1), "lower", 1) and rep_term.terminal.worst == 0.7)
    problem, grid = d1()
    d1_ok = check_assumptions(problem, grid).ok
    record(8, loop_ok and term_ok and d1_ok,
           f"zero-cost loop rejected with witness {rep_zero.no_free_loop.witness}: {loop_ok}; "
           f"terminal violation rejected at pair (2, 1) by 0.7: {term_ok}; D1 accepted: {d1_ok}")


def _heat_value(steps):
    pf = load_problem(shipped_problem("heat"))
    spec = pf.grid_spec
    grid = build_grid(GridSpec(spec.box_lo, spec.box_hi, spec.nodes_per_dim, steps), pf.problem)
    field = solve_penalized(pf.problem, grid, PenalizedConfig())[0]
    return interpolate(field, 1, 1, 0.0, [0.0])


def test_criterion_9_heat_benchmark():
    u = [_heat_value(s) for s in (60, 120, 240)]
    err = abs(u[0] - 1.0)
    # box truncation contributes a dt-independent error, so the dt order is read
    # from successive differences at a fixed spatial grid
    order = math.log2(abs(u[0] - u[1]) / abs(u[1] - u[2]))
    naive = math.log2(abs(u[0] - 1.0) / abs(u[1] - 1.0))
    record(9, err <= 2e-2 and order >= 1.0,
           f"|v(0,0) - T| = {err:.2e} (tol 2e-02); time order {order:.2f} from 60/120/240 steps "
           f"(need >= 1); order against the closed form {naive:.2f}, limited by box truncation")


def test_criterion_10_min_max_gap():
    problem, grid = d1()
    low = solve_bilateral(problem, grid, "max_first")[0]
    high = d1_bilateral()
    violation = compare_sub_super(low, high)
    gap = float(np.max(np.abs(high.data - low.data)))
    # equality of the two variants is deliberately not asserted
    record(10, violation <= 1e-7, f"max_first above min_first by at most {violation:.2e} (tol 1e-07); "
                                  f"reported gap max |min_first - max_first| = {gap:.2e}")


if __name__ == "__main__":
    import sys
    failures = 0
    tests = [(int(name.split("_")[2]), fn) for name, fn in globals().items() if name.startswith("test_criterion_")]
    for _, fn in sorted(tests, key=lambda item: item[0]):
        try:
            fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
