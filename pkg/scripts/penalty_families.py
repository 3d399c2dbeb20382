"""Penalized families on a problem file: double-index table, one-sided families, stagnation.

    python3 scripts/penalty_families.py [problem.json] [--max-penalty 8] [--threads 4]
"""
import argparse
import itertools
import time

import numpy as np

from switchvi import shipped_problem
from switchvi.bilateral import compare_sub_super, solve_bilateral
from switchvi.grid import interpolate
from switchvi.problemfile import load_problem
from switchvi.schemes import PenalizedConfig, run_schedule, run_until_stagnation


def root_values(field, x0):
    pairs = field.modes.pairs
    return {p: interpolate(field, *p, 0.0, x0) for p in pairs}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem", nargs="?", default=str(shipped_problem("d1")))
    ap.add_argument("--max-penalty", type=int, default=8)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--stagnation-tol", type=float, default=1e-4)
    args = ap.parse_args()

    pf = load_problem(args.problem)
    problem, grid = pf.problem, pf.grid()
    x0 = pf.oracle.get("x0", [0.0] * problem.dim_k)
    reference, _ = solve_bilateral(problem, grid)
    ref_root = root_values(reference, x0)
    print(f"bilateral reference at x0={x0}: " + ", ".join(f"v{p}={v:.6f}" for p, v in ref_root.items()))

    vals = [0] + [2 ** e for e in range(int(np.log2(args.max_penalty)) + 1)]
    t0 = time.perf_counter()
    sched = run_schedule(problem, grid, PenalizedConfig("doubly"), list(itertools.product(vals, vals)),
                         workers=args.threads)
    print(f"\ndoubly penalized v^(1,1)(0, x0) over n (rows) and m (columns), {time.perf_counter() - t0:.1f} s")
    print("n\\m " + "".join(f"{m:>11}" for m in vals))
    for n in vals:
        row = [interpolate(sched.fields[(float(n), float(m))], 1, 1, 0.0, x0) for m in vals]
        print(f"{n:<4}" + "".join(f"{v:>11.6f}" for v in row))
    print(f"largest monotonicity violation {sched.max_violation:.2e}")

    for kind, label in (("upper_only", "increasing (n)"), ("lower_only", "decreasing (m)")):
        t0 = time.perf_counter()
        res = run_until_stagnation(problem, grid, PenalizedConfig(kind), tol=args.stagnation_tol)
        gap = float(np.max(np.abs(res.field.data - reference.data)))
        print(f"\n{label}: {len(res.penalties)} levels, {time.perf_counter() - t0:.1f} s, "
              f"converged={res.converged}")
        for pen, change in zip(res.penalties[1:], res.changes):
            print(f"  penalty {pen:>9g}  change {change:.3e}")
        print(f"  max |family - bilateral| = {gap:.3e}, worst ordering violation {max(res.comparisons):.2e}")
        if kind == "upper_only":
            lower_limit = res.field
        else:
            print(f"\nincreasing limit below decreasing limit by violation "
                  f"{compare_sub_super(lower_limit, res.field):.2e}")


if __name__ == "__main__":
    main()
