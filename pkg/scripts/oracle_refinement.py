"""Grid solver against the lattice oracle under simultaneous refinement.

    python3 scripts/oracle_refinement.py [problem.json] [--levels 4]
"""
import argparse
import time

import numpy as np

from switchvi import shipped_problem
from switchvi.bilateral import solve_bilateral
from switchvi.grid import GridSpec, build_grid, interpolate
from switchvi.oracle import build_tree, switching_game_value
from switchvi.problemfile import load_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem", nargs="?", default=str(shipped_problem("d1")))
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--base-nodes", type=int, default=61)
    ap.add_argument("--base-steps", type=int, default=30)
    args = ap.parse_args()

    pf = load_problem(args.problem)
    problem, spec = pf.problem, pf.grid_spec
    x0 = np.asarray(pf.oracle.get("x0", [0.0] * problem.dim_k), dtype=float)
    print(f"{'nodes':>6} {'steps':>6} {'max gap':>10} {'ratio':>6} {'grid s':>7} {'tree s':>7}  lattice values")
    prev = None
    for level in range(args.levels):
        nodes = (args.base_nodes - 1) * 2 ** level + 1
        steps = args.base_steps * 2 ** level
        t0 = time.perf_counter()
        grid = build_grid(GridSpec(spec.box_lo, spec.box_hi, [nodes] * problem.dim_k, steps, spec.boundary),
                          problem)
        field, _ = solve_bilateral(problem, grid)
        t1 = time.perf_counter()
        lattice = switching_game_value(build_tree(problem, x0, steps), problem)
        t2 = time.perf_counter()
        grid_vals = np.array([[interpolate(field, i, j, 0.0, x0) for j in range(1, problem.modes.count2 + 1)]
                              for i in range(1, problem.modes.count1 + 1)])
        gap = float(np.max(np.abs(lattice - grid_vals)))
        ratio = f"{gap / prev:.2f}" if prev else "-"
        print(f"{nodes:>6} {steps:>6} {gap:>10.3e} {ratio:>6} {t1 - t0:>7.2f} {t2 - t1:>7.2f}  "
              + " ".join(f"{v:.6f}" for v in lattice.ravel()))
        prev = gap


if __name__ == "__main__":
    main()
