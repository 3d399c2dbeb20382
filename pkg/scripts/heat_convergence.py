"""Heat benchmark v = x^2 + (T - t): error at (0, 0) and observed orders in dt and dx.

    python3 scripts/heat_convergence.py [--boundary extrapolate|clamp] [--half-width 3]
"""
import argparse
import math

from switchvi import shipped_problem
from switchvi.grid import GridSpec, build_grid, interpolate
from switchvi.problemfile import load_problem
from switchvi.schemes import PenalizedConfig, solve_penalized


def value(problem, half_width, nodes, steps, boundary):
    grid = build_grid(GridSpec([-half_width], [half_width], [nodes], steps, boundary), problem)
    return interpolate(solve_penalized(problem, grid, PenalizedConfig())[0], 1, 1, 0.0, [0.0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--boundary", default="extrapolate", choices=("extrapolate", "clamp"))
    ap.add_argument("--half-width", type=float, default=3.0)
    args = ap.parse_args()
    problem = load_problem(shipped_problem("heat")).problem
    exact = problem.horizon_T

    print(f"time refinement at 121 nodes, box [-{args.half_width:g}, {args.half_width:g}], {args.boundary}")
    u = [value(problem, args.half_width, 121, s, args.boundary) for s in (30, 60, 120, 240)]
    for s, v in zip((30, 60, 120, 240), u):
        print(f"  steps {s:>4}: v(0,0) = {v:.8f}, error {v - exact:+.3e}")
    for k in range(len(u) - 2):
        print(f"  dt order from differences: {math.log2(abs(u[k] - u[k + 1]) / abs(u[k + 1] - u[k + 2])):.3f}")

    print("space refinement at 960 steps")
    w = [value(problem, args.half_width, n, 960, args.boundary) for n in (31, 61, 121)]
    for n, v in zip((31, 61, 121), w):
        print(f"  nodes {n:>4}: v(0,0) = {v:.8f}, error {v - exact:+.3e}")
    print(f"  dx order from differences: {math.log2(abs(w[0] - w[1]) / abs(w[1] - w[2])):.3f}")

    print("box width at 241 nodes and 240 steps (truncation error)")
    for hw in (2.0, 3.0, 4.0, 5.0):
        print(f"  half width {hw:g}: error {value(problem, hw, 241, 240, args.boundary) - exact:+.3e}")


if __name__ == "__main__":
    main()
