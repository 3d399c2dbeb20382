"""Command line: ``switchvi validate | solve | verify | rerun``.

Exit codes: 0 ok, 1 validation or property failure, 2 solver non-convergence,
3 I/O or parse error.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bilateral import AssumptionError, check_assumptions, solve_bilateral
from .exprlang import ExprDomainError
from .grid import GridError
from .oracle import OracleError, build_tree, switching_game_value
from .problemfile import (ProblemFileError, load_problem, parse_grid_flag, parse_problem, sha256,
                          write_field_csv, write_json)
from .schemes import PenalizedConfig, SolverError, run_schedule, solve_penalized
from .verify import run_suite

EXIT_OK, EXIT_FAIL, EXIT_NONCONVERGENCE, EXIT_IO = 0, 1, 2, 3

SCHEMES = {
    "doubly": "doubly",
    "decreasing": "lower_only",
    "increasing": "upper_only",
    "bilateral-min": "min_first",
    "bilateral-max": "max_first",
    "oracle": "oracle",
}


def _print_validation(report, out=None):
    out = out or sys.stdout
    for name in ("terminal", "no_free_loop", "cycle_lp1", "cycle_lp2", "cost_nonneg"):
        c = getattr(report, name)
        status = "ok" if c.ok else "FAILED"
        line = f"  {name:<14} {status}"
        if not c.ok:
            line += f"  {c.detail}"
        print(line, file=out)
    for w in report.warnings:
        print(f"  warning: {w}", file=out)


def _load(args):
    pf = load_problem(args.problem)
    override = parse_grid_flag(args.grid) if getattr(args, "grid", None) else None
    return pf, pf.grid(override)


def cmd_validate(args) -> int:
    pf, grid = _load(args)
    report = check_assumptions(pf.problem, grid)
    print(f"validation of {pf.problem.name}: {'passed' if report.ok else 'FAILED'}")
    _print_validation(report)
    return EXIT_OK if report.ok else EXIT_FAIL


def _parse_schedule(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ProblemFileError(f"bad --schedule {text!r}; expected comma-separated penalties") from None
    if not vals or any(v < 0 for v in vals):
        raise ProblemFileError("--schedule needs non-negative penalties")
    return vals


def _schedule_entries(kind, vals):
    if kind == "lower_only":
        return [(0.0, v) for v in vals]
    if kind == "upper_only":
        return [(v, 0.0) for v in vals]
    return [(a, b) for a in vals for b in vals]


def _tag(n, m):
    return f"n{n:g}_m{m:g}"


def _run_solve(args, pf, grid, out: Path):
    """Returns (outputs, report dict)."""
    problem = pf.problem
    kind = SCHEMES[args.scheme]
    tol = args.tol if args.tol is not None else float(pf.solver.get("tol", 1e-8))
    max_iters = int(pf.solver.get("max_iters", 2000))
    outputs, report = {}, {"scheme": args.scheme}

    if kind == "oracle":
        x0 = np.asarray(pf.oracle.get("x0", [0.0] * problem.dim_k), dtype=float)
        steps = args.n_steps if args.n_steps is not None else int(pf.oracle.get("steps", grid.spec.time_steps))
        tree = build_tree(problem, x0, steps)
        values = switching_game_value(tree, problem, check=not args.force)
        path = out / "oracle.csv"
        with open(path, "w") as fh:
            fh.write("i,j,value\n")
            for i, j in problem.modes.pairs:
                fh.write(f"{i},{j},{values[i - 1, j - 1]:.17g}\n")
        outputs["oracle"] = path
        report.update(x0=x0.tolist(), steps=steps, moment_error=tree.moment_error,
                      values={f"{i},{j}": float(values[i - 1, j - 1]) for i, j in problem.modes.pairs})
        print(f"lattice values at t=0, x0={x0.tolist()} ({steps} steps):")
        for i, j in problem.modes.pairs:
            print(f"  v^({i},{j}) = {values[i - 1, j - 1]:.10f}")
        return outputs, report

    if kind in ("min_first", "max_first"):
        field, rep = solve_bilateral(problem, grid, kind, tol=tol, max_iters=max_iters, force=True)
        path = out / "field.csv"
        write_field_csv(path, field)
        outputs["field"] = path
        report["solve"] = rep.as_dict()
        print(f"{args.scheme}: max slice defect {rep.max_residual:.3e}, {rep.wall_time:.2f} s")
        return outputs, report

    base = PenalizedConfig(kind, fixed_point_tol=min(tol, 1e-8), max_inner_iters=max_iters)
    if args.schedule:
        entries = _schedule_entries(kind, _parse_schedule(args.schedule))
        sched = run_schedule(problem, grid, base, entries, workers=args.threads)
        for (n, m), field in sched.fields.items():
            path = out / f"field_{_tag(n, m)}.csv"
            write_field_csv(path, field)
            outputs[f"field_{_tag(n, m)}"] = path
        report["solves"] = {_tag(n, m): r.as_dict() for (n, m), r in sched.reports.items()}
        report["monotonicity"] = [c.as_dict() for c in sched.comparisons]
        report["max_violation"] = sched.max_violation
        print(f"{'first':>14} {'second':>14} {'expected':>11} {'violation':>11}")
        for c in sched.comparisons:
            print(f"{_tag(*c.first):>14} {_tag(*c.second):>14} {c.direction:>11} {c.violation:>11.3e}")
        print(f"max violation {sched.max_violation:.3e}")
        return outputs, report

    cfg = PenalizedConfig(kind, n=args.n, m=args.m, fixed_point_tol=base.fixed_point_tol,
                          max_inner_iters=max_iters)
    field, rep = solve_penalized(problem, grid, cfg)
    path = out / "field.csv"
    write_field_csv(path, field)
    outputs["field"] = path
    report["solve"] = rep.as_dict()
    print(f"{args.scheme} (n={args.n:g}, m={args.m:g}): max slice defect {rep.max_residual:.3e}, "
          f"{rep.wall_time:.2f} s")
    return outputs, report


def _manifest_args(args):
    keys = ("scheme", "n", "m", "schedule", "n_steps", "grid", "tol", "threads", "seed", "force")
    return {k: getattr(args, k, None) for k in keys}


def cmd_solve(args) -> int:
    pf, grid = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    validation = check_assumptions(pf.problem, grid)
    if not validation.ok:
        print("validation FAILED", file=sys.stderr)
        _print_validation(validation, sys.stderr)
        if not args.force:
            return EXIT_FAIL
        print("continuing because of --force", file=sys.stderr)
    manifest = {
        "tool": "switchvi", "version": __version__, "python": platform.python_version(),
        "command": "solve", "args": _manifest_args(args), "problem": pf.raw,
        "problem_file": str(args.problem), "grid": grid.spec.__dict__ | {},
        "validation": validation.as_dict(),
    }
    report_path = out / "report.json"
    status = EXIT_OK
    try:
        outputs, report = _run_solve(args, pf, grid, out)
    except (SolverError, OracleError) as err:
        outputs = {}
        report = {"scheme": args.scheme, "error": str(err),
                  "where": getattr(err, "where", None),
                  "partial": err.report.as_dict() if getattr(err, "report", None) else None}
        print(f"solver failed: {err}; report at {report_path}", file=sys.stderr)
        status = EXIT_NONCONVERGENCE
    write_json(report_path, report)
    outputs["report"] = report_path
    manifest["outputs"] = {k: {"path": str(p), "sha256": sha256(p)} for k, p in outputs.items()}
    manifest["timings"] = {"total_seconds": round(time.perf_counter() - t0, 3)}
    write_json(out / "manifest.json", manifest)
    print(f"wrote {len(outputs)} file(s) and manifest.json to {out}")
    return status


def cmd_verify(args) -> int:
    pf, grid = _load(args)

    def log(res):
        mark = "PASS" if res.passed else "FAIL"
        print(f"  {mark} {res.name:<24} measured {res.measured:.3e}  tolerance {res.tolerance:.3e}  "
              f"({res.seconds:.1f} s) {res.detail}")

    print(f"verify {pf.problem.name} at level {args.level}"
          + (f", tolerances tightened {args.tighten:g}x" if args.tighten != 1 else ""))
    report = run_suite(pf, level=args.level, tighten=args.tighten, grid=grid, workers=args.threads,
                       seed=args.seed, log=log)
    if not report.validation["ok"]:
        print("validation FAILED before any solve:")
        for name in ("terminal", "no_free_loop", "cycle_lp1", "cycle_lp2", "cost_nonneg"):
            if not report.validation[name]["ok"]:
                print(f"  {name}: {report.validation[name]['detail']}")
    if args.report:
        write_json(args.report, report.as_dict())
    failures = report.failures
    if failures:
        print(f"{len(failures)} propert{'y' if len(failures) == 1 else 'ies'} failed; first: "
              f"{failures[0].name} measured {failures[0].measured:.3e} > {failures[0].tolerance:.3e}")
    print("all properties passed" if report.passed else "verification FAILED")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_rerun(args) -> int:
    """Repeat a solve from its manifest and compare output hashes."""
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        pf = parse_problem(manifest["problem"])
    except (OSError, ValueError, KeyError) as err:
        raise ProblemFileError(f"cannot use manifest {args.manifest}: {err}") from None
    problem_path = Path(args.out) / "problem.json"
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_json(problem_path, pf.raw)
    ns = argparse.Namespace(**manifest["args"], problem=str(problem_path), out=args.out)
    status = cmd_solve(ns)
    fresh = json.loads((Path(args.out) / "manifest.json").read_text())
    same = True
    for key, entry in manifest["outputs"].items():
        if key == "report":
            continue
        other = fresh["outputs"].get(key, {}).get("sha256")
        ok = other == entry["sha256"]
        same &= ok
        print(f"  {key}: {'identical' if ok else 'DIFFERENT'}")
    if status != EXIT_OK:
        return status
    return EXIT_OK if same else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchvi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"switchvi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("problem", help="problem JSON file")
        p.add_argument("--grid", help="'lo,hi,nodes[,...];time_steps' (overrides the file's grid section)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="seed for randomized property checks")

    p = sub.add_parser("validate", help="check terminal compatibility and the no-free-loop property")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run one solver and write value fields")
    common(p)
    p.add_argument("--scheme", choices=sorted(SCHEMES), default="bilateral-min")
    p.add_argument("--n", type=float, default=0.0, help="lower penalty")
    p.add_argument("--m", type=float, default=0.0, help="upper penalty")
    p.add_argument("--schedule", help="comma-separated penalties, e.g. 1,2,4,8")
    p.add_argument("--n-steps", type=int, help="lattice steps for --scheme oracle")
    p.add_argument("--tol", type=float)
    p.add_argument("--out", default="switchvi_out")
    p.add_argument("--force", action="store_true", help="run even if validation fails")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the property suite")
    common(p)
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--tighten", type=float, default=1.0, help="divide every tolerance by this factor")
    p.add_argument("--report", help="write the suite report as JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rerun", help="repeat a solve from its manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out", default="switchvi_rerun")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFileError, GridError, OSError, ExprDomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except AssumptionError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL
    except (SolverError, OracleError) as err:
        print(f"solver failed: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
