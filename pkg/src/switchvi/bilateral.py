"""Direct solver for the bilateral interconnected-obstacle system and its residual.

min_first:  min{v - L[v], max{v - U[v], -dv/dt - L_h v - f}} = 0
max_first:  max{v - U[v], min{v - L[v], -dv/dt - L_h v - f}} = 0

Both are stepped backward with the implicit scheme.  Each slice is the nodal
complementarity problem solved by ``schemes.SliceSystem`` (policy iteration,
projected Gauss-Seidel fallback with fresh obstacle values).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridError, ValueField, gradient_matrices, operator_matrix
from .model import ProblemSpec, ValidationReport, validate
from .schemes import Closure, SolverError, _backward_solve

__all__ = ["AssumptionError", "ComplementarityResidual", "Feasibility", "solve_bilateral",
           "residual", "feasibility", "compare_sub_super", "VARIANTS"]

VARIANTS = ("min_first", "max_first")


class AssumptionError(ValueError):
    def __init__(self, message, report: ValidationReport | None = None):
        super().__init__(message)
        self.report = report


def _grid_samples(grid: Grid, limit: int = 4000) -> np.ndarray:
    pts = grid.points.T
    step = max(1, len(pts) // limit)
    return pts[::step]


def check_assumptions(problem: ProblemSpec, grid: Grid) -> ValidationReport:
    """Terminal compatibility and no-free-loop checks on grid nodes at five times."""
    return validate(problem, _grid_samples(grid), np.linspace(0.0, problem.horizon_T, 5))


def solve_bilateral(problem: ProblemSpec, grid: Grid, variant: str = "min_first", *, tol: float = 1e-8,
                    max_iters: int = 2000, init: str = "next", method: str = "newton",
                    force: bool = False):
    """Backward solve of the bilateral system; returns (ValueField, SolveReport).

    init: starting iterate of each slice, 'next' (previous slice) or 'zeros'.
    method: 'newton' (policy iteration with sweep fallback) or 'gauss_seidel'.
    Refuses problems failing the sampled assumption checks unless ``force``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if method not in ("newton", "gauss_seidel"):
        raise ValueError("method must be 'newton' or 'gauss_seidel'")
    if not force:
        report = check_assumptions(problem, grid)
        if not report.ok:
            raise AssumptionError("assumption check failed: " + "; ".join(report.failures()), report)
    closure = Closure("hard", "hard", 0.0, 0.0, variant)
    return _backward_solve(problem, grid, closure, theta=1.0, lam=0.0, tol=tol, max_iters=max_iters,
                           init=init, method=method)


# -- residual audit -------------------------------------------------------------

@dataclass
class ComplementarityResidual:
    values: np.ndarray          # (c1, c2, S, N); zero on the terminal slice and boundary nodes
    interior: np.ndarray        # (N,) bool
    max_abs: float
    worst: tuple | None         # (i, j, slice, node)

    def as_dict(self):
        return {"max_abs": self.max_abs, "worst": list(self.worst) if self.worst else None}


def _obstacles(V, problem: ProblemSpec, t: float, X):
    """L, U of shape (c1, c2, N) from slice V (c1, c2, N)."""
    c1, c2, N = V.shape
    GL = problem.costs_lower(t, X)
    GU = problem.costs_upper(t, X)
    L = np.full(V.shape, -np.inf)
    U = np.full(V.shape, np.inf)
    for i in range(c1):
        for k in range(c1):
            if k != i:
                L[i] = np.maximum(L[i], V[k] - GL[i, k])
    for j in range(c2):
        for l in range(c2):
            if l != j:
                U[:, j] = np.minimum(U[:, j], V[:, l] + GU[j, l])
    return L, U


def _pde_part(field: ValueField, problem: ProblemSpec, grid: Grid, n: int, theta: float):
    """-dv/dt - L_h v - f on slice n, computed from the field alone."""
    c1, c2 = problem.modes.count1, problem.modes.count2
    t, t1 = grid.times[n], grid.times[n + 1]
    dt = t1 - t
    V, Vn = field.data[:, :, n, :], field.data[:, :, n + 1, :]
    flat, flat_n = V.reshape(c1 * c2, -1), Vn.reshape(c1 * c2, -1)
    Lv = (operator_matrix(grid, problem, t) @ flat.T).T
    if theta < 1.0:
        Lv = theta * Lv + (1.0 - theta) * (operator_matrix(grid, problem, t1) @ flat_n.T).T
    Z = None
    if problem.generator_uses_z:
        D = gradient_matrices(grid, problem, t)
        sig = problem.sigma(t, grid.points)
        grad = np.array([[Dc @ row for Dc in D] for row in flat])
        Z = np.einsum("kdn,pkn->pdn", sig, grad).reshape(c1, c2, problem.dim_d, grid.size)
    F = problem.generator(t, grid.points, V, Z)
    return (V - Vn) / dt - Lv.reshape(V.shape) - F


def residual(field: ValueField, problem: ProblemSpec, grid: Grid, variant: str = "min_first",
             theta: float = 1.0) -> ComplementarityResidual:
    """Discrete complementarity residual at interior nodes of every non-terminal slice."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    data = field.data
    out = np.zeros(data.shape)
    interior = ~grid.boundary_mask()
    for n in range(data.shape[2] - 1):
        V = data[:, :, n, :]
        L, U = _obstacles(V, problem, grid.times[n], grid.points)
        E = _pde_part(field, problem, grid, n, theta)
        dL, dU = V - L, V - U
        if variant == "min_first":
            R = np.minimum(dL, np.maximum(dU, E))
        else:
            R = np.maximum(dU, np.minimum(dL, E))
        out[:, :, n, :] = np.where(interior, R, 0.0)
    absval = np.abs(out)
    if absval.size and absval.max() > 0:
        worst = tuple(int(a) for a in np.unravel_index(np.argmax(absval), absval.shape))
        worst = (worst[0] + 1, worst[1] + 1, worst[2], worst[3])
    else:
        worst = None
    return ComplementarityResidual(out, interior, float(absval.max(initial=0.0)), worst)


@dataclass
class Feasibility:
    lower: float        # max (L - v)^+ over all nodes and non-terminal slices
    upper: float        # max (v - U)^+ over nodes where v - L > band

    def as_dict(self):
        return {"lower": self.lower, "upper": self.upper}


def feasibility(field: ValueField, problem: ProblemSpec, grid: Grid, band: float = 1e-6) -> Feasibility:
    low = up = 0.0
    for n in range(field.data.shape[2]):
        V = field.data[:, :, n, :]
        L, U = _obstacles(V, problem, grid.times[n], grid.points)
        with np.errstate(invalid="ignore"):
            low = max(low, float(np.max(np.maximum(L - V, 0.0))))
            slack = V - L > band
            up = max(up, float(np.max(np.where(slack, np.maximum(V - U, 0.0), 0.0))))
    return Feasibility(low, up)


def compare_sub_super(sub: ValueField, sup: ValueField) -> float:
    """Largest (sub - super)^+ over pairs, slices and nodes."""
    if sub.data.shape != sup.data.shape or sub.modes != sup.modes:
        raise GridError("fields live on different grids or mode spaces")
    if not (np.array_equal(sub.times, sup.times) and np.array_equal(sub.grid.points, sup.grid.points)):
        raise GridError("fields live on different grids")
    return float(np.max(np.maximum(sub.data - sup.data, 0.0), initial=0.0))
