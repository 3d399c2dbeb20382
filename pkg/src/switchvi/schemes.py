"""Backward time stepping for the penalized switching systems.

Each time slice solves, for every mode pair (i, j) and node x,

    v - v_next - dt * (theta L v + (1 - theta) L v_next) - dt * F(v) = 0

where F is f^{ij} plus the penalty terms of the chosen family.  Hard
obstacles (the reflected one-sided families and the bilateral system) enter
as complementarity conditions on the same nodal equations.

The nodal system is piecewise linear.  It is solved by policy iteration
(semismooth Newton) on all pairs and nodes at once.  Policy iteration is not
globally convergent for the mixed min/max structure, so when it cycles the
solver falls back to nodal projected Gauss-Seidel sweeps (pairs lexicographic,
nodes row-major, direction reversed on alternate sweeps) with the freshest
values of the other pairs inside the obstacles.  The generator f is lagged: it
is re-evaluated with the latest iterate until the slice stops moving.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import _kernels
from .grid import Grid, ValueField, gradient_matrices, monotonicity_bound, operator_matrix
from .model import PENALTY_KINDS, ProblemSpec

__all__ = ["PenalizedConfig", "SolveReport", "ScheduleResult", "SolverError", "Closure",
           "step_backward", "solve_penalized", "run_schedule", "run_until_stagnation",
           "default_schedule", "SliceSystem"]

BRANCH_E, BRANCH_L, BRANCH_U = 0, 1, 2


class SolverError(RuntimeError):
    def __init__(self, message, report=None, where=None):
        super().__init__(message)
        self.report = report
        self.where = where


@dataclass(frozen=True)
class Closure:
    """How the obstacles enter the nodal equation.

    lower/upper: 'none', 'penalty' or 'hard'.  order only matters when both are
    hard: 'min_first' is min{v - L, max{v - U, E}}, 'max_first' is
    max{v - U, min{v - L, E}}.
    """

    lower: str = "none"
    upper: str = "none"
    n: float = 0.0
    m: float = 0.0
    order: str = "min_first"

    @classmethod
    def for_kind(cls, kind: str, n: float, m: float) -> "Closure":
        if kind == "doubly":
            return cls("penalty", "penalty", n, m)
        if kind == "lower_only":
            return cls("hard", "penalty", 0.0, m)
        if kind == "upper_only":
            return cls("penalty", "hard", n, 0.0)
        if kind in ("min_first", "max_first"):
            return cls("hard", "hard", 0.0, 0.0, kind)
        raise ValueError(f"unknown scheme kind {kind!r}")


@dataclass(frozen=True)
class PenalizedConfig:
    kind: str = "doubly"
    n: float = 0.0
    m: float = 0.0
    theta: float = 1.0
    fixed_point_tol: float = 1e-10
    max_inner_iters: int = 500
    damping: float = 1.0
    exp_shift_lambda: float = 0.0
    init: str = "next"              # initial iterate per slice: 'next' or 'zeros'

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS + ("min_first", "max_first"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.n < 0 or self.m < 0:
            raise ValueError("penalties must be >= 0")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not self.fixed_point_tol > 0 or self.max_inner_iters < 1:
            raise ValueError("tolerance and iteration cap must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.exp_shift_lambda < 0:
            raise ValueError("exp_shift_lambda must be >= 0")
        if self.init not in ("next", "zeros"):
            raise ValueError("init must be 'next' or 'zeros'")

    @property
    def closure(self) -> Closure:
        return Closure.for_kind(self.kind, self.n, self.m)


@dataclass
class SolveReport:
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    fallbacks: int = 0
    monotonicity: dict = field(default_factory=dict)
    wall_time: float = 0.0
    worst_node: tuple | None = None

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    def as_dict(self):
        return {"iterations": list(self.iterations), "residuals": [float(r) for r in self.residuals],
                "max_residual": float(self.max_residual), "fallbacks": self.fallbacks,
                "monotonicity": self.monotonicity, "wall_time": self.wall_time}


# -- the nodal system of one slice ---------------------------------------------

def _pair_layout(modes):
    """Source pairs for the obstacles of every flattened pair p."""
    c1, c2 = modes.count1, modes.count2
    P = c1 * c2
    low_src = np.zeros((P, c1 - 1), dtype=int)
    low_ik = np.zeros((P, c1 - 1, 2), dtype=int)
    up_src = np.zeros((P, c2 - 1), dtype=int)
    up_jl = np.zeros((P, c2 - 1, 2), dtype=int)
    for i in range(c1):
        for j in range(c2):
            p = i * c2 + j
            for q, k in enumerate(kk for kk in range(c1) if kk != i):
                low_src[p, q] = k * c2 + j
                low_ik[p, q] = (i, k)
            for q, l in enumerate(ll for ll in range(c2) if ll != j):
                up_src[p, q] = i * c2 + l
                up_jl[p, q] = (j, l)
    return low_src, low_ik, up_src, up_jl


class SliceSystem:
    """Nodal equations of one backward step, on unknowns V of shape (P, N).

    E(V) = [A V_p - rhs_p - n' (L - V)^+ + m' (V - U)^+] / dt   (n' = dt n, m' = dt m)
    with A = I - theta dt L_h and obstacles
    L_p = max_k (V[low_src] - low_cost), U_p = min_l (V[up_src] + up_cost).
    """

    def __init__(self, A, rhs, low_src, low_cost, up_src, up_cost, closure: Closure, dt: float):
        self.A = A.tocsr()
        self.rhs = rhs
        self.P, self.N = rhs.shape
        self.low_src, self.low_cost = low_src, low_cost
        self.up_src, self.up_cost = up_src, up_cost
        self.closure = closure
        self.pen_n = dt * closure.n if closure.lower == "penalty" else 0.0
        self.pen_m = dt * closure.m if closure.upper == "penalty" else 0.0
        self._Ablk = sp.kron(sp.identity(self.P, format="csr"), self.A, format="csr")
        self._cols = np.arange(self.N)
        # PDE rows are compared and measured in residual units (per unit time)
        self.inv_dt = 1.0 / dt if dt > 0 else 1.0

    # obstacles -----------------------------------------------------------
    def obstacles(self, V):
        P, N = self.P, self.N
        if self.low_src.shape[1]:
            cand = V[self.low_src] - self.low_cost            # (P, K1, N)
            kL = np.argmax(cand, axis=1)
            L = np.take_along_axis(cand, kL[:, None, :], axis=1)[:, 0, :]
        else:
            kL, L = np.zeros((P, N), dtype=int), np.full((P, N), -np.inf)
        if self.up_src.shape[1]:
            cand = V[self.up_src] + self.up_cost
            kU = np.argmin(cand, axis=1)
            U = np.take_along_axis(cand, kU[:, None, :], axis=1)[:, 0, :]
        else:
            kU, U = np.zeros((P, N), dtype=int), np.full((P, N), np.inf)
        return L, kL, U, kU

    def evaluate(self, V, scaled=True):
        """Residual G(V) and the active branch of every row.

        scaled=False keeps PDE rows in step units; policy iteration picks its
        branches that way, which cycles less often.
        """
        L, kL, U, kU = self.obstacles(V)
        with np.errstate(invalid="ignore"):
            E = (self._Ablk @ V.ravel()).reshape(self.P, self.N) - self.rhs
            actL = (L - V > 0) if self.pen_n > 0 else np.zeros_like(V, dtype=bool)
            actU = (V - U > 0) if self.pen_m > 0 else np.zeros_like(V, dtype=bool)
            if self.pen_n > 0:
                E = E - self.pen_n * np.where(actL, L - V, 0.0)
            if self.pen_m > 0:
                E = E + self.pen_m * np.where(actU, V - U, 0.0)
            if scaled:
                E = E * self.inv_dt
            dL, dU = V - L, V - U
        c = self.closure
        branch = np.zeros(V.shape, dtype=np.int8)
        if c.lower == "hard" and c.upper == "hard":
            if c.order == "min_first":
                useU = dU > E
                inner = np.where(useU, dU, E)
                useL = dL < inner
                G = np.where(useL, dL, inner)
            else:
                useL = dL < E
                inner = np.where(useL, dL, E)
                useU = dU > inner
                G = np.where(useU, dU, inner)
                useL = useL & ~useU
            branch[useU] = BRANCH_U
            branch[useL] = BRANCH_L
        elif c.lower == "hard":
            useL = dL < E
            G = np.where(useL, dL, E)
            branch[useL] = BRANCH_L
        elif c.upper == "hard":
            useU = dU > E
            G = np.where(useU, dU, E)
            branch[useU] = BRANCH_U
        else:
            G = E
        return G, branch, kL, kU, actL, actU

    def defect(self, V) -> float:
        return float(np.max(np.abs(self.evaluate(V)[0]))) if V.size else 0.0

    # policy iteration ----------------------------------------------------------
    def _pointers(self, branch, kL, kU):
        ptr = np.full(branch.shape, -1, dtype=int)
        rowsP = np.arange(self.P)[:, None]
        if self.low_src.shape[1]:
            srcL = self.low_src[rowsP, kL]
            ptr = np.where(branch == BRANCH_L, srcL, ptr)
        if self.up_src.shape[1]:
            srcU = self.up_src[rowsP, kU]
            ptr = np.where(branch == BRANCH_U, srcU, ptr)
        return ptr

    def _break_cycles(self, branch, kL, kU):
        """Hard rows chained into a loop give a singular system; reopen one row per loop."""
        while True:
            ptr = self._pointers(branch, kL, kU)
            cur = ptr.copy()
            for _ in range(self.P):
                cur = np.where(cur >= 0, ptr[np.maximum(cur, 0), self._cols[None, :]], -1)
            bad = np.argwhere(cur >= 0)
            if bad.size == 0:
                return branch
            for p, x in bad:
                if branch[p, x] == BRANCH_E:
                    continue
                seen, q = [], p
                while q >= 0 and q not in seen:
                    seen.append(q)
                    q = ptr[q, x]
                if q >= 0:
                    branch[q, x] = BRANCH_E          # q lies on the loop
                    ptr[q, x] = -1

    def _newton_system(self, branch, kL, kU, actL, actU):
        P, N = self.P, self.N
        isE = branch == BRANCH_E
        isL = branch == BRANCH_L
        isU = branch == BRANCH_U
        rowsP = np.arange(P)[:, None]
        gL = (np.take_along_axis(self.low_cost, kL[:, None, :], axis=1)[:, 0, :]
              if self.low_src.shape[1] else np.zeros((P, N)))
        gU = (np.take_along_axis(self.up_cost, kU[:, None, :], axis=1)[:, 0, :]
              if self.up_src.shape[1] else np.zeros((P, N)))
        srcL = self.low_src[rowsP, kL] if self.low_src.shape[1] else np.zeros((P, N), dtype=int)
        srcU = self.up_src[rowsP, kU] if self.up_src.shape[1] else np.zeros((P, N), dtype=int)
        flat = np.arange(P * N).reshape(P, N)
        colL = srcL * N + self._cols[None, :]
        colU = srcU * N + self._cols[None, :]

        pl = isE & actL
        pu = isE & actU
        diag = (isL | isU).astype(float) + self.pen_n * pl + self.pen_m * pu
        rows = [flat.ravel(), flat[pl], flat[pu], flat[isL], flat[isU]]
        cols = [flat.ravel(), colL[pl], colU[pu], colL[isL], colU[isU]]
        vals = [diag.ravel(), np.full(pl.sum(), -self.pen_n), np.full(pu.sum(), -self.pen_m),
                -np.ones(isL.sum()), -np.ones(isU.sum())]
        extra = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(P * N, P * N))
        J = sp.diags(isE.ravel().astype(float)) @ self._Ablk + extra
        c = np.where(isE, self.rhs - self.pen_n * pl * gL + self.pen_m * pu * gU, 0.0)
        c = np.where(isL, -gL, c)
        c = np.where(isU, gU, c)
        return J.tocsc(), c.ravel()

    def newton(self, V0, tol, max_iter=60):
        V = V0.copy()
        seen = set()
        for it in range(max_iter + 1):
            G, branch, kL, kU, actL, actU = self.evaluate(V, scaled=False)
            defect = self.defect(V)
            if defect <= tol:
                return V, it, defect, True
            if it == max_iter:
                break
            branch = self._break_cycles(branch, kL, kU)
            key = hash((branch.tobytes(), kL.tobytes(), kU.tobytes(), actL.tobytes(), actU.tobytes()))
            if key in seen:
                break
            seen.add(key)
            J, c = self._newton_system(branch, kL, kU, actL, actU)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MatrixRankWarning)
                Vn = spsolve(J, c)
            if not np.all(np.isfinite(Vn)):
                break
            V = Vn.reshape(self.P, self.N)
        return V, it, defect, False

    # nodal projected Gauss-Seidel -----------------------------------------------
    def gauss_seidel(self, V0, tol, max_sweeps, damping=1.0, chunk=10):
        """Nodal sweeps with exact scalar solves; pairs lexicographic, nodes row-major,
        direction reversed on alternate sweeps."""
        V = np.ascontiguousarray(V0, dtype=float).copy()
        A = self.A.tocsr()
        A.sort_indices()
        diag = A.diagonal()
        c = self.closure
        code = {"none": _kernels.NONE, "penalty": _kernels.PENALTY, "hard": _kernels.HARD}
        order = _kernels.MIN_FIRST if c.order == "min_first" else _kernels.MAX_FIRST
        K1, K2 = self.low_src.shape[1], self.up_src.shape[1]
        low_cost = np.ascontiguousarray(self.low_cost.reshape(self.P, K1, self.N))
        up_cost = np.ascontiguousarray(self.up_cost.reshape(self.P, K2, self.N))
        done = 0
        defect = self.defect(V)
        while done < max_sweeps and defect > tol:
            todo = min(chunk, max_sweeps - done)
            _kernels.pgs_sweeps(V, np.ascontiguousarray(self.rhs), A.indptr, A.indices, A.data, diag,
                                np.ascontiguousarray(self.low_src), low_cost,
                                np.ascontiguousarray(self.up_src), up_cost,
                                code[c.lower], code[c.upper], order, self.pen_n, self.pen_m,
                                damping, todo, done % 2 == 1)
            done += todo
            defect = self.defect(V)
            if not np.isfinite(defect):
                break
        return V, done, defect, bool(defect <= tol)

    def solve(self, V0, tol, max_iters, damping=1.0, method="newton"):
        """Returns (V, iterations, defect, used_gauss_seidel)."""
        if method == "newton":
            V, it, defect, ok = self.newton(V0, tol)
            if ok:
                return V, it, defect, False
        else:
            it = 0
        V, sweeps, defect, ok = self.gauss_seidel(V0, tol, max_iters, damping)
        if not ok:
            G = self.evaluate(V)[0]
            p, x = np.unravel_index(int(np.nanargmax(np.abs(G))), G.shape)
            raise SolverError(f"slice fixed point did not converge: defect {defect:.3e} after {sweeps} "
                              f"sweeps, worst at pair index {p}, node {x}", where=(int(p), int(x)))
        return V, it + sweeps, defect, True


# -- building slices from the problem ----------------------------------------------

class _Stepper:
    """Caches operator matrices and cost arrays across slices."""

    def __init__(self, problem: ProblemSpec, grid: Grid, closure: Closure, theta: float, lam: float):
        self.problem, self.grid, self.closure = problem, grid, closure
        self.theta, self.lam = theta, lam
        self.layout = _pair_layout(problem.modes)
        self.method = "newton"
        self._op_cache = {}
        self._cost_cache = {}
        self._grad_cache = {}

    def op(self, t):
        key = t if self.problem.dynamics_time_dependent else None
        if key not in self._op_cache:
            self._op_cache[key] = operator_matrix(self.grid, self.problem, t)
        return self._op_cache[key]

    def grads(self, t):
        key = t if self.problem.dynamics_time_dependent else None
        if key not in self._grad_cache:
            self._grad_cache[key] = gradient_matrices(self.grid, self.problem, t)
        return self._grad_cache[key]

    def costs(self, t):
        key = t if self.problem.costs_time_dependent else None
        if key not in self._cost_cache:
            X = self.grid.points
            GL = self.problem.costs_lower(t, X)
            GU = self.problem.costs_upper(t, X)
            low_src, low_ik, up_src, up_jl = self.layout
            low_cost = GL[low_ik[..., 0], low_ik[..., 1]] if low_src.shape[1] else np.zeros((len(low_src), 0, X.shape[1]))
            up_cost = GU[up_jl[..., 0], up_jl[..., 1]] if up_src.shape[1] else np.zeros((len(up_src), 0, X.shape[1]))
            self._cost_cache[key] = (low_cost, up_cost)
        return self._cost_cache[key]

    def generator_term(self, t, V, scale):
        """dt-free generator values, in transformed variables: scale * f(t, x, V/scale, Z/scale)."""
        problem, grid = self.problem, self.grid
        c1, c2 = problem.modes.count1, problem.modes.count2
        Y = (V / scale).reshape(c1, c2, grid.size)
        Z = None
        if problem.generator_uses_z:
            D = self.grads(t)
            sig = problem.sigma(t, grid.points)                       # (k, d, N)
            grad = np.array([[Dc @ Y[i, j] for Dc in D] for i in range(c1) for j in range(c2)])  # (P, k, N)
            Z = np.einsum("kdn,pkn->pdn", sig, grad).reshape(c1, c2, problem.dim_d, grid.size)
        F = problem.generator(t, grid.points, Y, Z)
        return scale * F.reshape(c1 * c2, grid.size)

    def system(self, n, next_tilde):
        """Slice system at time index n (unknown ~v_t = e^{lam t} v_t) given ~v at n+1."""
        grid = self.grid
        t, t1 = grid.times[n], grid.times[n + 1]
        dt = t1 - t
        scale = math.exp(self.lam * t)
        disc = math.exp(-self.lam * dt)
        Lt = self.op(t)
        A = sp.identity(grid.size, format="csr") - self.theta * dt * Lt
        base = next_tilde
        if self.theta < 1.0:
            base = base + (1.0 - self.theta) * dt * (self.op(t1) @ next_tilde.T).T
        base = disc * base
        low_cost, up_cost = self.costs(t)
        low_src, _, up_src, _ = self.layout
        sys = SliceSystem(A, base.copy(), low_src, scale * low_cost, up_src, scale * up_cost, self.closure, dt)
        return sys, base, dt, scale, t

    def step(self, n, next_tilde, tol, max_iters, damping=1.0, init="next"):
        sys, base, dt, scale, t = self.system(n, next_tilde)
        V = math.exp(-self.lam * dt) * next_tilde.copy() if init == "next" else np.zeros_like(next_tilde)
        total_it, fallback = 0, False
        coupled = self.problem.generator_couples
        for outer in range(max_iters):
            sys.rhs = base + dt * self.generator_term(t, V, scale)
            V_new, it, defect, fb = sys.solve(V, tol, max_iters, damping, self.method)
            total_it += it
            fallback |= fb
            if not np.all(np.isfinite(V_new)):
                raise SolverError(f"non-finite values at t={t:g}", where=(t,))
            change = float(np.max(np.abs(V_new - V)))
            V = V_new
            if not coupled or change <= tol:
                break
        else:
            raise SolverError(f"generator coupling did not settle at t={t:g}")
        if coupled:
            sys.rhs = base + dt * self.generator_term(t, V, scale)
            defect = sys.defect(V)
        return V, total_it, defect, fallback


def _closure_for(cfg: PenalizedConfig):
    if cfg.theta < 1.0 and max(cfg.n, cfg.m) > 0:
        warnings.warn("theta < 1 with penalties: use theta = 1 for large penalties", stacklevel=3)
    return cfg.closure


def step_backward(next_slice, n: int, cfg: PenalizedConfig, problem: ProblemSpec, grid: Grid) -> np.ndarray:
    """One backward step from time index n+1 to n; slices have shape (count1, count2, N)."""
    c1, c2 = problem.modes.count1, problem.modes.count2
    next_slice = np.asarray(next_slice, dtype=float)
    if not np.all(np.isfinite(next_slice)):
        raise SolverError("next slice is not finite")
    stepper = _Stepper(problem, grid, _closure_for(cfg), cfg.theta, cfg.exp_shift_lambda)
    t1 = grid.times[n + 1]
    nt = math.exp(cfg.exp_shift_lambda * t1) * next_slice.reshape(c1 * c2, grid.size)
    V, _, _, _ = stepper.step(n, nt, cfg.fixed_point_tol, cfg.max_inner_iters, cfg.damping, cfg.init)
    return (V / math.exp(cfg.exp_shift_lambda * grid.times[n])).reshape(c1, c2, grid.size)


def _backward_solve(problem, grid, closure, *, theta, lam, tol, max_iters, damping=1.0, init="next",
                    method="newton"):
    t0 = time.perf_counter()
    c1, c2, N = problem.modes.count1, problem.modes.count2, grid.size
    S = len(grid.times)
    data = np.empty((c1, c2, S, N))
    H = problem.terminal(grid.points)
    data[:, :, -1, :] = H
    report = SolveReport()
    report.monotonicity = monotonicity_bound(grid, problem, 0.0, warn=False).as_dict()
    stepper = _Stepper(problem, grid, closure, theta, lam)
    stepper.method = method
    T = grid.times[-1]
    tilde = math.exp(lam * T) * H.reshape(c1 * c2, N)
    for n in range(S - 2, -1, -1):
        try:
            tilde, it, defect, fb = stepper.step(n, tilde, tol, max_iters, damping, init)
        except SolverError as err:
            err.report = report
            err.where = (float(grid.times[n]),)
            raise
        report.iterations.append(it)
        report.residuals.append(defect)
        report.fallbacks += int(fb)
        data[:, :, n, :] = (tilde / math.exp(lam * grid.times[n])).reshape(c1, c2, N)
    report.iterations.reverse()
    report.residuals.reverse()
    report.wall_time = time.perf_counter() - t0
    return ValueField(data, problem.modes, grid, grid.times.copy()), report


def solve_penalized(problem: ProblemSpec, grid: Grid, cfg: PenalizedConfig):
    """Full backward solve; returns (ValueField, SolveReport)."""
    return _backward_solve(problem, grid, _closure_for(cfg), theta=cfg.theta, lam=cfg.exp_shift_lambda,
                           tol=cfg.fixed_point_tol, max_iters=cfg.max_inner_iters,
                           damping=cfg.damping, init=cfg.init)


# -- penalty schedules -------------------------------------------------------------

@dataclass
class Comparison:
    first: tuple
    second: tuple
    direction: str              # 'increasing' (second >= first expected) or 'decreasing'
    violation: float

    def as_dict(self):
        return {"first": list(self.first), "second": list(self.second),
                "direction": self.direction, "violation": self.violation}


@dataclass
class ScheduleResult:
    fields: dict
    reports: dict
    comparisons: list

    @property
    def max_violation(self) -> float:
        return max((c.violation for c in self.comparisons), default=0.0)


def default_schedule(levels: int, kind: str = "doubly") -> list[tuple[float, float]]:
    """Doubling penalties 1, 2, 4, ...: n for upper_only, m for lower_only, both otherwise."""
    vals = [float(2 ** j) for j in range(levels)]
    if kind == "lower_only":
        return [(0.0, v) for v in vals]
    if kind == "upper_only":
        return [(v, 0.0) for v in vals]
    return [(v, v) for v in vals]


def _violation(lower: ValueField, upper: ValueField) -> float:
    return float(np.max(np.maximum(lower.data - upper.data, 0.0)))


def _solve_entry(args):
    problem, grid, cfg = args
    return solve_penalized(problem, grid, cfg)


def run_schedule(problem: ProblemSpec, grid: Grid, base_cfg: PenalizedConfig, schedule, *, workers: int = 1):
    """Solve every (n, m) of the schedule and audit monotonicity between comparable entries.

    Comparable entries share one penalty and differ in the other; they are
    compared with their nearest neighbour in the schedule.  Values must not
    decrease when n grows and must not increase when m grows.
    """
    schedule = [(float(n), float(m)) for n, m in schedule]
    if not schedule:
        raise ValueError("schedule must not be empty")
    uniq = list(dict.fromkeys(schedule))
    jobs = [(problem, grid, replace(base_cfg, n=n, m=m)) for n, m in uniq]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(_solve_entry, jobs))
    else:
        results = [_solve_entry(j) for j in jobs]
    fields = {key: res[0] for key, res in zip(uniq, results)}
    reports = {key: res[1] for key, res in zip(uniq, results)}

    kind = base_cfg.kind
    comparisons = []
    uses_n = kind in ("doubly", "upper_only")
    uses_m = kind in ("doubly", "lower_only")
    if uses_n:
        for m in sorted({m for _, m in uniq}):
            ns = sorted({n for n, mm in uniq if mm == m})
            for a, b in zip(ns[:-1], ns[1:]):
                comparisons.append(Comparison((a, m), (b, m), "increasing",
                                              _violation(fields[(a, m)], fields[(b, m)])))
    if uses_m:
        for n in sorted({n for n, _ in uniq}):
            ms = sorted({m for nn, m in uniq if nn == n})
            for a, b in zip(ms[:-1], ms[1:]):
                comparisons.append(Comparison((n, a), (n, b), "decreasing",
                                              _violation(fields[(n, b)], fields[(n, a)])))
    return ScheduleResult(fields, reports, comparisons)


@dataclass
class StagnationResult:
    field: ValueField
    penalties: list
    changes: list
    converged: bool
    comparisons: list


def run_until_stagnation(problem: ProblemSpec, grid: Grid, base_cfg: PenalizedConfig, *,
                         tol: float = 1e-4, start: float = 1.0, factor: float = 2.0, max_levels: int = 30):
    """Grow the family's penalty geometrically until the max-norm change between
    successive fields drops below ``tol``."""
    kind = base_cfg.kind
    penalties, changes, comparisons = [], [], []
    prev = None
    p = start
    for _ in range(max_levels):
        n = p if kind in ("doubly", "upper_only") else 0.0
        m = p if kind in ("doubly", "lower_only") else 0.0
        cur, _ = solve_penalized(problem, grid, replace(base_cfg, n=n, m=m))
        penalties.append(p)
        if prev is not None:
            changes.append(float(np.max(np.abs(cur.data - prev.data))))
            if kind == "lower_only":
                comparisons.append(_violation(cur, prev))
            elif kind == "upper_only":
                comparisons.append(_violation(prev, cur))
            if changes[-1] < tol:
                return StagnationResult(cur, penalties, changes, True, comparisons)
        prev = cur
        p *= factor
    return StagnationResult(prev, penalties, changes, False, comparisons)
