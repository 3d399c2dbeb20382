"""Lattice backward induction: an independent reference for desk-scale problems.

The state is approximated by a recombining tensor trinomial lattice anchored
at x0.  Per dimension c the spacing is dx_c = sqrt(3 a_cc dt) (or |b_c| dt for
pure drift); branch probabilities are chosen at every node so that the first
two local moments match b dt and a dt exactly:

    p_up, p_down = (a dt + (b dt)^2) / (2 dx^2) +- b dt / (2 dx),  p_mid = 1 - p_up - p_down.

Probabilities outside [0, 1] are refused, never clipped.  Non-constant
coefficients keep the lattice geometry and only change the probabilities.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exprlang import Expression, evaluate
from .model import ProblemSpec, _as_expr, validate_no_free_loop
from .schemes import Closure, SliceSystem, _pair_layout

__all__ = ["OracleError", "TreeModel", "build_tree", "switching_game_value", "dynkin_value",
           "DEFAULT_MAX_NODES"]

DEFAULT_MAX_NODES = 5_000_000
PROB_TOL = 1e-12
FIXED_POINT_TOL = 1e-12


class OracleError(RuntimeError):
    pass


@dataclass
class TreeModel:
    """Lattice levels 0..steps; level n holds points (k, M_n) on offsets [-n, n] per active dimension."""

    problem: ProblemSpec
    x0: np.ndarray
    steps: int
    dt: float
    dx: np.ndarray               # (k,), zero for frozen dimensions
    active: np.ndarray           # (k,) bool
    times: np.ndarray
    moment_error: float = 0.0    # worst local moment mismatch seen at build time

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    def level_shape(self, n: int) -> tuple:
        return tuple(2 * n + 1 if a else 1 for a in self.active)

    def level_points(self, n: int) -> np.ndarray:
        axes = [self.x0[c] + self.dx[c] * np.arange(-n, n + 1) if self.active[c] else self.x0[c:c + 1]
                for c in range(len(self.x0))]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.array([m.ravel() for m in mesh])

    def level_size(self, n: int) -> int:
        return int(np.prod(self.level_shape(n)))

    def transitions(self, n: int):
        """Children indices (M_n, B) into level n+1 and probabilities (M_n, B)."""
        t = self.times[n]
        X = self.level_points(n)
        M = X.shape[1]
        b = self.problem.drift(t, X)
        a = self.problem.diffusion(t, X)
        shape = self.level_shape(n)
        idx = np.array(np.unravel_index(np.arange(M), shape))            # (k, M)
        per_dim = []
        for c in range(len(self.x0)):
            if not self.active[c]:
                per_dim.append(((0,), np.ones((1, M))))
                continue
            mu = b[c] * self.dt
            s2 = a[c, c] * self.dt + mu ** 2
            h = self.dx[c]
            pu = 0.5 * (s2 / h ** 2 + mu / h)
            pd = 0.5 * (s2 / h ** 2 - mu / h)
            pm = 1.0 - s2 / h ** 2
            per_dim.append(((-1, 0, 1), np.array([pd, pm, pu])))
        child_shape = self.level_shape(n + 1)
        children, probs = [], []
        for combo in itertools.product(*[range(len(o)) for o, _ in per_dim]):
            cidx = []
            prob = np.ones(M)
            for c, q in enumerate(combo):
                offs, p = per_dim[c]
                shift = 1 if self.active[c] else 0
                cidx.append(idx[c] + shift + offs[q])
                prob = prob * p[q]
            children.append(np.ravel_multi_index(tuple(cidx), child_shape))
            probs.append(prob)
        return np.array(children).T, np.array(probs).T


def _check_probabilities(tree: TreeModel, n: int, probs: np.ndarray):
    bad = (probs < -PROB_TOL) | (probs > 1.0 + PROB_TOL)
    if np.any(bad):
        raise OracleError(
            f"branch probability {probs[bad][0]:.4g} outside [0, 1] at level {n}; "
            f"the step dt={tree.dt:.4g} is too large for the drift: "
            f"try at least {_suggest_steps(tree)} steps")


def _suggest_steps(tree: TreeModel) -> int:
    """Smallest doubling of steps whose anchor probabilities are valid."""
    steps = tree.steps
    p = tree.problem
    for _ in range(30):
        steps *= 2
        dt = tree.horizon / steps
        b = p.drift(0.0, tree.x0[:, None])[:, 0]
        a = np.diagonal(p.diffusion(0.0, tree.x0[:, None])[:, :, 0])
        ok = True
        for c in range(len(tree.x0)):
            h = _spacing(a[c], b[c], dt)
            if h == 0:
                continue
            mu, s2 = b[c] * dt, a[c] * dt + (b[c] * dt) ** 2
            ok &= s2 <= h * h and abs(mu) * h <= s2 + 1e-15
        if ok:
            return steps
    return steps


def _spacing(a: float, b: float, dt: float) -> float:
    if a > 0:
        return math.sqrt(3.0 * a * dt)
    return abs(b) * dt


def build_tree(problem: ProblemSpec, x0, steps: int, max_nodes: int = DEFAULT_MAX_NODES) -> TreeModel:
    """Lattice for the state dynamics of ``problem`` started at (0, x0)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    k = problem.dim_k
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (k,):
        raise ValueError(f"x0 must have {k} coordinates")
    T = problem.horizon_T
    dt = T / steps if steps else 0.0
    a0 = problem.diffusion(0.0, x0[:, None])[:, :, 0]
    b0 = problem.drift(0.0, x0[:, None])[:, 0]
    dx = np.array([_spacing(a0[c, c], b0[c], dt) for c in range(k)])
    active = dx > 0
    tree = TreeModel(problem, x0, steps, dt, dx, active, np.linspace(0.0, T, steps + 1))
    total = sum(tree.level_size(n) for n in range(steps + 1))
    if total > max_nodes:
        raise OracleError(f"lattice needs {total} nodes, above the cap {max_nodes}")
    worst = 0.0
    for n in range(steps):
        X = tree.level_points(n)
        a = problem.diffusion(tree.times[n], X)
        off = a.copy()
        for c in range(k):
            off[c, c] = 0.0
        if np.any(np.abs(off) > 1e-14):
            raise OracleError("the tensor lattice needs a diagonal covariance sigma sigma^T")
        b = problem.drift(tree.times[n], X)
        frozen = ~active
        if np.any(frozen) and (np.any(np.abs(b[frozen]) > 0) or np.any(a[frozen, frozen] > 0)):
            raise OracleError("a dimension without motion at x0 moves elsewhere; choose another anchor")
        children, probs = tree.transitions(n)
        _check_probabilities(tree, n, probs)
        # local moments, recomputed from the branches
        Xn = tree.level_points(n + 1)
        disp = Xn[:, children] - X[:, :, None]                         # (k, M, B)
        mean = np.einsum("mb,kmb->km", probs, disp)
        second = np.einsum("mb,kmb->km", probs, disp ** 2)
        target2 = np.array([a[c, c] for c in range(k)]) * dt + (b * dt) ** 2
        worst = max(worst, float(np.max(np.abs(mean - b * dt), initial=0.0)),
                    float(np.max(np.abs(second - target2), initial=0.0)))
    tree.moment_error = worst
    return tree


# -- interconnected switching game ------------------------------------------------

def _nodal_projection(C, low_src, low_cost, up_src, up_cost, sweeps):
    """Gauss-Seidel over pairs of v_p = max(L_p, min(U_p, C_p)); pairs lexicographic then reversed."""
    V = C.copy()
    P = V.shape[0]
    for s in range(sweeps):
        change = 0.0
        order = range(P) if s % 2 == 0 else range(P - 1, -1, -1)
        for p in order:
            low = np.max(V[low_src[p]] - low_cost[p], axis=0) if low_src.shape[1] else -np.inf
            up = np.min(V[up_src[p]] + up_cost[p], axis=0) if up_src.shape[1] else np.inf
            new = np.maximum(low, np.minimum(up, C[p]))
            change = max(change, float(np.max(np.abs(new - V[p]))))
            V[p] = new
        if change <= FIXED_POINT_TOL:
            return V, s + 1, True
    return V, sweeps, False


def _projection_defect(V, C, low_src, low_cost, up_src, up_cost):
    low = (np.max(V[low_src] - low_cost, axis=1) if low_src.shape[1] else np.full(V.shape, -np.inf))
    up = (np.min(V[up_src] + up_cost, axis=1) if up_src.shape[1] else np.full(V.shape, np.inf))
    return float(np.max(np.abs(V - np.maximum(low, np.minimum(up, C)))))


def switching_game_value(tree: TreeModel, problem: ProblemSpec | None = None, *, penalty=None,
                         z_mode: str = "zero", check: bool = True, return_levels: bool = False):
    """Root values v^{ij}(0, x0) as an array (count1, count2).

    penalty: None for the projected recursion, or (n, m) for the penalized
    nodal equation v = E[v_next] + dt (f + n (L - v)^+ - m (v - U)^+).
    z_mode: 'zero' or 'regression' (conditional covariance estimate; needs
    constant sigma).
    """
    problem = problem or tree.problem
    if z_mode not in ("zero", "regression"):
        raise ValueError("z_mode must be 'zero' or 'regression'")
    if z_mode == "regression" and not problem.sigma_constant:
        raise OracleError("regression estimate of z needs a constant sigma")
    c1, c2 = problem.modes.count1, problem.modes.count2
    P = c1 * c2
    low_src, low_ik, up_src, up_jl = _pair_layout(problem.modes)
    if check:
        samples = [(t, tree.level_points(n)[:, q]) for n, t in enumerate(tree.times)
                   for q in range(0, tree.level_size(n), max(1, tree.level_size(n) // 5))]
        loops, lp1, lp2 = validate_no_free_loop(problem, samples)
        bad = [c.detail for c in (loops, lp1, lp2) if not c.ok]
        if bad:
            raise OracleError("no-free-loop check failed: " + "; ".join(bad))

    V = problem.terminal(tree.level_points(tree.steps)).reshape(P, -1)
    levels = [V] if return_levels else None
    sweeps_cap = max(P * P, 4)
    couples = problem.generator_couples
    for n in range(tree.steps - 1, -1, -1):
        t = tree.times[n]
        X = tree.level_points(n)
        M = X.shape[1]
        children, probs = tree.transitions(n)
        EV = np.einsum("mb,pmb->pm", probs, V[:, children])
        Z = None
        if problem.generator_uses_z and z_mode == "regression":
            Xn = tree.level_points(n + 1)
            disp = Xn[:, children] - X[:, :, None]
            mean = np.einsum("mb,kmb->km", probs, disp)
            cov = np.einsum("mb,pmb,kmb->pkm", probs, V[:, children], disp - mean[:, :, None])
            a = problem.diffusion(t, X)
            grad = np.stack([cov[:, c] / (a[c, c] * tree.dt) if tree.active[c] else np.zeros_like(cov[:, c])
                             for c in range(problem.dim_k)], axis=1)                  # (P, k, M)
            Z = np.einsum("kdm,pkm->pdm", problem.sigma(t, X), grad).reshape(c1, c2, problem.dim_d, M)
        GL, GU = problem.costs_lower(t, X), problem.costs_upper(t, X)
        low_cost = GL[low_ik[..., 0], low_ik[..., 1]] if low_src.shape[1] else np.zeros((P, 0, M))
        up_cost = GU[up_jl[..., 0], up_jl[..., 1]] if up_src.shape[1] else np.zeros((P, 0, M))

        cur = EV.copy()
        for outer in range(200 if couples else 1):
            F = problem.generator(t, X, cur.reshape(c1, c2, M), Z).reshape(P, M)
            C = EV + tree.dt * F
            if penalty is None:
                new, used, ok = _nodal_projection(C, low_src, low_cost, up_src, up_cost, sweeps_cap)
                if not ok:
                    raise OracleError(f"nodal fixed point did not settle in {sweeps_cap} sweeps at t={t:g}; "
                                      "the no-free-loop property is probably nearly violated")
            else:
                pn, pm = penalty
                system = SliceSystem(sp.identity(M, format="csr"), C, low_src, low_cost, up_src, up_cost,
                                     Closure("penalty", "penalty", pn, pm), tree.dt)
                # tolerance in residual units for a value accuracy of FIXED_POINT_TOL
                tol = FIXED_POINT_TOL * (1.0 + tree.dt * max(pn, pm)) / tree.dt
                new, _, _, _ = system.solve(cur, tol, 10_000)
            change = float(np.max(np.abs(new - cur)))
            cur = new
            if not couples or change <= FIXED_POINT_TOL:
                break
        else:
            raise OracleError(f"generator coupling did not settle at t={t:g}")
        if penalty is None:
            F = problem.generator(t, X, cur.reshape(c1, c2, M), Z).reshape(P, M)
            defect = _projection_defect(cur, EV + tree.dt * F, low_src, low_cost, up_src, up_cost)
            if defect > 1e-10 * max(1.0, float(np.max(np.abs(cur)))):
                raise OracleError(f"nodal fixed-point defect {defect:.3e} at t={t:g}")
        V = cur
        if return_levels:
            levels.append(V)
    root = V[:, 0].reshape(c1, c2)
    if return_levels:
        return root, levels[::-1]
    return root


# -- two-obstacle Dynkin game -----------------------------------------------------

def _eval_tx(expr, t, X, k):
    env = {"t": t, **{f"x{c + 1}": X[c] for c in range(k)}}
    return np.broadcast_to(np.asarray(evaluate(expr, env), dtype=float), (X.shape[1],)).copy()


def dynkin_value(tree: TreeModel, lower, upper, running, terminal) -> float:
    """Root value of v = max(L, min(U, E[v_next] + g dt)) with v(T) = xi."""
    lower, upper, running, terminal = (_as_expr(e) for e in (lower, upper, running, terminal))
    k = tree.problem.dim_k
    XT = tree.level_points(tree.steps)
    T = tree.horizon if tree.steps else tree.problem.horizon_T
    V = _eval_tx(terminal, T, XT, k)
    if np.any(_eval_tx(lower, T, XT, k) > V + 1e-12):
        raise OracleError("lower obstacle exceeds the terminal payoff at T")
    for n in range(tree.steps - 1, -1, -1):
        t = tree.times[n]
        X = tree.level_points(n)
        L, U = _eval_tx(lower, t, X, k), _eval_tx(upper, t, X, k)
        if np.any(L > U):
            q = int(np.argmax(L - U))
            raise OracleError(f"lower obstacle above upper obstacle at t={t:g}, x={X[:, q].tolist()}")
        children, probs = tree.transitions(n)
        cont = np.einsum("mb,mb->m", probs, V[children]) + tree.dt * _eval_tx(running, t, X, k)
        V = np.maximum(L, np.minimum(U, cont))
    return float(V[0])
