"""Problem data for two-player switching games and the standing-assumption checks.

Mode indices are 1-based pairs ``(i, j)``; arrays indexed by modes use the
0-based position ``[i - 1, j - 1]``.  Flattened pair order is lexicographic,
``p = (i - 1) * count2 + (j - 1)``.
"""
from __future__ import annotations

import itertools
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exprlang import Expression, Num, evaluate, free_vars, parse

__all__ = [
    "ModeSpace", "ProblemSpec", "ValidationReport", "CheckResult",
    "obstacle_lower", "obstacle_upper", "penalized_generator",
    "validate_terminal", "validate_no_free_loop", "validate_costs_nonneg",
    "validate", "enumerate_loops", "simple_cycles", "PENALTY_KINDS",
]

PENALTY_KINDS = ("doubly", "lower_only", "upper_only")
ZERO_TOL = 1e-12

_X_RE = re.compile(r"^x([1-9][0-9]*)$")
_Z_RE = re.compile(r"^z([1-9][0-9]*)$")
_Y_RE = re.compile(r"^y_([1-9][0-9]*)_([1-9][0-9]*)$")


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSpace:
    count1: int
    count2: int

    def __post_init__(self):
        if self.count1 < 1 or self.count2 < 1:
            raise ProblemError("each player needs at least one mode")

    @property
    def size(self) -> int:
        return self.count1 * self.count2

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(1, self.count1 + 1) for j in range(1, self.count2 + 1)]

    def flat(self, i: int, j: int) -> int:
        return (i - 1) * self.count2 + (j - 1)


def _as_expr(e) -> Expression:
    if isinstance(e, Expression):
        return e
    if isinstance(e, (int, float)):
        return Expression(Num(float(e)), repr(float(e)))
    return parse(str(e))


def _check_vars(expr: Expression, what: str, k: int, *, time=True, space=True,
                modes: ModeSpace | None = None, d: int = 0):
    for name in free_vars(expr):
        if name == "t" and time:
            continue
        m = _X_RE.match(name)
        if m and space and int(m.group(1)) <= k:
            continue
        m = _Y_RE.match(name)
        if m and modes is not None and int(m.group(1)) <= modes.count1 and int(m.group(2)) <= modes.count2:
            continue
        m = _Z_RE.match(name)
        if m and modes is not None and int(m.group(1)) <= d:
            continue
        raise ProblemError(f"{what}: variable {name!r} is not allowed here")


@dataclass(frozen=True)
class ProblemSpec:
    """Complete game data.

    ``cost_lower_g[i-1][k-1]`` is the cost for player 1 switching i -> k and
    ``cost_upper_g[j-1][l-1]`` the cost for player 2 switching j -> l.
    Diagonal costs must be the literal zero.
    """

    dim_k: int
    dim_d: int
    horizon_T: float
    modes: ModeSpace
    drift_b: tuple
    vol_sigma: tuple
    gen_f: Mapping[tuple[int, int], Expression]
    cost_lower_g: tuple
    cost_upper_g: tuple
    terminal_h: Mapping[tuple[int, int], Expression]
    name: str = "problem"

    def __post_init__(self):
        k, d, modes = self.dim_k, self.dim_d, self.modes
        if k < 1 or d < 1:
            raise ProblemError("state and noise dimensions must be >= 1")
        if not self.horizon_T > 0:
            raise ProblemError("horizon T must be positive")
        conv = lambda seq: tuple(_as_expr(e) for e in seq)
        object.__setattr__(self, "drift_b", conv(self.drift_b))
        object.__setattr__(self, "vol_sigma", tuple(conv(row) for row in self.vol_sigma))
        object.__setattr__(self, "cost_lower_g", tuple(conv(row) for row in self.cost_lower_g))
        object.__setattr__(self, "cost_upper_g", tuple(conv(row) for row in self.cost_upper_g))
        object.__setattr__(self, "gen_f", {tuple(p): _as_expr(e) for p, e in self.gen_f.items()})
        object.__setattr__(self, "terminal_h", {tuple(p): _as_expr(e) for p, e in self.terminal_h.items()})

        if len(self.drift_b) != k:
            raise ProblemError(f"drift needs {k} components")
        if len(self.vol_sigma) != k or any(len(row) != d for row in self.vol_sigma):
            raise ProblemError(f"sigma must be {k}x{d}")
        for e in self.drift_b:
            _check_vars(e, "drift", k)
        for row in self.vol_sigma:
            for e in row:
                _check_vars(e, "sigma", k)
        for name, costs, count in (("g_lower", self.cost_lower_g, modes.count1),
                                   ("g_upper", self.cost_upper_g, modes.count2)):
            if len(costs) != count or any(len(row) != count for row in costs):
                raise ProblemError(f"{name} must be a {count}x{count} matrix")
            for a in range(count):
                for b in range(count):
                    _check_vars(costs[a][b], f"{name}_{a + 1}_{b + 1}", k)
                    if a == b and (free_vars(costs[a][b]) or evaluate(costs[a][b], {}) != 0.0):
                        raise ProblemError(f"{name}_{a + 1}_{a + 1} must be identically zero")
        for p in modes.pairs:
            if p not in self.gen_f:
                raise ProblemError(f"missing generator f_{p[0]}_{p[1]}")
            if p not in self.terminal_h:
                raise ProblemError(f"missing terminal h_{p[0]}_{p[1]}")
            _check_vars(self.gen_f[p], f"f_{p[0]}_{p[1]}", k, modes=modes, d=d)
            _check_vars(self.terminal_h[p], f"h_{p[0]}_{p[1]}", k, time=False)
        extra = set(self.gen_f) - set(modes.pairs) | set(self.terminal_h) - set(modes.pairs)
        if extra:
            raise ProblemError(f"entries for unknown mode pairs: {sorted(extra)}")

    # -- vectorised evaluation; X has shape (k, N) -------------------------

    def _env(self, t, X):
        X = np.asarray(X, dtype=float)
        env = {"t": t}
        for c in range(self.dim_k):
            env[f"x{c + 1}"] = X[c]
        return env

    @staticmethod
    def _full(value, n):
        return np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()

    def _npts(self, X):
        X = np.asarray(X, dtype=float)
        return X.shape[1] if X.ndim == 2 else 1

    def drift(self, t, X) -> np.ndarray:
        env, n = self._env(t, X), self._npts(X)
        return np.array([self._full(evaluate(e, env), n) for e in self.drift_b])

    def sigma(self, t, X) -> np.ndarray:
        env, n = self._env(t, X), self._npts(X)
        return np.array([[self._full(evaluate(e, env), n) for e in row] for row in self.vol_sigma])

    def diffusion(self, t, X) -> np.ndarray:
        """sigma sigma^T, shape (k, k, N)."""
        s = self.sigma(t, X)
        return np.einsum("acn,bcn->abn", s, s)

    def costs_lower(self, t, X) -> np.ndarray:
        env, n = self._env(t, X), self._npts(X)
        return np.array([[self._full(evaluate(e, env), n) for e in row] for row in self.cost_lower_g])

    def costs_upper(self, t, X) -> np.ndarray:
        env, n = self._env(t, X), self._npts(X)
        return np.array([[self._full(evaluate(e, env), n) for e in row] for row in self.cost_upper_g])

    def terminal(self, X) -> np.ndarray:
        """h^{ij}(x) as an array (count1, count2, N)."""
        env, n = self._env(self.horizon_T, X), self._npts(X)
        out = np.empty((self.modes.count1, self.modes.count2, n))
        for (i, j), e in self.terminal_h.items():
            out[i - 1, j - 1] = self._full(evaluate(e, env), n)
        return out

    def generator(self, t, X, Y, Z=None) -> np.ndarray:
        """f^{ij}(t, x, y, z^{ij}); Y is (c1, c2, N), Z is (c1, c2, d, N) or None (z = 0)."""
        env, n = self._env(t, X), self._npts(X)
        Y = np.asarray(Y, dtype=float).reshape(self.modes.count1, self.modes.count2, n)
        for i, j in self.modes.pairs:
            env[f"y_{i}_{j}"] = Y[i - 1, j - 1]
        out = np.empty((self.modes.count1, self.modes.count2, n))
        for (i, j), e in self.gen_f.items():
            for c in range(self.dim_d):
                env[f"z{c + 1}"] = 0.0 if Z is None else np.asarray(Z)[i - 1, j - 1, c]
            out[i - 1, j - 1] = self._full(evaluate(e, env), n)
        return out

    # -- structural flags -----------------------------------------------------

    @property
    def generator_couples(self) -> bool:
        """True when some f^{ij} reads the solution or its gradient."""
        return any(n.startswith(("y_", "z")) for e in self.gen_f.values() for n in free_vars(e))

    @property
    def generator_uses_z(self) -> bool:
        return any(n.startswith("z") for e in self.gen_f.values() for n in free_vars(e))

    @property
    def dynamics_time_dependent(self) -> bool:
        exprs = list(self.drift_b) + [e for row in self.vol_sigma for e in row]
        return any("t" in free_vars(e) for e in exprs)

    @property
    def costs_time_dependent(self) -> bool:
        exprs = [e for row in self.cost_lower_g + self.cost_upper_g for e in row]
        return any("t" in free_vars(e) for e in exprs)

    @property
    def sigma_constant(self) -> bool:
        return all(not free_vars(e) for row in self.vol_sigma for e in row)

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace
        return replace(self, **changes)


# -- obstacle operators and generators ---------------------------------------

def _point(x, k):
    return np.asarray(x, dtype=float).reshape(k, 1)


def obstacle_lower(problem: ProblemSpec, values, i: int, j: int, t: float, x) -> tuple[float, int | None]:
    """max over k != i of (v^{kj} - g_lower_{ik}(t, x)); returns (value, argmax k).

    With a single mode for player 1 the value is -inf and the index None.
    Ties resolve to the smallest k.
    """
    values = np.asarray(values, dtype=float)
    if problem.modes.count1 == 1:
        return -math.inf, None
    env = problem._env(t, _point(x, problem.dim_k))
    best, arg = -math.inf, None
    for k in range(1, problem.modes.count1 + 1):
        if k == i:
            continue
        cand = float(values[k - 1, j - 1]) - float(evaluate(problem.cost_lower_g[i - 1][k - 1], env))
        if arg is None or cand > best:
            best, arg = cand, k
    return best, arg


def obstacle_upper(problem: ProblemSpec, values, i: int, j: int, t: float, x) -> tuple[float, int | None]:
    """min over l != j of (v^{il} + g_upper_{jl}(t, x)); returns (value, argmin l)."""
    values = np.asarray(values, dtype=float)
    if problem.modes.count2 == 1:
        return math.inf, None
    env = problem._env(t, _point(x, problem.dim_k))
    best, arg = math.inf, None
    for l in range(1, problem.modes.count2 + 1):
        if l == j:
            continue
        cand = float(values[i - 1, l - 1]) + float(evaluate(problem.cost_upper_g[j - 1][l - 1], env))
        if arg is None or cand < best:
            best, arg = cand, l
    return best, arg


def penalized_generator(problem: ProblemSpec, kind: str, n: float, m: float, i: int, j: int,
                        t: float, x, ybar, z=None) -> float:
    """f^{ij} plus the penalty terms selected by ``kind``.

    doubly:     f + n (y - L)^- - m (y - U)^+
    lower_only: f - m (y - U)^+     (n ignored)
    upper_only: f + n (y - L)^-     (m ignored)
    """
    if kind not in PENALTY_KINDS:
        raise ValueError(f"unknown penalty kind {kind!r}")
    if n < 0 or m < 0:
        raise ValueError("penalties must be non-negative")
    ybar = np.asarray(ybar, dtype=float)
    c1, c2 = problem.modes.count1, problem.modes.count2
    Y = ybar.reshape(c1, c2, 1)
    Z = None
    if z is not None:
        Z = np.broadcast_to(np.asarray(z, dtype=float).reshape(1, 1, problem.dim_d, 1),
                            (c1, c2, problem.dim_d, 1))
    value = float(problem.generator(t, _point(x, problem.dim_k), Y, Z)[i - 1, j - 1, 0])
    y = float(ybar.reshape(c1, c2)[i - 1, j - 1])
    if kind in ("doubly", "upper_only") and n > 0:
        low, _ = obstacle_lower(problem, ybar.reshape(c1, c2), i, j, t, x)
        value += n * max(low - y, 0.0)
    if kind in ("doubly", "lower_only") and m > 0:
        up, _ = obstacle_upper(problem, ybar.reshape(c1, c2), i, j, t, x)
        value -= m * max(y - up, 0.0)
    return value


# -- assumption validation ------------------------------------------------------

@dataclass
class CheckResult:
    ok: bool
    worst: float = 0.0
    witness: object = None
    point: object = None
    detail: str = ""

    def as_dict(self):
        return {"ok": bool(self.ok), "worst": float(self.worst), "witness": _jsonable(self.witness),
                "point": _jsonable(self.point), "detail": self.detail}


def _jsonable(obj):
    if obj is None:
        return None
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


@dataclass
class ValidationReport:
    terminal: CheckResult
    no_free_loop: CheckResult
    cycle_lp1: CheckResult
    cycle_lp2: CheckResult
    cost_nonneg: CheckResult
    warnings: list = field(default_factory=list)
    lipschitz: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in (self.terminal, self.no_free_loop, self.cycle_lp1,
                                  self.cycle_lp2, self.cost_nonneg))

    @property
    def no_free_loop_ok(self) -> bool:
        return self.no_free_loop.ok and self.cycle_lp1.ok and self.cycle_lp2.ok and self.cost_nonneg.ok

    def failures(self) -> list[str]:
        out = []
        for name in ("terminal", "no_free_loop", "cycle_lp1", "cycle_lp2", "cost_nonneg"):
            c = getattr(self, name)
            if not c.ok:
                out.append(f"{name}: {c.detail}")
        return out

    def as_dict(self):
        return {"ok": self.ok,
                **{name: getattr(self, name).as_dict()
                   for name in ("terminal", "no_free_loop", "cycle_lp1", "cycle_lp2", "cost_nonneg")},
                "warnings": list(self.warnings), "lipschitz": dict(self.lipschitz)}


def _points_array(problem, points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, problem.dim_k) if problem.dim_k > 1 else X.reshape(-1, 1)
    if X.shape[-1] != problem.dim_k:
        raise ValueError(f"sample points must have {problem.dim_k} coordinates")
    return X.T.copy()          # (k, S)


def _time_points(problem, samples):
    """Split a list of (t, x) samples into times (S,) and points (k, S)."""
    ts, xs = [], []
    for t, x in samples:
        ts.append(float(t))
        xs.append(np.atleast_1d(np.asarray(x, dtype=float)))
    if not ts:
        raise ValueError("need at least one sample point")
    return np.array(ts), np.array(xs).T.reshape(problem.dim_k, -1)


def validate_terminal(problem: ProblemSpec, sample_points) -> CheckResult:
    """Check max_k (h^{kj} - g_lower_{ik}(T,x)) <= h^{ij} <= min_l (h^{il} + g_upper_{jl}(T,x))."""
    X = _points_array(problem, sample_points)
    if X.shape[1] == 0:
        raise ValueError("need at least one sample point")
    H = problem.terminal(X)
    GL = problem.costs_lower(problem.horizon_T, X)
    GU = problem.costs_upper(problem.horizon_T, X)
    worst, witness = -math.inf, None
    for i, j in problem.modes.pairs:
        h = H[i - 1, j - 1]
        for k in range(1, problem.modes.count1 + 1):
            if k != i:
                gap = H[k - 1, j - 1] - GL[i - 1, k - 1] - h
                s = int(np.argmax(gap))
                if gap[s] > worst:
                    worst, witness = float(gap[s]), ((i, j), "lower", k, X[:, s].copy())
        for l in range(1, problem.modes.count2 + 1):
            if l != j:
                gap = h - H[i - 1, l - 1] - GU[j - 1, l - 1]
                s = int(np.argmax(gap))
                if gap[s] > worst:
                    worst, witness = float(gap[s]), ((i, j), "upper", l, X[:, s].copy())
    if witness is None:          # a single mode pair: nothing to check
        return CheckResult(True, 0.0, detail="single mode pair")
    ok = worst <= ZERO_TOL
    pair, side, other, x = witness
    detail = (f"pair {pair}: {side} terminal bound via mode {other} violated by {worst:.3e} at x={x.tolist()}"
              if not ok else "")
    return CheckResult(ok, worst, (pair, side, other) if not ok else None, x if not ok else None, detail)


def _rook_neighbours(pair, modes):
    i, j = pair
    for k in range(1, modes.count1 + 1):
        if k != i:
            yield (k, j)
    for l in range(1, modes.count2 + 1):
        if l != j:
            yield (i, l)


def enumerate_loops(modes: ModeSpace, limit: int = 500_000) -> list[list[tuple[int, int]]]:
    """All loops in Gamma1 x Gamma2 with distinct interior pairs, one switch per step.

    Each loop is listed once per direction, starting (and ending) at its
    lexicographically smallest pair.  Loops involving both players come first,
    in depth-first order with player-1 switches explored before player-2 ones.
    """
    pairs = modes.pairs
    order = {p: n for n, p in enumerate(pairs)}
    loops: list[list[tuple[int, int]]] = []

    def dfs(path, seen):
        if len(loops) > limit:
            raise RuntimeError("loop enumeration exceeds limit; reduce the number of modes")
        start = path[0]
        for nb in _rook_neighbours(path[-1], modes):
            if nb == start and len(path) >= 2:
                loops.append(path + [start])
            elif nb not in seen and order[nb] > order[start]:
                seen.add(nb)
                path.append(nb)
                dfs(path, seen)
                path.pop()
                seen.discard(nb)

    for p in pairs:
        dfs([p], {p})
    mixed = [lp for lp in loops if len({a for a, _ in lp}) > 1 and len({b for _, b in lp}) > 1]
    single = [lp for lp in loops if not (len({a for a, _ in lp}) > 1 and len({b for _, b in lp}) > 1)]
    return mixed + single


def simple_cycles(count: int) -> list[list[int]]:
    """Simple cycles (length >= 2) of the complete directed graph on 1..count."""
    out = []
    for size in range(2, count + 1):
        for combo in itertools.combinations(range(1, count + 1), size):
            first, rest = combo[0], combo[1:]
            for perm in itertools.permutations(rest):
                out.append([first, *perm, first])
    return out


def _loop_sum(loop, GL, GU):
    total = 0.0
    for (i, j), (k, l) in zip(loop[:-1], loop[1:]):
        if i != k:
            total = total - GL[i - 1, k - 1]
        if j != l:
            total = total + GU[j - 1, l - 1]
    return total


def _sampled_costs(problem, ts, X):
    """Cost matrices at every sample, shapes (c1, c1, S) and (c2, c2, S)."""
    S = ts.size
    GL = np.empty((problem.modes.count1, problem.modes.count1, S))
    GU = np.empty((problem.modes.count2, problem.modes.count2, S))
    for t in np.unique(ts):
        sel = ts == t
        GL[:, :, sel] = problem.costs_lower(t, X[:, sel])
        GU[:, :, sel] = problem.costs_upper(t, X[:, sel])
    return GL, GU


def validate_no_free_loop(problem: ProblemSpec, sample_points) -> tuple[CheckResult, CheckResult, CheckResult]:
    """No-free-loop check on sampled (t, x) points.

    Returns (mixed-loop check, player-1 cycle check, player-2 cycle check).
    The loop sum uses phi = -g_lower (player-1 switch) + g_upper (player-2
    switch); the opposite sign convention is checked as well.
    """
    ts, X = _time_points(problem, sample_points)
    GL, GU = _sampled_costs(problem, ts, X)

    loop_check = CheckResult(True, math.inf)
    for loop in enumerate_loops(problem.modes):
        total = _loop_sum(loop, GL, GU)
        for sign in (1.0, -1.0):
            mag = np.abs(sign * total)
            s = int(np.argmin(mag))
            if mag[s] < loop_check.worst:
                loop_check.worst = float(mag[s])
            if mag[s] <= ZERO_TOL and loop_check.ok:
                loop_check.ok = False
                loop_check.witness = loop
                loop_check.point = (float(ts[s]), X[:, s].tolist())
                path = " -> ".join(f"({a},{b})" for a, b in loop)
                loop_check.detail = f"zero-cost loop {path} at t={ts[s]:g}, x={X[:, s].tolist()}"
    if loop_check.worst == math.inf:
        loop_check.worst = 0.0

    def cycle_check(count, G, label):
        res = CheckResult(True, math.inf)
        for cyc in simple_cycles(count):
            total = sum(G[a - 1, b - 1] for a, b in zip(cyc[:-1], cyc[1:]))
            s = int(np.argmin(total))
            res.worst = min(res.worst, float(total[s]))
            if total[s] <= 0 and res.ok:
                res.ok = False
                res.witness = cyc
                res.point = (float(ts[s]), X[:, s].tolist())
                res.detail = (f"{label} cycle {' -> '.join(map(str, cyc))} has cost sum "
                              f"{total[s]:.3e} <= 0 at t={ts[s]:g}, x={X[:, s].tolist()}")
        if res.worst == math.inf:
            res.worst = 0.0
        return res

    return (loop_check, cycle_check(problem.modes.count1, GL, "player-1"),
            cycle_check(problem.modes.count2, GU, "player-2"))


def validate_costs_nonneg(problem: ProblemSpec, sample_points) -> CheckResult:
    ts, X = _time_points(problem, sample_points)
    res = CheckResult(True, 0.0)
    for label, G in zip(("g_lower", "g_upper"), _sampled_costs(problem, ts, X)):
        a, b, s = np.unravel_index(np.argmin(G), G.shape)
        if G[a, b, s] < res.worst:
            res.worst = float(G[a, b, s])
        if G[a, b, s] < 0 and res.ok:
            res.ok = False
            res.witness = f"{label}_{a + 1}_{b + 1}"
            res.point = (float(ts[s]), X[:, s].tolist())
            res.detail = f"{label}_{a + 1}_{b + 1} = {G[a, b, s]:.3e} < 0 at t={ts[s]:g}, x={X[:, s].tolist()}"
    return res


def _lipschitz_estimates(problem: ProblemSpec, ts, X, h=1e-6):
    """Finite-difference slope of (b, sigma) in x over the samples."""
    est = {"b_sigma_x": 0.0}
    k = problem.dim_k
    for s in range(ts.size):
        x = X[:, s:s + 1]
        base = np.concatenate([problem.drift(ts[s], x).ravel(), problem.sigma(ts[s], x).ravel()])
        for c in range(k):
            xp = x.copy()
            xp[c] += h
            bumped = np.concatenate([problem.drift(ts[s], xp).ravel(), problem.sigma(ts[s], xp).ravel()])
            est["b_sigma_x"] = max(est["b_sigma_x"], float(np.max(np.abs(bumped - base)) / h))
    return est


def _monotonicity_warnings(problem: ProblemSpec, ts, X, rng_seed=0, h=1e-3):
    """Sampled check that f^{ij} is non-decreasing in y^{kl}, (k,l) != (i,j)."""
    out = []
    if not any(n.startswith("y_") for e in problem.gen_f.values() for n in free_vars(e)):
        return out
    rng = np.random.default_rng(rng_seed)
    c1, c2 = problem.modes.count1, problem.modes.count2
    for s in range(min(ts.size, 20)):
        x = X[:, s:s + 1]
        Y = rng.normal(size=(c1, c2, 1))
        base = problem.generator(ts[s], x, Y)
        for k, l in problem.modes.pairs:
            Yp = Y.copy()
            Yp[k - 1, l - 1] += h
            diff = problem.generator(ts[s], x, Yp) - base
            diff[k - 1, l - 1] = 0.0
            if np.min(diff) < -1e-12:
                i, j = np.unravel_index(np.argmin(diff[:, :, 0]), (c1, c2))
                out.append(f"f_{i + 1}_{j + 1} decreases in y_{k}_{l} near t={ts[s]:g}, x={x.ravel().tolist()}")
                return out
    return out


def validate(problem: ProblemSpec, space_points, times=None) -> ValidationReport:
    """Run every sampled assumption check; space_points is an (S, k) array-like."""
    X = _points_array(problem, space_points)
    if times is None:
        times = np.linspace(0.0, problem.horizon_T, 5)
    samples = [(t, X[:, s]) for t in times for s in range(X.shape[1])]
    loops, lp1, lp2 = validate_no_free_loop(problem, samples)
    report = ValidationReport(
        terminal=validate_terminal(problem, X.T),
        no_free_loop=loops, cycle_lp1=lp1, cycle_lp2=lp2,
        cost_nonneg=validate_costs_nonneg(problem, samples),
    )
    ts, Xs = _time_points(problem, samples[:: max(1, len(samples) // 50)])
    report.lipschitz = _lipschitz_estimates(problem, ts, Xs)
    if not math.isfinite(report.lipschitz["b_sigma_x"]) or report.lipschitz["b_sigma_x"] > 1e6:
        report.warnings.append("coefficients b, sigma look non-Lipschitz on the sampled points")
    report.warnings.extend(_monotonicity_warnings(problem, ts, Xs))
    for w in report.warnings:
        warnings.warn(w, stacklevel=2)
    return report
