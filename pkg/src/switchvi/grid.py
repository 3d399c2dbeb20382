"""Truncated tensor-product space-time grid and the discrete operator

    L phi = b . D phi + 1/2 Tr(sigma sigma^T D^2 phi)

Second derivatives use central differences, first derivatives are upwinded on
the sign of b, mixed derivatives use the 4-point stencil.  Nodes are stored
row-major (C order, the last coordinate varies fastest).  Off-box neighbours
are ghost nodes closed by linear extrapolation (``extrapolate``) or by copying
the boundary value (``clamp``).
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import ModeSpace, ProblemSpec

__all__ = ["GridSpec", "Grid", "ValueField", "GridError", "build_grid", "operator_matrix",
           "gradient_matrices", "discrete_generator", "interpolate", "monotonicity_bound"]

BOUNDARIES = ("extrapolate", "clamp")
DEFAULT_MAX_NODES = 50_000_000


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    box_lo: tuple
    box_hi: tuple
    nodes_per_dim: tuple
    time_steps: int
    boundary: str = "extrapolate"

    def __post_init__(self):
        object.__setattr__(self, "box_lo", tuple(float(v) for v in np.atleast_1d(self.box_lo)))
        object.__setattr__(self, "box_hi", tuple(float(v) for v in np.atleast_1d(self.box_hi)))
        object.__setattr__(self, "nodes_per_dim", tuple(int(v) for v in np.atleast_1d(self.nodes_per_dim)))
        if not (len(self.box_lo) == len(self.box_hi) == len(self.nodes_per_dim)):
            raise GridError("box_lo, box_hi and nodes_per_dim must have the same length")
        if any(lo >= hi for lo, hi in zip(self.box_lo, self.box_hi)):
            raise GridError("degenerate box: need box_lo < box_hi in every coordinate")
        if any(n < 3 for n in self.nodes_per_dim):
            raise GridError("need at least 3 nodes per dimension for central differences")
        if self.time_steps < 0:
            raise GridError("time_steps must be >= 0")
        if self.boundary not in BOUNDARIES:
            raise GridError(f"boundary must be one of {BOUNDARIES}")


@dataclass
class Grid:
    spec: GridSpec
    horizon_T: float
    axes: list                     # per-dimension node coordinates
    spacing: np.ndarray            # (k,)
    shape: tuple
    points: np.ndarray             # (k, N), row-major
    times: np.ndarray              # (time_steps + 1,)

    @property
    def k(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def dt(self) -> float:
        steps = self.spec.time_steps
        return self.horizon_T / steps if steps else 0.0

    def multi_index(self) -> np.ndarray:
        """(N, k) integer node indices."""
        return np.array(np.unravel_index(np.arange(self.size), self.shape)).T

    def boundary_mask(self) -> np.ndarray:
        idx = self.multi_index()
        return np.any((idx == 0) | (idx == np.array(self.shape) - 1), axis=1)

    def inner_mask(self, margin: float = 0.0) -> np.ndarray:
        """Nodes at distance >= margin from the box faces (and never on a face)."""
        lo = np.array(self.spec.box_lo)[:, None] + margin
        hi = np.array(self.spec.box_hi)[:, None] - margin
        inside = np.all((self.points >= lo - 1e-12) & (self.points <= hi + 1e-12), axis=0)
        return inside & ~self.boundary_mask()

    def node_of(self, x) -> int:
        """Index of the node at ``x`` (must lie on the grid)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for c, axis in enumerate(self.axes):
            pos = (x[c] - axis[0]) / self.spacing[c]
            r = int(round(pos))
            if abs(pos - r) > 1e-9 or not 0 <= r < len(axis):
                raise GridError(f"{x.tolist()} is not a grid node")
            idx.append(r)
        return int(np.ravel_multi_index(tuple(idx), self.shape))


def _max_nodes() -> int:
    raw = os.environ.get("SWITCHVI_MAX_NODES")
    return int(float(raw)) if raw else DEFAULT_MAX_NODES


def build_grid(spec: GridSpec, problem: ProblemSpec) -> Grid:
    if len(spec.nodes_per_dim) != problem.dim_k:
        raise GridError(f"grid has {len(spec.nodes_per_dim)} dimensions, problem has {problem.dim_k}")
    axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(spec.box_lo, spec.box_hi, spec.nodes_per_dim)]
    shape = tuple(spec.nodes_per_dim)
    size = int(np.prod(shape))
    stored = size * (spec.time_steps + 1) * problem.modes.size
    cap = _max_nodes()
    if stored > cap:
        raise GridError(f"value history needs {stored} entries, above the cap {cap} (SWITCHVI_MAX_NODES)")
    spacing = np.array([(hi - lo) / (n - 1) for lo, hi, n in zip(spec.box_lo, spec.box_hi, shape)])
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.array([m.ravel() for m in mesh])
    times = np.linspace(0.0, problem.horizon_T, spec.time_steps + 1)
    return Grid(spec, float(problem.horizon_T), axes, spacing, shape, points, times)


def _resolve(grid: Grid, idx: np.ndarray, coef: np.ndarray):
    """Map possibly off-box multi-indices to (flat node, coefficient) terms."""
    terms = [(idx.copy(), coef.copy())]
    linear = grid.spec.boundary == "extrapolate"
    for c, n in enumerate(grid.shape):
        new_terms = []
        for ix, cf in terms:
            low, high = ix[:, c] < 0, ix[:, c] > n - 1
            out = low | high
            if not out.any():
                new_terms.append((ix, cf))
                continue
            a = ix.copy()
            a[low, c], a[high, c] = 0, n - 1
            if linear:
                # ghost = 2 * edge - next-to-edge
                new_terms.append((a, np.where(out, 2.0 * cf, cf)))
                b = ix.copy()
                b[low, c], b[high, c] = 1, n - 2
                new_terms.append((b, np.where(out, -cf, 0.0)))
            else:
                new_terms.append((a, cf))
        terms = new_terms
    return [(np.ravel_multi_index(tuple(ix.T), grid.shape), cf) for ix, cf in terms]


def _assemble(grid: Grid, stencil):
    """stencil: list of (offset vector, coefficient array over nodes)."""
    N = grid.size
    base = grid.multi_index()
    rows, cols, vals = [], [], []
    node = np.arange(N)
    for offset, coef in stencil:
        coef = np.broadcast_to(np.asarray(coef, dtype=float), (N,))
        if not np.any(coef):
            continue
        for col, cf in _resolve(grid, base + np.asarray(offset), coef):
            keep = cf != 0
            rows.append(node[keep])
            cols.append(col[keep])
            vals.append(cf[keep])
    if not rows:
        return sp.csr_matrix((N, N))
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    M = M.tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


def _unit(k, c, s=1):
    e = np.zeros(k, dtype=int)
    e[c] = s
    return e


def operator_matrix(grid: Grid, problem: ProblemSpec, t: float) -> sp.csr_matrix:
    """Sparse matrix of the discrete operator at time t (N x N)."""
    k, X, h = grid.k, grid.points, grid.spacing
    b = problem.drift(t, X)
    a = problem.diffusion(t, X)
    stencil = []
    zero = np.zeros(k, dtype=int)
    for c in range(k):
        w2 = 0.5 * a[c, c] / h[c] ** 2
        stencil += [(_unit(k, c, 1), w2), (_unit(k, c, -1), w2), (zero, -2.0 * w2)]
        bp, bm = np.maximum(b[c], 0.0) / h[c], np.maximum(-b[c], 0.0) / h[c]
        stencil += [(_unit(k, c, 1), bp), (zero, -bp - bm), (_unit(k, c, -1), bm)]
        for e in range(c + 1, k):
            # 1/2 (a_ce + a_ec) d2/dxc dxe = a_ce d2/dxc dxe
            w = a[c, e] / (4.0 * h[c] * h[e])
            pp = _unit(k, c) + _unit(k, e)
            pm = _unit(k, c) - _unit(k, e)
            stencil += [(pp, w), (-pp, w), (pm, -w), (-pm, -w)]
    return _assemble(grid, stencil)


def gradient_matrices(grid: Grid, problem: ProblemSpec, t: float) -> list:
    """Upwind first-difference matrices, one per coordinate (forward where b_c >= 0)."""
    k, h = grid.k, grid.spacing
    b = problem.drift(t, grid.points)
    zero = np.zeros(k, dtype=int)
    out = []
    for c in range(k):
        fwd = (b[c] >= 0).astype(float) / h[c]
        bwd = (b[c] < 0).astype(float) / h[c]
        out.append(_assemble(grid, [(_unit(k, c, 1), fwd), (zero, bwd - fwd), (_unit(k, c, -1), -bwd)]))
    return out


def discrete_generator(grid: Grid, problem: ProblemSpec, values, node: int, t: float) -> float:
    """Discrete operator applied to one slice of node values, read at ``node``."""
    M = operator_matrix(grid, problem, t)
    return float(M.getrow(node).dot(np.asarray(values, dtype=float))[0])


@dataclass
class MonotonicityReport:
    bound: float                  # dt * max_x sum_c (|b_c|/h_c + a_cc/h_c^2)
    negative_weights: int         # off-diagonal entries < 0 in the operator
    min_offdiag: float

    @property
    def explicit_monotone(self) -> bool:
        return self.bound <= 1.0

    def as_dict(self):
        return {"bound": self.bound, "negative_weights": self.negative_weights,
                "min_offdiag": self.min_offdiag, "explicit_monotone": self.explicit_monotone}


def monotonicity_bound(grid: Grid, problem: ProblemSpec, t: float = 0.0, *, warn: bool = True) -> MonotonicityReport:
    X, h = grid.points, grid.spacing
    b, a = problem.drift(t, X), problem.diffusion(t, X)
    per_node = sum(np.abs(b[c]) / h[c] + a[c, c] / h[c] ** 2 for c in range(grid.k))
    M = operator_matrix(grid, problem, t).tocoo()
    off = M.row != M.col
    neg = int(np.sum(M.data[off] < -1e-14))
    min_off = float(M.data[off].min()) if off.any() else 0.0
    report = MonotonicityReport(grid.dt * float(np.max(per_node)), neg, min_off)
    if warn and neg:
        warnings.warn(f"discrete operator has {neg} negative off-diagonal weights; "
                      "the scheme is not monotone there", stacklevel=2)
    return report


@dataclass
class ValueField:
    """Values v^{ij} on the grid: data has shape (count1, count2, slices, N)."""

    data: np.ndarray
    modes: ModeSpace
    grid: Grid
    times: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.data)):
            raise ValueError("value field contains non-finite entries")

    @property
    def initial(self) -> np.ndarray:
        """Slice at t = 0, shape (count1, count2, N)."""
        return self.data[:, :, 0, :]

    def pair(self, i: int, j: int) -> np.ndarray:
        return self.data[i - 1, j - 1]

    def slice(self, n: int) -> np.ndarray:
        return self.data[:, :, n, :]


def interpolate(field: ValueField, i: int, j: int, t: float, x) -> float:
    """Multilinear in space, linear in time."""
    grid = field.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    times = field.times
    eps = 1e-12
    if not times[0] - eps <= t <= times[-1] + eps:
        raise GridError(f"t={t} outside [{times[0]}, {times[-1]}]")
    for c, axis in enumerate(grid.axes):
        if not axis[0] - eps <= x[c] <= axis[-1] + eps:
            raise GridError(f"x={x.tolist()} outside the grid box")

    if len(times) == 1:
        tw = [(0, 1.0)]
    else:
        n = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        s = (t - times[n]) / (times[n + 1] - times[n])
        s = min(max(s, 0.0), 1.0)
        tw = [(n, 1.0 - s), (n + 1, s)]

    corners = [[]]
    for c, axis in enumerate(grid.axes):
        q = int(np.clip(np.floor((x[c] - axis[0]) / grid.spacing[c]), 0, len(axis) - 2))
        s = (x[c] - axis[q]) / grid.spacing[c]
        s = min(max(s, 0.0), 1.0)
        corners = [cr + [(q, 1.0 - s)] for cr in corners] + [cr + [(q + 1, s)] for cr in corners]

    values = field.data[i - 1, j - 1]
    total = 0.0
    for n, wt in tw:
        if wt == 0.0:
            continue
        for corner in corners:
            w = wt * math.prod(cw for _, cw in corner)
            if w == 0.0:
                continue
            node = int(np.ravel_multi_index(tuple(q for q, _ in corner), grid.shape))
            total += w * values[n, node]
    return float(total)
