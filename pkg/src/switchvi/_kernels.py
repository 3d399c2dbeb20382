"""Compiled nodal Gauss-Seidel sweeps for the slice systems."""
from __future__ import annotations

import numpy as np
from numba import njit

NONE, PENALTY, HARD = 0, 1, 2
MIN_FIRST, MAX_FIRST = 0, 1


@njit(cache=True)
def nodal_root(a, r, pn, low, pm, up):
    """Root of a v - r - pn (low - v)^+ + pm (v - up)^+ (strictly increasing in v)."""
    best = r / a
    for aL in range(2):
        if aL == 1 and not (pn > 0.0 and np.isfinite(low)):
            continue
        for aU in range(2):
            if aU == 1 and not (pm > 0.0 and np.isfinite(up)):
                continue
            num = r
            den = a
            if aL == 1:
                num += pn * low
                den += pn
            if aU == 1:
                num += pm * up
                den += pm
            v = num / den
            okL = True
            if pn > 0.0 and np.isfinite(low):
                okL = (v <= low) if aL == 1 else (v >= low)
            okU = True
            if pm > 0.0 and np.isfinite(up):
                okU = (v >= up) if aU == 1 else (v <= up)
            if okL and okU:
                return v
    return best


@njit(cache=True)
def pgs_sweeps(V, rhs, indptr, indices, data, diag, low_src, low_cost, up_src, up_cost,
               lower, upper, order, pn, pm, damping, sweeps, reverse_first):
    """In-place sweeps: pairs lexicographic, nodes row-major, reversed on alternate sweeps.

    Returns the largest nodal update of the last sweep.
    """
    P, N = V.shape
    K1 = low_src.shape[1]
    K2 = up_src.shape[1]
    change = 0.0
    for s in range(sweeps):
        change = 0.0
        backwards = (s % 2 == 1) != reverse_first
        for pp in range(P):
            p = P - 1 - pp if backwards else pp
            for xx in range(N):
                x = N - 1 - xx if backwards else xx
                r = rhs[p, x]
                for q in range(indptr[x], indptr[x + 1]):
                    y = indices[q]
                    if y != x:
                        r -= data[q] * V[p, y]
                low = -np.inf
                for q in range(K1):
                    c = V[low_src[p, q], x] - low_cost[p, q, x]
                    if c > low:
                        low = c
                up = np.inf
                for q in range(K2):
                    c = V[up_src[p, q], x] + up_cost[p, q, x]
                    if c < up:
                        up = c
                v = nodal_root(diag[x], r,
                               pn if lower == PENALTY else 0.0, low,
                               pm if upper == PENALTY else 0.0, up)
                if lower == HARD and upper == HARD:
                    if order == MIN_FIRST:
                        v = max(low, min(up, v))
                    else:
                        v = min(up, max(low, v))
                elif lower == HARD:
                    v = max(low, v)
                elif upper == HARD:
                    v = min(up, v)
                v = (1.0 - damping) * V[p, x] + damping * v
                d = abs(v - V[p, x])
                if d > change:
                    change = d
                V[p, x] = v
    return change
