"""Brute-force baselines: integral offline optimum and the fractional covering optimum.

Both searches are exhaustive in effect.  Branch-and-bound only discards
regions that provably contain nothing better, using monotonicity of the
costs (partial cost and box lower corners are valid lower bounds).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .core import GeneralInstance, SetCostFunction, SizeError, subset_table
from .multilinear import mobius

PRODUCT_MAX = 10**7


@numba.njit(cache=True)
def _dfs(n_req, n_res, strat_ptr, use_ptr, use_res, use_bit, tab_off, tables):
    best = np.inf
    best_assign = np.full(n_req, -1, np.int64)
    assign = np.zeros(n_req, np.int64)
    masks = np.zeros(n_res, np.int64)
    # partial[i] = cost with requests < i placed; resource values tracked incrementally
    partial = np.zeros(n_req + 1)
    value = np.empty(n_res)
    for e in range(n_res):
        value[e] = tables[tab_off[e]]
    partial[0] = value.sum()
    i = 0
    assign[0] = -1
    while i >= 0:
        if i == n_req:
            if partial[i] < best:
                best = partial[i]
                best_assign[:] = assign
            i -= 1
            continue
        # undo previous strategy of request i, if any
        j = assign[i]
        if j >= 0:
            s = strat_ptr[i] + j
            for u in range(use_ptr[s], use_ptr[s + 1]):
                e = use_res[u]
                masks[e] ^= use_bit[u]
                value[e] = tables[tab_off[e] + masks[e]]
        j += 1
        if j == strat_ptr[i + 1] - strat_ptr[i]:
            assign[i] = -1
            i -= 1
            continue
        assign[i] = j
        s = strat_ptr[i] + j
        cost = partial[i]
        for u in range(use_ptr[s], use_ptr[s + 1]):
            e = use_res[u]
            old = value[e]
            masks[e] ^= use_bit[u]
            value[e] = tables[tab_off[e] + masks[e]]
            cost += value[e] - old
        partial[i + 1] = cost
        # monotone costs: the finished assignment costs at least the partial one
        if cost >= best:
            continue
        i += 1
        if i < n_req:
            assign[i] = -1
    return best, best_assign


def offline_opt_general(instance: GeneralInstance) -> tuple[float, dict[int, int]]:
    """Optimal assignment; ties go to the lexicographically smallest one."""
    reqs = instance.requests
    size = math.prod(len(r.strategies) for r in reqs) if reqs else 1
    if size > PRODUCT_MAX:
        raise SizeError(f"strategy product {size} exceeds {PRODUCT_MAX}")
    costs = instance.costs
    if not reqs:
        return float(sum(costs[e]({}) for e in sorted(costs))), {}
    users = {e: instance.users(e) for e in costs}
    bit = {(i, e): 1 << k for e in costs for k, i in enumerate(users[e])}
    tables, offsets, off = [], [], 0
    for e in sorted(costs):
        contrib = [reqs[i].contribution(e) for i in users[e]]
        t = subset_table(costs[e], users[e], contrib)
        tables.append(t)
        offsets.append(off)
        off += t.size
    strat_ptr, use_ptr, use_res, use_bit = [0], [0], [], []
    for r in reqs:
        for s in r.strategies:
            for e in s.resources:
                use_res.append(e)
                use_bit.append(bit[r.id, e])
            use_ptr.append(len(use_res))
        strat_ptr.append(len(use_ptr) - 1)
    best, assign = _dfs(
        len(reqs),
        len(costs),
        np.array(strat_ptr, np.int64),
        np.array(use_ptr, np.int64),
        np.array(use_res, np.int64),
        np.array(use_bit, np.int64),
        np.array(offsets, np.int64),
        np.concatenate(tables),
    )
    return float(best), {i: int(j) for i, j in enumerate(assign)}


@numba.njit(cache=True)
def _poly_eval(m, x):
    n = x.size
    prod = np.empty(m.size)
    prod[0] = 1.0
    total = m[0]
    for mask in range(1, m.size):
        low = mask & -mask
        b = 0
        while (1 << b) != low:
            b += 1
        prod[mask] = prod[mask ^ low] * x[b]
        total += m[mask] * prod[mask]
    return total


@numba.njit(cache=True)
def _feasible(B, x, tol):
    for i in range(B.shape[0]):
        s = 0.0
        for e in range(B.shape[1]):
            s += B[i, e] * x[e]
        if s < 1.0 - tol:
            return False
    return True


@numba.njit(cache=True)
def _box_search(m, B, N, rel_gap, max_nodes):
    """Branch-and-bound over boxes of grid points [lo, hi] in {0..N}^n.

    Boxes with a side of length >= 2 split at the midpoint into two halves
    sharing the middle face, so the continuous region stays covered; a box
    with all sides <= 1 is a grid cell, which contributes its lower corner
    to the continuous bound before splitting into disjoint faces.
    """
    n = B.shape[1]
    best_grid = np.inf
    best_x = np.full(n, -1.0)
    best_lb = np.inf
    cap = 4 * (n + 1) * 64
    lo_stack = np.empty((cap, n), np.int64)
    hi_stack = np.empty((cap, n), np.int64)
    lo_stack[0, :] = 0
    hi_stack[0, :] = N
    top = 1
    nodes = 0
    pruned_floor = np.inf
    ftol = 1e-12
    while top > 0:
        top -= 1
        lo = lo_stack[top].copy()
        hi = hi_stack[top].copy()
        nodes += 1
        if nodes > max_nodes:
            return best_grid, best_x, -1.0, nodes
        xl = lo / N
        if not _feasible(B, hi / N, ftol):
            continue
        fl = _poly_eval(m, xl)
        if fl >= best_grid * (1.0 - rel_gap):
            pruned_floor = min(pruned_floor, fl)
            continue
        if _feasible(B, xl, ftol):
            # region minimum sits at its lower corner, which is a grid point
            best_grid = fl
            best_x[:] = xl
            best_lb = min(best_lb, fl)
            continue
        side = 0
        for e in range(n):
            if hi[e] - lo[e] > hi[side] - lo[side]:
                side = e
        length = hi[side] - lo[side]
        if length <= 1:
            best_lb = min(best_lb, fl)
            lo_mid, hi_mid = lo[side], hi[side]
        else:
            lo_mid = (lo[side] + hi[side]) // 2
            hi_mid = lo_mid
        if top + 2 > cap:
            return best_grid, best_x, -2.0, nodes
        # upper half last so it is explored first and seeds the incumbent
        lo_stack[top] = lo
        hi_stack[top] = hi
        hi_stack[top, side] = lo_mid
        lo_stack[top + 1] = lo
        lo_stack[top + 1, side] = hi_mid
        hi_stack[top + 1] = hi
        top += 2
    lower = min(best_lb, pruned_floor)
    return best_grid, best_x, lower, nodes


@dataclass(frozen=True)
class FractionalOpt:
    """Result of the grid search.

    ``value`` is the best feasible grid point (an upper bound on the true
    fractional optimum), ``lower`` a certified lower bound from the cell
    search, ``lipschitz_slack`` the cruder bound h * sum_e max marginal_e,
    and ``integral`` the best 0/1 solution.
    """

    value: float
    x: np.ndarray
    lower: float
    lipschitz_slack: float
    integral: float
    integral_x: np.ndarray
    resolution: float
    nodes: int

    @property
    def lower_bound(self) -> float:
        return max(self.lower, self.value - self.lipschitz_slack, 0.0)


def _rows_matrix(rows, n: int) -> np.ndarray:
    B = np.zeros((len(rows), n))
    for i, row in enumerate(rows):
        for e, b in row.b.items():
            B[i, e] = b
    return B


def fractional_opt_grid(
    f: SetCostFunction,
    rows: Sequence,
    n: int,
    resolution: float = 1.0 / 40,
    rel_gap: float = 0.0,
    max_nodes: int = 5 * 10**7,
) -> FractionalOpt:
    """Minimise F over feasible points of the grid with spacing ``resolution``.

    ``rows`` are objects with a ``b`` mapping (resource -> coefficient).
    ``rel_gap`` > 0 lets the search stop refining regions within that
    relative distance of the incumbent; ``lower`` stays a valid bound.
    """
    if n > 6 and resolution >= 1.0 / 40:
        raise SizeError(f"grid search over {n} > 6 resources at resolution {resolution}")
    N = int(round(1.0 / resolution))
    if not math.isclose(N * resolution, 1.0, rel_tol=1e-9):
        raise ValueError("resolution must be 1/N for an integer N")
    table = subset_table(f, list(range(n)))
    B = _rows_matrix(rows, n)
    masks = np.arange(table.size)
    feas = np.array([np.all(B @ ((mask >> np.arange(n)) & 1) >= 1.0 - 1e-12) for mask in masks])
    if not feas[-1]:
        raise ValueError("covering instance is infeasible even with every resource")
    integral_mask = int(masks[feas][np.argmin(table[feas])])
    integral_x = ((integral_mask >> np.arange(n)) & 1).astype(float)
    if len(rows) == 0:
        x0 = np.zeros(n)
        return FractionalOpt(table[0], x0, table[0], 0.0, table[0], x0, resolution, 0)
    m = mobius(table)
    value, x, lower, nodes = _box_search(m, B, N, rel_gap, max_nodes)
    if lower < 0:
        raise SizeError(f"grid search exceeded its node budget ({nodes} nodes)")
    max_marg = np.array([np.max(table[masks | (1 << e)] - table) for e in range(n)])
    slack = resolution * float(max_marg.sum())
    return FractionalOpt(
        float(value), x, float(lower), slack, float(table[integral_mask]), integral_x, resolution, int(nodes)
    )
