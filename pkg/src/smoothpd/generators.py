"""Seeded random instances.

Distributions (all draws from ``numpy.random.default_rng(seed)``):

* general: each request has 1..max_strategies strategies, each a random
  non-empty set of at most 3 resources; contributions uniform in [1, 10]
  and fixed per (request, resource); resource costs are polynomials
  sum_{t=1..k} c_t y^t with c_t uniform in [0.1, 1].
* covering: rows touch 1..d random coordinates with coefficients uniform in
  [0.2, 1], rescaled to sum to 1 when they fall short so every row is
  satisfiable within the unit box.
* routing: random spanning tree plus extra edges, quadratic edge costs,
  loads uniform in [1, 10].
* vecsched: job vectors uniform in [1, 10].
* energy / prize: windows of 1..max_window slots, volumes uniform in
  ``volume_range``, penalties uniform in [0, 2 * volume^alpha].
* facility: complete graph with weights uniform in [1, 10], closed under
  shortest paths so the result is a metric.
"""
from __future__ import annotations

import math

import numpy as np

from .apps.energy import EnergyInstance, Job, PowerFunction
from .apps.facility import Facility, FacilityInstance, metric_closure
from .apps.routing import RoutingInstance, RoutingRequest, max_disjoint_paths
from .apps.vecsched import VectorSchedulingInstance
from .core import GeneralInstance, InputError, Request, Strategy
from .costlib import CoverageCost, NormSumCost, NormTerm, PiecewisePowerCost, PolynomialLoadCost
from .covering import CoveringRow

COVERING_FAMILIES = ("polynomial", "norm", "piecewise", "submodular")


def _check(**sizes):
    for name, v in sizes.items():
        if v < 0:
            raise InputError(f"{name} must be non-negative, got {v}")


def polynomial_cost(rng, k: int, weights=None) -> PolynomialLoadCost:
    return PolynomialLoadCost([0.0] + list(rng.uniform(0.1, 1.0, k)), weights)


def general(n_requests: int, n_resources: int, max_strategies: int = 4, degree: int = 2, seed: int = 0) -> GeneralInstance:
    _check(n_requests=n_requests, n_resources=n_resources)
    if n_requests and not n_resources:
        raise InputError("requests need at least one resource")
    rng = np.random.default_rng(seed)
    costs = {e: polynomial_cost(rng, degree) for e in range(n_resources)}
    reqs = []
    for i in range(n_requests):
        load = rng.uniform(1.0, 10.0, n_resources)
        strategies = []
        for _ in range(int(rng.integers(1, max_strategies + 1))):
            size = int(rng.integers(1, min(3, n_resources) + 1))
            res = sorted(int(e) for e in rng.choice(n_resources, size, replace=False))
            strategies.append(Strategy({e: float(load[e]) for e in res}))
        reqs.append(Request(i, tuple(strategies)))
    return GeneralInstance(costs, tuple(reqs))


def covering_rows(n: int, n_rows: int, d: int, rng) -> list[CoveringRow]:
    rows = []
    for i in range(n_rows):
        size = int(rng.integers(1, min(d, n) + 1))
        support = sorted(int(e) for e in rng.choice(n, size, replace=False))
        b = rng.uniform(0.2, 1.0, size)
        if b.sum() < 1.0:
            b = b / b.sum()
        rows.append(CoveringRow(i, {e: float(v) for e, v in zip(support, b)}))
    return rows


def covering_cost(family: str, n: int, rng):
    if family == "polynomial":
        k = int(rng.integers(1, 4))
        return polynomial_cost(rng, k, {e: float(w) for e, w in enumerate(rng.uniform(0.5, 1.5, n))})
    if family == "norm":
        terms = []
        for _ in range(int(rng.integers(1, 4))):
            k = [1.0, 2.0, 3.0, math.inf][int(rng.integers(0, 4))]
            sub = None if rng.random() < 0.3 else frozenset(int(e) for e in rng.choice(n, int(rng.integers(1, n + 1)), replace=False))
            terms.append(NormTerm(float(rng.uniform(0.5, 2.0)), sub, k))
        return NormSumCost(terms)
    if family == "piecewise":
        w = {e: float(v) for e, v in enumerate(rng.uniform(0.5, 1.5, n))}
        m1 = float(rng.uniform(0.5, 1.5))
        return PiecewisePowerCost(float(rng.integers(2, 4)), m1, m1 + float(rng.uniform(0.5, 1.5)), w)
    if family == "submodular":
        # a private item per element keeps the curvature below one
        covers, n_shared = [], int(rng.integers(1, 4))
        for e in range(n):
            shared = {n + int(s) for s in range(n_shared) if rng.random() < 0.5}
            covers.append({e} | shared)
        return CoverageCost(covers, list(rng.uniform(0.5, 2.0, n + n_shared)))
    raise InputError(f"unknown covering family {family!r}; expected one of {COVERING_FAMILIES}")


def covering(family: str, n: int, n_rows: int, d: int, seed: int = 0):
    """(cost, n, rows) for one of the four cost families."""
    _check(n=n, n_rows=n_rows, d=d)
    if n_rows and not (n and d):
        raise InputError("rows need n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    f = covering_cost(family, max(n, 1), rng)
    return f, n, covering_rows(n, n_rows, d, rng)


def routing(n_nodes: int, n_edges: int, n_requests: int, max_k: int = 2, seed: int = 0) -> RoutingInstance:
    _check(n_nodes=n_nodes, n_edges=n_edges, n_requests=n_requests)
    rng = np.random.default_rng(seed)
    if n_nodes < 2:
        if n_requests:
            raise InputError("requests need at least two nodes")
        return RoutingInstance(n_nodes, (), ())
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n_nodes)]
    pairs = [(u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes)]
    extra = max(n_edges - len(edges), 0)
    for idx in rng.choice(len(pairs), min(extra, len(pairs)), replace=False):
        edges.append(pairs[int(idx)])
    costs = tuple(polynomial_cost(rng, 2) for _ in edges)
    base = RoutingInstance(n_nodes, tuple(edges), costs)
    reqs = []
    for _ in range(n_requests):
        s, t = (int(v) for v in rng.choice(n_nodes, 2, replace=False))
        k = int(rng.integers(1, min(max_k, max_disjoint_paths(base, s, t)) + 1))
        reqs.append(RoutingRequest(s, t, k, {e: float(p) for e, p in enumerate(rng.uniform(1.0, 10.0, len(edges)))}))
    return RoutingInstance(n_nodes, tuple(edges), costs, tuple(reqs))


def vecsched(n_jobs: int, m: int, d: int, alpha: float = 2.0, seed: int = 0) -> VectorSchedulingInstance:
    _check(n_jobs=n_jobs, m=m, d=d)
    rng = np.random.default_rng(seed)
    return VectorSchedulingInstance(rng.uniform(1.0, 10.0, (n_jobs, max(m, 1), max(d, 1))), alpha)


def energy(
    n_jobs: int,
    m: int,
    horizon: int = 4,
    alpha: float = 2.0,
    max_window: int = 2,
    volume_range: tuple[float, float] = (0.5, 2.0),
    eps: float = 0.5,
    prize: bool = False,
    seed: int = 0,
) -> EnergyInstance:
    _check(n_jobs=n_jobs, m=m, horizon=horizon)
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n_jobs):
        r = int(rng.integers(0, max(horizon - 1, 1)))
        dl = min(r + int(rng.integers(1, max_window + 1)), max(horizon, r + 1))
        vol = tuple(float(v) for v in rng.uniform(*volume_range, max(m, 1)))
        pen = float(rng.uniform(0.0, 2.0 * max(vol) ** alpha)) if prize else math.inf
        jobs.append(Job(r, dl, vol, pen))
    return EnergyInstance(tuple(PowerFunction(alpha) for _ in range(max(m, 1))), tuple(jobs), eps=eps)


def facility(n_points: int, n_facilities: int, n_clients: int, seed: int = 0) -> FacilityInstance:
    _check(n_points=n_points, n_facilities=n_facilities, n_clients=n_clients)
    if not 1 <= n_facilities <= n_points:
        raise InputError("need 1 <= n_facilities <= n_points")
    rng = np.random.default_rng(seed)
    W = rng.uniform(1.0, 10.0, (n_points, n_points))
    D = metric_closure(np.minimum(W, W.T))
    facs = tuple(Facility(i, float(rng.uniform(1.0, 10.0)), polynomial_cost(rng, 2)) for i in range(n_facilities))
    clients = tuple(int(c) for c in rng.integers(0, n_points, n_clients))
    return FacilityInstance(D, facs, clients)


def submodular_table(n: int, seed: int = 0):
    """Random monotone submodular table: coverage plus a concave function of a modular load."""
    from .core import subset_table
    from .costlib import SubmodularTableCost

    _check(n=n)
    rng = np.random.default_rng(seed)
    n_items = int(rng.integers(1, 2 * n + 2))
    covers = [set(int(i) for i in np.flatnonzero(rng.random(n_items) < 0.4)) for _ in range(n)]
    cov = CoverageCost(covers, list(rng.uniform(0.0, 2.0, n_items)))
    w = rng.uniform(0.0, 3.0, n)
    table = subset_table(cov, list(range(n)))
    masks = np.arange(1 << n)
    load = ((masks[:, None] >> np.arange(n)) & 1) @ w
    table = table + float(rng.uniform(0.0, 2.0)) * np.sqrt(load)
    return SubmodularTableCost(table - table[0])
