"""Survivable routing: each request needs k edge-disjoint s-t paths.

The best response to the current edge loads is a unit-capacity min-cost
flow of value k with edge cost f_e(l_e + p_ie) - f_e(l_e), solved here by
successive shortest paths with Dijkstra on reduced costs.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import GeneralInstance, InputError, Request, SetCostFunction, Strategy


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class RoutingRequest:
    s: int
    t: int
    k: int = 1
    # per-edge load; edges not listed carry the default
    load: Mapping[int, float] = field(default_factory=dict)
    default_load: float = 1.0

    def p(self, edge: int) -> float:
        return self.load.get(edge, self.default_load)


@dataclass(frozen=True)
class RoutingInstance:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    costs: tuple[SetCostFunction, ...]
    requests: tuple[RoutingRequest, ...] = ()

    def __post_init__(self):
        if len(self.edges) != len(self.costs):
            raise InputError("one cost function per edge is required")
        for u, v in self.edges:
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes) or u == v:
                raise InputError(f"bad edge ({u}, {v})")
        for r in self.requests:
            if r.k < 1 or r.s == r.t:
                raise InputError("requests need k >= 1 and distinct endpoints")
            if max_disjoint_paths(self, r.s, r.t) < r.k:
                raise InfeasibleError(f"fewer than {r.k} edge-disjoint paths from {r.s} to {r.t}")


def _edge_value(f: SetCostFunction, load: float) -> float:
    return f({0: load}) if load > 0 else f({})


def marginal_costs(inst: RoutingInstance, loads: Sequence[float], req: RoutingRequest) -> list[float]:
    return [
        _edge_value(f, loads[e] + req.p(e)) - _edge_value(f, loads[e])
        for e, f in enumerate(inst.costs)
    ]


def _min_cost_flow(n: int, edges, cost, s: int, t: int, k: int):
    """Unit-capacity min-cost flow on an undirected graph; returns (cost, flow per arc)."""
    # arc 2e goes u->v, arc 2e+1 goes v->u; each carries at most one unit
    adj = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edges):
        adj[u].append((2 * e, v))
        adj[v].append((2 * e + 1, u))
    flow = [0] * (2 * len(edges))
    pot = [0.0] * n
    total = 0.0
    for _ in range(k):
        dist = [float("inf")] * n
        prev: list[tuple[int, int, int] | None] = [None] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            # forward residual: arc unused; backward residual: reverse arc carries flow
            for arc, v in adj[u]:
                twin = arc ^ 1
                if flow[twin] == 1:
                    c, use = -cost[arc >> 1], (twin, -1)
                elif flow[arc] == 0:
                    c, use = cost[arc >> 1], (arc, 1)
                else:
                    continue
                nd = du + c + pot[u] - pot[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    prev[v] = (use[0], use[1], u)
                    heapq.heappush(heap, (nd, v))
        if dist[t] == float("inf"):
            raise InfeasibleError(f"fewer than {k} edge-disjoint paths from {s} to {t}")
        for v in range(n):
            if dist[v] < float("inf"):
                pot[v] += dist[v]
        v = t
        while v != s:
            arc, delta, u = prev[v]
            flow[arc] += delta
            total += cost[arc >> 1] * delta
            v = u
    return total, flow


def route_best_response(
    inst: RoutingInstance, loads: Sequence[float], req: RoutingRequest
) -> tuple[list[list[int]], float]:
    """k edge-disjoint paths of least total marginal cost, as edge-id lists."""
    cost = marginal_costs(inst, loads, req)
    total, flow = _min_cost_flow(inst.n_nodes, inst.edges, cost, req.s, req.t, req.k)
    # opposite unit flows on one edge cancel; costs are non-negative so this never hurts
    for e in range(len(inst.edges)):
        if flow[2 * e] and flow[2 * e + 1]:
            flow[2 * e] = flow[2 * e + 1] = 0
    paths = _walk_paths(inst, flow, req)
    used = sorted({e for p in paths for e in p})
    return paths, float(sum(cost[e] for e in used))


def _walk_paths(inst: RoutingInstance, flow, req: RoutingRequest) -> list[list[int]]:
    """Peel k s-t paths off a flow; cycles left over carry zero cost and are dropped."""
    out = {u: [] for u in range(inst.n_nodes)}
    for e, (u, v) in enumerate(inst.edges):
        if flow[2 * e]:
            out[u].append((e, v))
        if flow[2 * e + 1]:
            out[v].append((e, u))
    paths = []
    for _ in range(req.k):
        stack_nodes, stack_edges = [req.s], []
        pos = {req.s: 0}
        u = req.s
        while u != req.t:
            e, v = out[u].pop()
            if v in pos:
                # close a cycle: discard it and resume from v
                cut = pos[v]
                for w in stack_nodes[cut + 1 :]:
                    del pos[w]
                stack_nodes = stack_nodes[: cut + 1]
                stack_edges = stack_edges[:cut]
            else:
                pos[v] = len(stack_nodes)
                stack_nodes.append(v)
                stack_edges.append(e)
            u = v
        paths.append(stack_edges)
    return paths


def max_disjoint_paths(inst: RoutingInstance, s: int, t: int) -> int:
    """Max number of edge-disjoint s-t paths (unit-capacity max flow)."""
    count = 0
    zero = [0.0] * len(inst.edges)
    for k in range(1, len(inst.edges) + 1):
        try:
            _min_cost_flow(inst.n_nodes, inst.edges, zero, s, t, k)
        except InfeasibleError:
            break
        count = k
    return count


def simple_paths(inst: RoutingInstance, s: int, t: int) -> list[tuple[int, ...]]:
    """Every simple s-t path as a tuple of edge ids (exhaustive DFS)."""
    adj = [[] for _ in range(inst.n_nodes)]
    for e, (u, v) in enumerate(inst.edges):
        adj[u].append((e, v))
        adj[v].append((e, u))
    out = []

    def dfs(u, seen, path):
        if u == t:
            out.append(tuple(path))
            return
        for e, v in adj[u]:
            if v not in seen:
                seen.add(v)
                path.append(e)
                dfs(v, seen, path)
                path.pop()
                seen.discard(v)

    dfs(s, {s}, [])
    return out


def disjoint_path_sets(inst: RoutingInstance, req: RoutingRequest) -> list[frozenset[int]]:
    """Edge sets of all k-tuples of pairwise edge-disjoint simple s-t paths."""
    paths = simple_paths(inst, req.s, req.t)
    seen, out = set(), []
    for combo in itertools.combinations(paths, req.k):
        edges = [e for p in combo for e in p]
        if len(edges) == len(set(edges)):
            key = frozenset(edges)
            if key not in seen:
                seen.add(key)
                out.append(key)
    return out


def route_best_response_oracle(inst: RoutingInstance, loads, req: RoutingRequest) -> float:
    cost = marginal_costs(inst, loads, req)
    return min(sum(cost[e] for e in es) for es in disjoint_path_sets(inst, req))


def run_routing(inst: RoutingInstance):
    """Greedy online routing; returns (paths per request, final loads, total cost)."""
    loads = [0.0] * len(inst.edges)
    chosen = []
    for req in inst.requests:
        paths, _ = route_best_response(inst, loads, req)
        for e in {e for p in paths for e in p}:
            loads[e] += req.p(e)
        chosen.append(paths)
    total = sum(_edge_value(f, loads[e]) for e, f in enumerate(inst.costs))
    return chosen, loads, float(total)


class _EdgeLoadCost(SetCostFunction):
    """Adapter: an edge's cost as a set function of (request, load) pairs."""

    def __init__(self, f: SetCostFunction):
        self.f = f

    def __call__(self, members):
        return _edge_value(self.f, float(sum(members.values())))

    def load_function(self):
        inner = self.f.load_function()
        if inner is None:
            return None
        w, g = inner
        scale = w(0)
        return (lambda e: scale), g


def to_general(inst: RoutingInstance) -> GeneralInstance:
    """Explicit strategy lists (all disjoint path sets) for the generic engine and oracle."""
    reqs = []
    for i, req in enumerate(inst.requests):
        strategies = tuple(
            Strategy({e: req.p(e) for e in sorted(es)})
            for es in sorted(disjoint_path_sets(inst, req), key=lambda es: sorted(es))
        )
        reqs.append(Request(i, strategies))
    costs = {e: _EdgeLoadCost(f) for e, f in enumerate(inst.costs)}
    return GeneralInstance(costs, tuple(reqs))
