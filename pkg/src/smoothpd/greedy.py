"""Online greedy for general resource-cost minimisation, with its dual certificate.

Each arriving request takes the strategy of least marginal cost.  The run
also records, for every resource the request could have touched, the
marginal it would have paid there; scaled by 1/lambda these are the beta
variables of the configuration-LP dual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    GeneralInstance,
    InputError,
    Request,
    SetCostFunction,
    SizeError,
    subset_table,
    tolerance,
)
from .smoothness import SmoothnessParams

TIE_RTOL = 1e-12


@dataclass
class GreedyState:
    costs: Mapping[int, SetCostFunction]
    members: dict[int, dict[int, float]] = field(default_factory=dict)
    value: dict[int, float] = field(default_factory=dict)
    choice: dict[int, int] = field(default_factory=dict)
    marginal: dict[tuple[int, int], float] = field(default_factory=dict)
    paid: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for e, f in self.costs.items():
            self.members.setdefault(e, {})
            self.value.setdefault(e, f(self.members[e]))

    @property
    def primal(self) -> float:
        return float(sum(self.value[e] for e in sorted(self.value)))


def _increase(state: GreedyState, e: int, request_id: int, contribution: float) -> float:
    after = dict(state.members[e])
    after[request_id] = contribution
    return state.costs[e](after) - state.value[e]


def greedy_step(state: GreedyState, request: Request) -> tuple[int, float]:
    """Serve ``request`` with its cheapest strategy (lowest index on ties)."""
    if request.id in state.choice:
        raise InputError(f"request {request.id} was already served")
    for e in request.touched():
        if e not in state.costs:
            raise InputError(f"request {request.id} uses undeclared resource {e}")
        state.marginal[request.id, e] = _increase(state, e, request.id, request.contribution(e))
    best_j, best = -1, math.inf
    for j, s in enumerate(request.strategies):
        cost = sum(state.marginal[request.id, e] for e in s.resources)
        if best_j < 0 or cost < best - TIE_RTOL * max(1.0, abs(best)):
            best_j, best = j, cost
    for e, c in request.strategies[best_j].uses.items():
        state.members[e][request.id] = c
        state.value[e] = state.costs[e](state.members[e])
    state.choice[request.id] = best_j
    state.paid[request.id] = best
    return best_j, best


@dataclass(frozen=True)
class DualCertificate:
    alpha: dict[int, float]
    beta: dict[tuple[int, int], float]
    gamma: dict[int, float]
    primal: float
    dual: float
    params: SmoothnessParams

    @property
    def ratio(self) -> float:
        """primal / dual, the ratio the certificate proves once feasible."""
        if self.dual <= 0:
            return 1.0 if self.primal <= tolerance() else math.inf
        return self.primal / self.dual


def certificate(state: GreedyState, params: SmoothnessParams) -> DualCertificate:
    lam, mu = params.lam, params.mu
    alpha = {i: p / lam for i, p in state.paid.items()}
    beta = {k: m / lam for k, m in state.marginal.items()}
    gamma = {e: -(mu / lam) * state.value[e] for e in sorted(state.value)}
    dual = float(sum(alpha[i] for i in sorted(alpha)) + sum(gamma.values()))
    return DualCertificate(alpha, beta, gamma, state.primal, dual, params)


def run_online(instance: GeneralInstance, params: SmoothnessParams):
    """Serve requests in arrival order; returns (assignment, state, certificate)."""
    state = GreedyState(instance.costs)
    for r in instance.requests:
        greedy_step(state, r)
    return dict(state.choice), state, certificate(state, params)


@dataclass(frozen=True)
class DualCheck:
    feasible: bool
    constraint: int | None = None
    where: tuple | None = None
    slack: float = 0.0

    def __bool__(self):
        return self.feasible


def check_dual_feasibility(
    instance: GeneralInstance,
    cert: DualCertificate,
    n_max: int = 12,
    tol: float | None = None,
) -> DualCheck:
    """Check both families of dual constraints exhaustively.

    Constraint 1: alpha_i <= sum_{e in s_ij} beta_{i,e} for every strategy j.
    Constraint 2: gamma_e + sum_{i in A} beta_{i,e} <= f_e(A) for every
    resource e and every set A of its potential users.  The reported slack
    is negative on a violation.
    """
    if len(instance.requests) > n_max:
        raise SizeError(f"{len(instance.requests)} requests exceed n_max={n_max}")
    tol = tolerance() if tol is None else tol
    for r in instance.requests:
        a = cert.alpha.get(r.id, 0.0)
        for j, s in enumerate(r.strategies):
            rhs = sum(cert.beta.get((r.id, e), 0.0) for e in s.resources)
            slack = rhs - a
            if slack < -tol * max(1.0, abs(a)):
                return DualCheck(False, 1, (r.id, j), slack)
    for e, f in instance.costs.items():
        users = instance.users(e)
        contrib = [instance.requests[i].contribution(e) for i in users]
        table = subset_table(f, users, contrib)
        betas = np.array([cert.beta.get((i, e), 0.0) for i in users])
        sums = np.zeros(1 << len(users))
        for b, v in enumerate(betas):
            size = 1 << b
            sums[size : 2 * size] = sums[:size] + v
        slack = table - cert.gamma.get(e, 0.0) - sums
        worst = int(np.argmin(slack))
        if slack[worst] < -tol * max(1.0, abs(table[worst])):
            A = tuple(users[b] for b in range(len(users)) if worst >> b & 1)
            return DualCheck(False, 2, (e, A), float(slack[worst]))
    return DualCheck(True)
