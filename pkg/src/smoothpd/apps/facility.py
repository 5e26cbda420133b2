"""Online facility location with opening costs and non-linear serving costs.

Each arriving client j raises its dual alpha_j continuously.  For facility i
the growth passes three phases: distance (alpha_j reaches d_ij), opening
(beta_ij pays down what remains of a_i) and serving (gamma_ij grows to a cap
proportional to the marginal serving cost).  All rates are one, so the
level at which facility i completes is closed-form:

    fire_i = d_ij + remaining_i + cap_i

and the simulation jumps straight to the smallest one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import InputError, SetCostFunction
from ..smoothness import SmoothnessParams


@dataclass(frozen=True)
class Facility:
    point: int
    opening: float
    serving: SetCostFunction


@dataclass(frozen=True)
class FacilityInstance:
    dist: np.ndarray  # metric over points
    facilities: tuple[Facility, ...]
    clients: tuple[int, ...]  # arrival order, as point ids

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=float)
        object.__setattr__(self, "dist", D)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InputError("distance matrix must be square")
        if not self.facilities:
            raise InputError("at least one facility is required")
        if not is_metric(D):
            raise InputError("distances violate the metric axioms")
        n = D.shape[0]
        for fac in self.facilities:
            if not 0 <= fac.point < n or fac.opening < 0:
                raise InputError("bad facility")
        if any(not 0 <= c < n for c in self.clients):
            raise InputError("client outside the metric")

    def d(self, i: int, j: int) -> float:
        """Distance from facility i to the j-th client."""
        return float(self.dist[self.facilities[i].point, self.clients[j]])


def is_metric(D: np.ndarray, tol: float = 1e-9) -> bool:
    if np.any(D < -tol) or np.any(np.abs(np.diag(D)) > tol) or not np.allclose(D, D.T, atol=tol):
        return False
    # d(a, c) <= d(a, b) + d(b, c) for all triples
    return bool(np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + tol))


def metric_closure(W: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths (Floyd-Warshall) of a symmetric weight matrix."""
    D = np.array(W, dtype=float)
    np.fill_diagonal(D, 0.0)
    for k in range(D.shape[0]):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    return D


@dataclass
class FacilityState:
    members: list[dict[int, float]]
    opened: list[bool]
    paid: list[float]  # sum of beta received, per facility
    assignment: dict[int, int] = field(default_factory=dict)
    alpha: dict[int, float] = field(default_factory=dict)
    beta: dict[tuple[int, int], float] = field(default_factory=dict)
    gamma: dict[tuple[int, int], float] = field(default_factory=dict)
    cap: dict[tuple[int, int], float] = field(default_factory=dict)


def new_facility_state(inst: FacilityInstance) -> FacilityState:
    m = len(inst.facilities)
    return FacilityState([{} for _ in range(m)], [False] * m, [0.0] * m)


def _marginal(fac: Facility, members: dict[int, float], j: int) -> float:
    after = dict(members)
    after[j] = 1.0
    return fac.serving(after) - fac.serving(members)


def facility_step(
    inst: FacilityInstance,
    state: FacilityState,
    j: int,
    params: SmoothnessParams,
    gamma_scale: float = 1.0,
) -> int:
    """Serve client j (index into ``inst.clients``); returns the facility used."""
    ratio = gamma_scale * params.mu / params.lam
    fire, rem, cap = [], [], []
    for i, fac in enumerate(inst.facilities):
        r = max(fac.opening - state.paid[i], 0.0)
        c = ratio * _marginal(fac, state.members[i], j)
        rem.append(r)
        cap.append(c)
        fire.append(inst.d(i, j) + r + c)
    i_star = int(np.argmin(fire))  # first minimum: lowest id on ties
    a = fire[i_star]
    state.alpha[j] = a
    for i in range(len(inst.facilities)):
        over = max(a - inst.d(i, j), 0.0)
        b = min(over, rem[i])
        state.beta[i, j] = b
        state.gamma[i, j] = min(max(over - rem[i], 0.0), cap[i])
        state.cap[i, j] = cap[i]
        state.paid[i] += b
    state.members[i_star][j] = 1.0
    state.opened[i_star] = True
    state.assignment[j] = i_star
    return i_star


def run_facility(inst: FacilityInstance, params: SmoothnessParams, gamma_scale: float = 1.0) -> FacilityState:
    state = new_facility_state(inst)
    for j in range(len(inst.clients)):
        facility_step(inst, state, j, params, gamma_scale)
    return state


def facility_cost(inst: FacilityInstance, assignment) -> float:
    """Opening + serving + connection cost of an assignment client -> facility."""
    groups: dict[int, dict[int, float]] = {}
    for j, i in (assignment.items() if isinstance(assignment, dict) else enumerate(assignment)):
        groups.setdefault(i, {})[j] = 1.0
    total = 0.0
    for i, members in groups.items():
        fac = inst.facilities[i]
        total += fac.opening + fac.serving(members)
        total += sum(inst.d(i, j) for j in members)
    return float(total)


def facility_opt(inst: FacilityInstance, limit: int = 10**6) -> tuple[float, list[int]]:
    """Exhaustive optimum over every client-to-facility assignment."""
    m, n = len(inst.facilities), len(inst.clients)
    if m**n > limit:
        raise InputError("too many assignments for the exhaustive facility oracle")
    best, arg = math.inf, []
    for assign in itertools.product(range(m), repeat=n):
        c = facility_cost(inst, list(assign))
        if c < best:
            best, arg = c, list(assign)
    return best, arg


def facility_reference_bound(n_clients: int, params: SmoothnessParams) -> float:
    """ln n + lam/(1-mu); the measured ratio divided by this is the reported constant."""
    return math.log(max(n_clients, 1)) + params.ratio
