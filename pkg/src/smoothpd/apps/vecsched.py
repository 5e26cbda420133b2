"""Online vector scheduling on unrelated machines under L_alpha or makespan norms.

Each job goes to the machine that least increases a polynomial potential
of degree q = ceil(alpha + ln d):

* L_alpha:  C = sum_k (sum_i l_ik^alpha)^(q / alpha)
* L_inf:    C = sum_k sum_i l_ik^q, with alpha = ln m
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..core import InputError
from ..smoothness import compute_poly_params


@dataclass(frozen=True)
class VectorSchedulingInstance:
    # p[j, i, k]: load of job j on machine i in dimension k
    p: np.ndarray
    alpha: float = 2.0  # math.inf selects the makespan norm

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 3 or np.any(p < 0):
            raise InputError("p must be a non-negative (jobs, machines, dims) array")
        if not (self.alpha >= 1):
            raise InputError("alpha must be >= 1")
        object.__setattr__(self, "p", p)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.p.shape

    @property
    def degree(self) -> int:
        n, m, d = self.shape
        a = math.log(m) if math.isinf(self.alpha) else self.alpha
        return max(1, math.ceil(a + math.log(d)))


def potential(inst: VectorSchedulingInstance, loads: np.ndarray) -> float:
    q = inst.degree
    if math.isinf(inst.alpha):
        return float(np.sum(loads**q))
    a = inst.alpha
    return float(np.sum(np.sum(loads**a, axis=0) ** (q / a)))


def objective(inst: VectorSchedulingInstance, loads: np.ndarray) -> float:
    """max_k of the norm of the machine-load vector in dimension k."""
    if math.isinf(inst.alpha):
        return float(loads.max()) if loads.size else 0.0
    return float(np.max(np.sum(loads**inst.alpha, axis=0) ** (1.0 / inst.alpha)))


def vector_schedule_step(inst: VectorSchedulingInstance, loads: np.ndarray, job: int) -> int:
    """Machine whose assignment raises the potential least (lowest index on ties)."""
    base = potential(inst, loads)
    best, best_i = math.inf, -1
    for i in range(inst.shape[1]):
        trial = loads.copy()
        trial[i] += inst.p[job, i]
        inc = potential(inst, trial) - base
        if best_i < 0 or inc < best - 1e-12 * max(1.0, abs(best)):
            best, best_i = inc, i
    return best_i


def _loads(inst: VectorSchedulingInstance, assignment) -> np.ndarray:
    n, m, d = inst.shape
    loads = np.zeros((m, d))
    for j, i in enumerate(assignment):
        loads[i] += inst.p[j, i]
    return loads


def run_vecsched(inst: VectorSchedulingInstance):
    """Greedy online run; returns (assignment, objective value)."""
    n, m, d = inst.shape
    loads = np.zeros((m, d))
    assignment = []
    for j in range(n):
        i = vector_schedule_step(inst, loads, j)
        loads[i] += inst.p[j, i]
        assignment.append(i)
    return assignment, objective(inst, loads)


def vecsched_opt(inst: VectorSchedulingInstance, limit: int = 10**6):
    """Exhaustive m^n search for the objective-optimal assignment."""
    n, m, d = inst.shape
    if m**n > limit:
        raise InputError(f"{m}^{n} assignments exceed the limit {limit}")
    best, arg = math.inf, ()
    for assignment in itertools.product(range(m), repeat=n):
        v = objective(inst, _loads(inst, assignment))
        if v < best:
            best, arg = v, assignment
    return best, list(arg)


def vecsched_bound(inst: VectorSchedulingInstance) -> float:
    """(rho d)^(1/q) for L_alpha, (rho d m)^(1/q) for makespan; rho = lam/(1-mu) at degree q."""
    n, m, d = inst.shape
    q = inst.degree
    rho = compute_poly_params(q).ratio
    factor = d * m if math.isinf(inst.alpha) else d
    return (rho * factor) ** (1.0 / q)
