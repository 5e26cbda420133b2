"""Speed-scaling energy minimisation on unrelated machines, plus its prize-collecting variant.

Time is cut into slots of width ``delta`` and a job runs in each slot of its
window at a speed from the grid {0, eps, ..., L eps}.  Volumes are counted
in grid units: a job needs ceil(p / (delta eps)) units spread over its window.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..core import InputError

DP_STATE_MAX = 10**7


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class PowerFunction:
    """P(z) = scale * z^alpha, held at P(m1) on [m1, m2] when ``flat`` is set (non-convex)."""

    alpha: float = 2.0
    scale: float = 1.0
    flat: tuple[float, float] | None = None

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = self.scale * z**self.alpha
        if self.flat is not None:
            m1, m2 = self.flat
            out = np.where((z >= m1) & (z <= m2), self.scale * m1**self.alpha, out)
        return out

    @property
    def convex(self) -> bool:
        return self.flat is None and self.alpha >= 1

    def to_json(self) -> dict:
        d = {"alpha": self.alpha, "scale": self.scale}
        if self.flat is not None:
            d["flat"] = list(self.flat)
        return d


@dataclass(frozen=True)
class Job:
    release: int  # first slot
    deadline: int  # one past the last slot
    volume: tuple[float, ...]  # per machine
    penalty: float = math.inf

    def __post_init__(self):
        if not self.release < self.deadline:
            raise InputError("jobs need release < deadline")
        if any(v < 0 for v in self.volume):
            raise InputError("volumes must be non-negative")


@dataclass(frozen=True)
class EnergyInstance:
    power: tuple[Callable[[np.ndarray], np.ndarray], ...]
    jobs: tuple[Job, ...]
    eps: float = 0.5
    delta: float = 1.0
    L: int | None = None
    convex: tuple[bool, ...] | None = None
    horizon: int = field(init=False, default=0)

    def __post_init__(self):
        if self.eps <= 0 or self.delta <= 0:
            raise InputError("eps and delta must be positive")
        m = len(self.power)
        for j in self.jobs:
            if len(j.volume) != m:
                raise InputError("each job needs one volume per machine")
        if self.L is None:
            # one slot alone must be able to carry any job
            need = max((v for j in self.jobs for v in j.volume), default=0.0)
            object.__setattr__(self, "L", max(1, math.ceil(need / (self.delta * self.eps) - 1e-9)))
        if self.convex is None:
            object.__setattr__(self, "convex", tuple(getattr(P, "convex", False) for P in self.power))
        object.__setattr__(self, "horizon", max((j.deadline for j in self.jobs), default=0))

    @property
    def m(self) -> int:
        return len(self.power)

    def units(self, job: Job, machine: int) -> int:
        return max(0, math.ceil(job.volume[machine] / (self.delta * self.eps) - 1e-9))

    def energy(self, machine: int, speeds: np.ndarray) -> float:
        return float(self.delta * np.sum(self.power[machine](np.asarray(speeds, dtype=float))))


def _increase(inst, machine, u, window, levels) -> float:
    eps = inst.eps
    P = inst.power[machine]
    base = u[window]
    return float(inst.delta * np.sum(P(base + eps * levels) - P(base)))


def water_fill(inst: EnergyInstance, u: np.ndarray, job: Job, machine: int) -> np.ndarray:
    """Convex best response: add one grid unit at a time to the slowest open slot."""
    window = np.arange(job.release, job.deadline)
    need = inst.units(job, machine)
    if need > inst.L * window.size:
        raise InfeasibleError("grid cannot carry the job's volume in its window")
    levels = np.zeros(window.size, dtype=np.int64)
    for _ in range(need):
        speed = u[window] + inst.eps * levels
        speed = np.where(levels < inst.L, speed, np.inf)
        levels[int(np.argmin(speed))] += 1
    return levels


def dp_best_response(inst: EnergyInstance, u: np.ndarray, job: Job, machine: int) -> np.ndarray:
    """Exact best response for any monotone power function: DP over (slot, units placed)."""
    window = np.arange(job.release, job.deadline)
    need = inst.units(job, machine)
    T = window.size
    if need > inst.L * T:
        raise InfeasibleError("grid cannot carry the job's volume in its window")
    if T * (need + 1) * (inst.L + 1) > DP_STATE_MAX:
        raise InputError("best-response DP state space too large")
    P = inst.power[machine]
    lv = np.arange(inst.L + 1)
    # cost[t, l] = energy increase of running l units in slot t
    cost = np.array([inst.delta * (P(u[t] + inst.eps * lv) - P(np.full(lv.size, u[t]))) for t in window])
    best = np.full((T + 1, need + 1), math.inf)
    choice = np.zeros((T + 1, need + 1), dtype=np.int64)
    best[T, 0] = 0.0
    for t in range(T - 1, -1, -1):
        for w in range(need + 1):
            top = min(inst.L, w)
            vals = cost[t, : top + 1] + best[t + 1, w - np.arange(top + 1)]
            k = int(np.argmin(vals))
            best[t, w], choice[t, w] = vals[k], k
    levels = np.zeros(T, dtype=np.int64)
    w = need
    for t in range(T):
        levels[t] = choice[t, w]
        w -= levels[t]
    return levels


def energy_best_response(inst: EnergyInstance, u: np.ndarray, job: Job, machine: int):
    """(levels per window slot, energy increase) for running ``job`` on ``machine``."""
    if inst.convex[machine]:
        levels = water_fill(inst, u, job, machine)
    else:
        levels = dp_best_response(inst, u, job, machine)
    window = np.arange(job.release, job.deadline)
    return levels, _increase(inst, machine, u, window, levels)


def best_response_oracle(inst: EnergyInstance, u: np.ndarray, job: Job, machine: int) -> float:
    """Enumerate every grid profile with enough volume."""
    window = np.arange(job.release, job.deadline)
    need = inst.units(job, machine)
    best = math.inf
    for levels in itertools.product(range(inst.L + 1), repeat=window.size):
        if sum(levels) >= need:
            best = min(best, _increase(inst, machine, u, window, np.array(levels)))
    if best == math.inf:
        raise InfeasibleError("no feasible profile")
    return best


@dataclass
class EnergyState:
    speeds: np.ndarray  # (machines, slots)
    assignment: dict[int, int | None] = field(default_factory=dict)
    profiles: dict[int, np.ndarray] = field(default_factory=dict)
    beta: dict[tuple[int, int], float] = field(default_factory=dict)
    alpha: dict[int, float] = field(default_factory=dict)
    penalties: float = 0.0


def new_energy_state(inst: EnergyInstance) -> EnergyState:
    return EnergyState(np.zeros((inst.m, inst.horizon)))


def _place(inst, state, j, job, machine, levels):
    window = np.arange(job.release, job.deadline)
    state.speeds[machine, window] += inst.eps * levels
    state.assignment[j] = machine
    state.profiles[j] = levels


def total_energy(inst: EnergyInstance, state: EnergyState) -> float:
    return float(sum(inst.energy(i, state.speeds[i]) for i in range(inst.m)))


def energy_step(inst: EnergyInstance, state: EnergyState, j: int, lam: float = 1.0) -> int:
    """Assign job ``j`` to the machine with the least energy increase."""
    job = inst.jobs[j]
    options = [energy_best_response(inst, state.speeds[i], job, i) for i in range(inst.m)]
    incs = [inc for _, inc in options]
    for i, inc in enumerate(incs):
        state.beta[j, i] = inc / lam
    i = int(np.argmin(incs))
    _place(inst, state, j, job, i, options[i][0])
    state.alpha[j] = incs[i] / lam
    return i


def prize_collecting_step(inst: EnergyInstance, state: EnergyState, j: int, lam: float) -> int | None:
    """Reject ``j`` if even its cheapest placement costs more than lam * penalty."""
    job = inst.jobs[j]
    options = [energy_best_response(inst, state.speeds[i], job, i) for i in range(inst.m)]
    incs = [inc for _, inc in options]
    for i, inc in enumerate(incs):
        state.beta[j, i] = inc / lam
    i = int(np.argmin(incs))
    state.alpha[j] = max(job.penalty - min(state.beta[j, k] for k in range(inst.m)), 0.0)
    if incs[i] > lam * job.penalty:
        state.assignment[j] = None
        state.penalties += job.penalty
        return None
    _place(inst, state, j, job, i, options[i][0])
    return i


def run_energy(inst: EnergyInstance, lam: float = 1.0, prize: bool = False) -> EnergyState:
    state = new_energy_state(inst)
    for j in range(len(inst.jobs)):
        if prize:
            prize_collecting_step(inst, state, j, lam)
        else:
            energy_step(inst, state, j, lam)
    return state


def prize_dual(inst: EnergyInstance, state: EnergyState, lam: float, mu: float) -> float:
    """sum_j (pi_j - alpha_j) - (mu/lam) * final energy."""
    return float(
        sum(inst.jobs[j].penalty - state.alpha[j] for j in state.alpha)
        - (mu / lam) * total_energy(inst, state)
    )


def _profiles(inst: EnergyInstance, job: Job, machine: int) -> list[tuple[int, ...]]:
    need = inst.units(job, machine)
    T = job.deadline - job.release
    return [lv for lv in itertools.product(range(inst.L + 1), repeat=T) if sum(lv) == need]


def _machine_opt(inst: EnergyInstance, machine: int, jobs: Sequence[int]) -> float:
    """Least energy for running exactly ``jobs`` on ``machine`` (enumerates joint profiles)."""
    loads = {tuple([0] * inst.horizon)}
    for j in jobs:
        job = inst.jobs[j]
        nxt = set()
        for base in loads:
            for lv in _profiles(inst, job, machine):
                new = list(base)
                for k, x in enumerate(lv):
                    new[job.release + k] += x
                nxt.add(tuple(new))
        loads = nxt
    return min(inst.energy(machine, inst.eps * np.array(ld, dtype=float)) for ld in loads)


def energy_opt(inst: EnergyInstance, prize: bool = False, limit: int = 10**5) -> float:
    """Exhaustive offline optimum over assignments (and rejections when ``prize``)."""
    n, m = len(inst.jobs), inst.m
    choices = list(range(m)) + ([None] if prize else [])
    if len(choices) ** n > limit:
        raise InputError("too many assignments for the exhaustive energy oracle")
    machine_opt = functools.lru_cache(maxsize=None)(lambda i, js: _machine_opt(inst, i, js))
    best = math.inf
    for assign in itertools.product(choices, repeat=n):
        cost = sum(inst.jobs[j].penalty for j, a in enumerate(assign) if a is None)
        for i in range(m):
            cost += machine_opt(i, tuple(j for j, a in enumerate(assign) if a == i))
            if cost >= best:
                break
        best = min(best, cost)
    return float(best)
