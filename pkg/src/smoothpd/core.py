"""Shared domain types: resources, requests, strategies and set cost functions.

A cost function is evaluated on a *weighted* set: a mapping from member id
(a request in the general framework, a resource in the covering framework)
to a non-negative contribution.  Cardinality-style costs read the keys,
load-style costs read the contributions.
"""
from __future__ import annotations

import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


def tolerance() -> float:
    """Global absolute tolerance; ``SMOOTHPD_TOL`` overrides the default."""
    raw = os.environ.get("SMOOTHPD_TOL")
    if raw is None:
        return DEFAULT_TOL
    return float(raw)


class InputError(ValueError):
    """Malformed instance or assignment."""


class SizeError(ValueError):
    """An exhaustive routine was asked to enumerate more than it allows."""


class NumericError(ArithmeticError):
    """A numeric routine failed to converge."""


class SetCostFunction(ABC):
    """Monotone non-decreasing set function over weighted member sets."""

    kind = "custom"

    @abstractmethod
    def __call__(self, members: Mapping[int, float]) -> float:
        ...

    def of_set(self, elements: Iterable[int]) -> float:
        return self({e: 1.0 for e in elements})

    def to_json(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")

    # load-based families override this to unlock vectorised tabulation
    def load_function(self):
        return None


@dataclass(frozen=True)
class Strategy:
    uses: Mapping[int, float]

    def __post_init__(self):
        if not self.uses:
            raise InputError("strategy must use at least one resource")
        for e, c in self.uses.items():
            if c < 0:
                raise InputError(f"negative contribution {c} on resource {e}")

    @property
    def resources(self) -> tuple[int, ...]:
        return tuple(sorted(self.uses))


@dataclass(frozen=True)
class Request:
    id: int
    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        if not self.strategies:
            raise InputError(f"request {self.id} has no strategies")

    def contribution(self, resource: int) -> float | None:
        for s in self.strategies:
            if resource in s.uses:
                return s.uses[resource]
        return None

    def touched(self) -> list[int]:
        """Resources used by at least one strategy, in ascending order."""
        return sorted({e for s in self.strategies for e in s.uses})


@dataclass(frozen=True)
class GeneralInstance:
    costs: Mapping[int, SetCostFunction]
    requests: tuple[Request, ...] = ()

    def __post_init__(self):
        ids = sorted(self.costs)
        if ids != list(range(len(ids))):
            raise InputError("resource ids must be contiguous from 0")
        if [r.id for r in self.requests] != list(range(len(self.requests))):
            raise InputError("request ids must be contiguous from 0 in arrival order")
        for r in self.requests:
            seen: dict[int, float] = {}
            for s in r.strategies:
                for e, c in s.uses.items():
                    if e not in self.costs:
                        raise InputError(f"request {r.id} uses undeclared resource {e}")
                    # the configuration LP indexes loads by (request, resource)
                    if e in seen and not math.isclose(seen[e], c, rel_tol=0, abs_tol=1e-12):
                        raise InputError(
                            f"request {r.id} has inconsistent contributions on resource {e}"
                        )
                    seen[e] = c

    @property
    def n_resources(self) -> int:
        return len(self.costs)

    def users(self, resource: int) -> list[int]:
        """Requests that could use ``resource`` under some strategy."""
        return [r.id for r in self.requests if r.contribution(resource) is not None]


def loads_by_resource(
    instance: GeneralInstance, assignment: Mapping[int, int]
) -> dict[int, dict[int, float]]:
    members: dict[int, dict[int, float]] = {e: {} for e in instance.costs}
    for r in instance.requests:
        if r.id not in assignment:
            raise InputError(f"assignment misses request {r.id}")
        j = assignment[r.id]
        if not 0 <= j < len(r.strategies):
            raise InputError(f"strategy index {j} out of range for request {r.id}")
        for e, c in r.strategies[j].uses.items():
            members[e][r.id] = c
    extra = set(assignment) - {r.id for r in instance.requests}
    if extra:
        raise InputError(f"unknown request ids {sorted(extra)}")
    return members


def total_cost(instance: GeneralInstance, assignment: Mapping[int, int]) -> float:
    """Sum over resources of f_e evaluated on the requests routed through e."""
    members = loads_by_resource(instance, assignment)
    return float(sum(instance.costs[e](members[e]) for e in sorted(members)))


def gray_code_order(n: int) -> Iterable[tuple[int, int]]:
    """Yield ``(mask, flipped_bit)`` over all 2^n masks, one bit flip apart.

    The first mask is 0 and carries ``flipped_bit = -1``.
    """
    yield 0, -1
    prev = 0
    for i in range(1, 1 << n):
        g = i ^ (i >> 1)
        bit = (g ^ prev).bit_length() - 1
        yield g, bit
        prev = g


def subset_table(
    f: SetCostFunction,
    ground: Sequence[int],
    contributions: Sequence[float] | None = None,
) -> np.ndarray:
    """Values of ``f`` on every subset of ``ground``, indexed by bitmask.

    Bit ``b`` of the mask selects ``ground[b]`` with ``contributions[b]``
    (default 1).  Load-based costs are tabulated in one vectorised pass;
    anything else walks the lattice in Gray-code order so each step edits the
    member map by one element.
    """
    n = len(ground)
    if n > 24:
        raise SizeError(f"refusing to tabulate 2^{n} subsets")
    contrib = [1.0] * n if contributions is None else [float(c) for c in contributions]
    load_fn = f.load_function()
    if load_fn is not None:
        weight_of, g = load_fn
        w = np.array([weight_of(e) * c for e, c in zip(ground, contrib)], dtype=float)
        loads = np.zeros(1 << n)
        for b in range(n):
            size = 1 << b
            loads[size : 2 * size] = loads[:size] + w[b]
        return np.asarray(g(loads), dtype=float)
    out = np.empty(1 << n)
    members: dict[int, float] = {}
    for mask, bit in gray_code_order(n):
        if bit >= 0:
            e = ground[bit]
            if mask >> bit & 1:
                members[e] = contrib[bit]
            else:
                del members[e]
        out[mask] = f(members)
    return out


def mask_members(mask: int, ground: Sequence[int]) -> list[int]:
    return [ground[b] for b in range(len(ground)) if mask >> b & 1]


def competitive_ratio(primal: float, opt: float, tol: float | None = None) -> float:
    """``primal / opt`` with 0/0 read as 1.

    A positive cost against a zero optimum is returned as ``inf`` so callers
    comparing against a bound see the failure.
    """
    tol = tolerance() if tol is None else tol
    if opt <= tol:
        return 1.0 if primal <= tol else math.inf
    return primal / opt
