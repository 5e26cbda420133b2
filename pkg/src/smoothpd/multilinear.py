"""Multilinear extension F(x) = E[f(1_T)] and its partial derivatives.

Resources are the integers 0..n-1 and ``x[e]`` is the inclusion probability
of resource e.  Three evaluation routes exist:

* exact: tabulate f on all 2^n subsets and take the probability-weighted sum;
* load DP: for costs of an integer aggregate load, convolve the Bernoulli
  load distribution instead of enumerating subsets;
* sampled: Monte Carlo over independent random sets with a fixed seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InputError, SetCostFunction, SizeError, subset_table

EXACT_N_MAX = 20
DP_LOAD_MAX = 10**6


@dataclass(frozen=True)
class Sampled:
    """Monte Carlo mode: ``count`` independent draws from a seeded generator."""

    count: int = 10_000
    seed: int = 0


def _point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("x must be a vector")
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise InputError("every coordinate of x must lie in [0, 1]")
    return x


def subset_probabilities(x: np.ndarray) -> np.ndarray:
    """``p[mask]`` = probability that the random set equals ``mask``."""
    p = np.ones(1)
    for xe in x:
        p = np.concatenate([p * (1.0 - xe), p * xe])
    return p


def mobius(table: np.ndarray) -> np.ndarray:
    """Coefficients m with f(S) = sum_{T subset S} m[T], so F(x) = sum_T m[T] prod_{e in T} x_e."""
    m = np.array(table, dtype=float)
    n = int(m.size).bit_length() - 1
    masks = np.arange(m.size)
    for b in range(n):
        hi = masks[(masks >> b & 1) == 1]
        m[hi] -= m[hi ^ (1 << b)]
    return m


def _table(f: SetCostFunction, n: int) -> np.ndarray:
    if n > EXACT_N_MAX:
        raise SizeError(f"exact evaluation over {n} > {EXACT_N_MAX} resources")
    return subset_table(f, list(range(n)))


def _integer_loads(f: SetCostFunction, n: int):
    """Integer weights and g for load-based costs, or None when the DP cannot apply."""
    load_fn = f.load_function()
    if load_fn is None:
        return None
    weight_of, g = load_fn
    w = np.array([weight_of(e) for e in range(n)], dtype=float)
    wi = np.rint(w).astype(np.int64)
    if np.any(np.abs(w - wi) > 0) or np.any(wi < 0) or wi.sum() > DP_LOAD_MAX:
        return None
    return wi, g


def load_distribution(weights: np.ndarray, x: np.ndarray, skip: int = -1) -> np.ndarray:
    """Distribution of sum_e w_e X_e over integer loads, optionally leaving out ``skip``."""
    total = int(sum(int(w) for e, w in enumerate(weights) if e != skip))
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    top = 0
    for e, (w, xe) in enumerate(zip(weights, x)):
        if e == skip or xe == 0.0:
            continue
        w = int(w)
        new = dist[: top + w + 1] * 0.0
        new[: top + 1] += dist[: top + 1] * (1.0 - xe)
        new[w : w + top + 1] += dist[: top + 1] * xe
        top += w
        dist[: top + 1] = new
    return dist


def _resolve(f, x, mode):
    if isinstance(mode, Sampled):
        return "sampled"
    if mode not in ("exact", "dp", "auto"):
        raise InputError(f"unknown mode {mode!r}")
    if mode == "auto":
        return "dp" if _integer_loads(f, len(x)) is not None else "exact"
    if mode == "dp" and _integer_loads(f, len(x)) is None:
        raise InputError("load DP needs a load-based cost with integer weights")
    return mode


def sample_F(f: SetCostFunction, x, count: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of F(x) with its standard error."""
    x = _point(x)
    if count < 2:
        raise InputError("need at least two samples")
    rng = np.random.default_rng(seed)
    draws = rng.random((count, x.size)) < x
    n = x.size
    if n <= EXACT_N_MAX:
        table = _table(f, n)
        masks = draws.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
        vals = table[masks]
    else:
        vals = np.array([f.of_set(np.flatnonzero(row)) for row in draws])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(count))


def eval_F(f: SetCostFunction, x, mode="exact") -> float:
    """F(x); ``mode`` is ``"exact"``, ``"dp"``, ``"auto"`` or a :class:`Sampled`."""
    x = _point(x)
    route = _resolve(f, x, mode)
    if route == "sampled":
        return sample_F(f, x, mode.count, mode.seed)[0]
    if route == "dp":
        w, g = _integer_loads(f, x.size)
        dist = load_distribution(w, x)
        return float(dist @ g(np.arange(dist.size, dtype=float)))
    return float(subset_probabilities(x) @ _table(f, x.size))


def grad_F(f: SetCostFunction, x, e: int, mode="exact") -> float:
    """dF/dx_e = E[f(R + e) - f(R)] over random R not containing e."""
    x = _point(x)
    if not 0 <= e < x.size:
        raise InputError(f"resource {e} out of range")
    route = _resolve(f, x, mode)
    if route == "sampled":
        hi, lo = x.copy(), x.copy()
        hi[e], lo[e] = 1.0, 0.0
        # common random numbers keep the difference's variance small
        return sample_F(f, hi, mode.count, mode.seed)[0] - sample_F(f, lo, mode.count, mode.seed)[0]
    if route == "dp":
        w, g = _integer_loads(f, x.size)
        dist = load_distribution(w, x, skip=e)
        loads = np.arange(dist.size, dtype=float)
        return float(dist @ (g(loads + w[e]) - g(loads)))
    table = _table(f, x.size)
    lo = x.copy()
    lo[e] = 0.0
    masks = np.arange(table.size)
    return float(subset_probabilities(lo) @ (table[masks | (1 << e)] - table))


def grad_all(f: SetCostFunction, x, mode="exact") -> np.ndarray:
    """The full gradient vector."""
    x = _point(x)
    if _resolve(f, x, mode) == "exact":
        table = _table(f, x.size)
        masks = np.arange(table.size)
        out = np.empty(x.size)
        for e in range(x.size):
            lo = x.copy()
            lo[e] = 0.0
            out[e] = subset_probabilities(lo) @ (table[masks | (1 << e)] - table)
        return out
    return np.array([grad_F(f, x, e, mode) for e in range(x.size)])
