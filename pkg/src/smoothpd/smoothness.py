"""(lambda, mu)-smoothness of set functions and local smoothness of their
multilinear extensions: exhaustive verifiers plus the polynomial constants.

Both verifiers tabulate ``f`` on the subset lattice of a small ground set
(default at most 8 members) and search it exhaustively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import NumericError, SetCostFunction, SizeError, subset_table, tolerance

DEFAULT_N_MAX = 8


@dataclass(frozen=True)
class SmoothnessParams:
    lam: float
    mu: float
    provenance: str = "asserted"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.mu < 1:
            raise ValueError(f"mu must be below 1, got {self.mu}")

    @property
    def ratio(self) -> float:
        """The greedy competitive ratio lambda / (1 - mu)."""
        return self.lam / (1.0 - self.mu)


@dataclass(frozen=True)
class SmoothnessCheck:
    """Outcome of an exhaustive smoothness search.

    On failure ``witness`` describes the violating configuration and
    ``lhs``/``rhs`` are the two sides of the inequality there.
    """

    holds: bool
    witness: dict | None = None
    lhs: float = 0.0
    rhs: float = 0.0

    def __bool__(self) -> bool:
        return self.holds


def _ground(ground) -> tuple[list[int], list[float]]:
    if isinstance(ground, Mapping):
        ids = sorted(ground)
        return ids, [float(ground[e]) for e in ids]
    ids = list(ground)
    return ids, [1.0] * len(ids)


def _marginals(table: np.ndarray, n: int) -> np.ndarray:
    """``out[b, C] = f(C + b) - f(C)``; zero when ``b`` is already in ``C``."""
    masks = np.arange(1 << n)
    return np.stack([table[masks | (1 << b)] - table for b in range(n)])


def _chain_values(table: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Best chain sums for every (A, B) pair.

    ``value[T, C]`` is the largest sum of marginals f(B_a + a) - f(B_a) over
    all ways to attach a set B_a to each a in T such that the B_a form a
    chain inside C.  The last element of the chain (largest set) is peeled
    off first; widening the top set is a subset-max transform.
    """
    size = 1 << n
    marg = _marginals(table, n)
    value = np.zeros((size, size))
    masks = np.arange(size)
    for T in range(1, size):
        row = np.full(size, -np.inf)
        for b in range(n):
            if T >> b & 1:
                np.maximum(row, value[T ^ (1 << b)] + marg[b], out=row)
        for b in range(n):
            low = masks[(masks >> b & 1) == 0]
            row[low | (1 << b)] = np.maximum(row[low | (1 << b)], row[low])
        value[T] = row
    return value, marg


def _trace_chain(value, marg, T: int, C: int, n: int) -> list[tuple[int, int]]:
    """Recover (a, B_a) pairs, smallest B_a first, realising ``value[T, C]``."""
    pairs = []
    while T:
        target = value[T, C]
        for b in range(n):
            if C >> b & 1 and math.isclose(value[T, C ^ (1 << b)], target, rel_tol=1e-12, abs_tol=1e-12):
                C ^= 1 << b
                break
        else:
            for b in range(n):
                if T >> b & 1 and math.isclose(
                    value[T ^ (1 << b), C] + marg[b, C], target, rel_tol=1e-12, abs_tol=1e-12
                ):
                    pairs.append((b, C))
                    T ^= 1 << b
                    break
            else:  # pragma: no cover - value table is built from these moves
                raise RuntimeError("chain reconstruction failed")
    return pairs[::-1]


def _members(mask: int, ids: Sequence[int]) -> list[int]:
    return [ids[b] for b in range(len(ids)) if mask >> b & 1]


def verify_smoothness(
    f: SetCostFunction,
    ground,
    params: SmoothnessParams,
    n_max: int = DEFAULT_N_MAX,
    tol: float | None = None,
) -> SmoothnessCheck:
    """Exhaustively check sum_i [f(B_i + a_i) - f(B_i)] <= lam f(A) + mu f(B).

    ``ground`` is a sequence of member ids (contribution 1 each) or a mapping
    id -> contribution.  Every set A, every ordering of A and every chain
    B_1 <= ... <= B_n <= B inside the ground set is covered.
    """
    ids, contrib = _ground(ground)
    n = len(ids)
    if n > n_max:
        raise SizeError(f"ground set of {n} exceeds n_max={n_max}")
    tol = tolerance() if tol is None else tol
    table = subset_table(f, ids, contrib)
    value, marg = _chain_values(table, n)
    rhs = params.lam * table[:, None] + params.mu * table[None, :]
    excess = value - rhs - (tol + 1e-12 * np.abs(rhs))
    T, C = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[T, C] <= 0:
        return SmoothnessCheck(True)
    pairs = _trace_chain(value, marg, int(T), int(C), n)
    witness = {
        "A": [ids[a] for a, _ in pairs],
        "chain": [_members(c, ids) for _, c in pairs],
        "B": _members(int(C), ids),
    }
    return SmoothnessCheck(False, witness, float(value[T, C]), float(rhs[T, C]))


def local_smoothness_lhs(table: np.ndarray, n: int) -> np.ndarray:
    """``lhs[S, R] = sum_{e in S} f(R + e) - f(R)`` for all pairs of masks."""
    marg = _marginals(table, n)
    masks = np.arange(1 << n)
    member = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    return member @ marg


def verify_local_smoothness(
    f: SetCostFunction,
    ground,
    params: SmoothnessParams,
    n_max: int = DEFAULT_N_MAX,
    tol: float | None = None,
) -> SmoothnessCheck:
    """Check the per-set form sum_{e in S} [f(R+e) - f(R)] <= lam f(S) + mu f(R).

    Holding for every pair (S, R) implies local smoothness of the
    multilinear extension, by taking expectations over R.
    """
    ids, contrib = _ground(ground)
    n = len(ids)
    if n > n_max:
        raise SizeError(f"ground set of {n} exceeds n_max={n_max}")
    tol = tolerance() if tol is None else tol
    table = subset_table(f, ids, contrib)
    lhs = local_smoothness_lhs(table, n)
    rhs = params.lam * table[:, None] + params.mu * table[None, :]
    excess = lhs - rhs - (tol + 1e-12 * np.abs(rhs))
    S, R = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[S, R] <= 0:
        return SmoothnessCheck(True)
    witness = {"S": _members(int(S), ids), "R": _members(int(R), ids)}
    return SmoothnessCheck(False, witness, float(lhs[S, R]), float(rhs[S, R]))


def tightest_local_lambda(f: SetCostFunction, ground, mu: float, n_max: int = 12) -> float:
    """Smallest lam making the per-set local inequality hold for this ``mu``."""
    ids, contrib = _ground(ground)
    n = len(ids)
    if n > n_max:
        raise SizeError(f"ground set of {n} exceeds n_max={n_max}")
    table = subset_table(f, ids, contrib)
    need = local_smoothness_lhs(table, n) - mu * table[None, :]
    fs = np.broadcast_to(table[:, None], need.shape)
    pos = fs > 1e-15
    if np.any(need[~pos] > 1e-12):
        return math.inf
    if not np.any(pos):
        return 1.0
    return max(float(np.max(need[pos] / fs[pos])), 1e-12)


def _root_gap(z: float, k: int, a: float) -> float:
    # ((1 + z)/z)^(k-1) / z - a, strictly decreasing on z > 0
    return (1.0 + 1.0 / z) ** (k - 1) / z - a


def compute_b_of_k(k: int, a: float, max_steps: int = 200) -> tuple[float, float]:
    """Root ``z0`` of a z^k = (1+z)^(k-1) and the constant
    b = (1+z0)^(k-1) (1 + z0/(k+1)).

    With that b, y (x+y)^k <= k/(k+1) a x^(k+1) + b y^(k+1) for all x, y > 0.
    The root is bracketed by doubling and then bisected to relative
    precision 1e-12.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if not 0 < a <= 1:
        raise ValueError(f"a must lie in (0, 1], got {a}")
    lo, hi = 1.0, 2.0
    while _root_gap(lo, k, a) < 0:
        lo /= 2.0
    while _root_gap(hi, k, a) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("could not bracket root")
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if _root_gap(mid, k, a) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    else:
        raise NumericError(f"bisection did not converge for k={k}, a={a}")
    z0 = 0.5 * (lo + hi)
    # b grows with z0, so evaluating at the upper bracket keeps it on the safe side
    b = (1.0 + hi) ** (k - 1) * (1.0 + hi / (k + 1))
    return z0, b


def poly_lambda(k: int, mu: float) -> float:
    """Lambda pairing with ``mu`` for non-negative polynomials of degree <= k.

    Each monomial z^t obeys (x+y)^t - x^t <= t y (x+y)^(t-1)
    <= (t-1) a x^t + t b(t-1) y^t, so a = mu/(t-1) makes the x-coefficient
    exactly mu and lam_t = t b(t-1).  Degree one contributes lam_1 = 1.
    """
    if k < 1:
        raise ValueError("degree must be at least 1")
    lam = 1.0
    if k == 1:
        return lam
    if not 0 < mu < 1:
        raise ValueError(f"mu must lie in (0, 1) for degree {k}, got {mu}")
    for t in range(2, k + 1):
        _, b = compute_b_of_k(t - 1, mu / (t - 1))
        lam = max(lam, t * b)
    return lam


def poly_mu(k: int, variant: str = "standard") -> float:
    if k == 1:
        return 0.0
    if variant == "standard":
        return (k - 1) / k
    if variant == "log_scaled":
        return (k - 1) / (k * math.log(k))
    raise ValueError(f"unknown variant {variant!r}")


def compute_poly_params(
    k: int, variant: str = "standard", self_check: bool = False
) -> SmoothnessParams:
    """Concrete (lam, mu) for polynomial costs of degree ``k``.

    ``standard`` uses mu = (k-1)/k, ``log_scaled`` uses mu = (k-1)/(k ln k).
    With ``self_check`` the pair is verified on |A|^k over 8 elements.
    """
    mu = poly_mu(k, variant)
    params = SmoothnessParams(poly_lambda(k, mu), mu, f"analytic:poly-{variant}")
    if self_check:
        from .costlib import PolynomialLoadCost

        f = PolynomialLoadCost([0.0] * k + [1.0])
        check = verify_smoothness(f, range(8), params)
        if not check:
            raise NumericError(f"degree-{k} params failed self-check: {check.witness}")
    return params
