"""Cost-function families with their smoothness parameters.

Families: polynomials of an aggregate load, weighted sums of l_k norms, a
non-convex piecewise power with a flat middle, and monotone submodular
functions (coverage or explicit table).  ``params_for`` returns the
local-smoothness pair each family is known to satisfy, scaled for the
covering solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import InputError, SetCostFunction, SizeError, subset_table, tolerance
from .smoothness import (
    SmoothnessParams,
    poly_lambda,
    tightest_local_lambda,
    verify_local_smoothness,
)


def _weight_lookup(weights: Mapping[int, float] | None):
    if weights is None:
        return lambda e: 1.0
    return lambda e: weights.get(e, 0.0)


def _int_keys(d: Mapping) -> dict[int, float]:
    return {int(k): float(v) for k, v in d.items()}


class PolynomialLoadCost(SetCostFunction):
    """f(S) = g(sum_{e in S} a_e c_e) with g(y) = sum_t coeffs[t] y^t."""

    kind = "polynomial"

    def __init__(self, coeffs: Sequence[float], weights: Mapping[int, float] | None = None):
        coeffs = [float(c) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if any(c < 0 for c in coeffs):
            raise InputError("polynomial coefficients must be non-negative")
        self.coeffs = tuple(coeffs)
        self.weights = None if weights is None else dict(weights)
        if self.weights and any(w < 0 for w in self.weights.values()):
            raise InputError("weights must be non-negative")
        self._weight = _weight_lookup(self.weights)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def g(self, y):
        return np.polynomial.polynomial.polyval(y, self.coeffs)

    def load(self, members: Mapping[int, float]) -> float:
        return sum(self._weight(e) * c for e, c in members.items())

    def __call__(self, members):
        return float(self.g(self.load(members)))

    def load_function(self):
        return self._weight, self.g

    def to_json(self):
        d = {"kind": self.kind, "coeffs": list(self.coeffs)}
        if self.weights is not None:
            d["weights"] = {str(k): v for k, v in self.weights.items()}
        return d

    def __repr__(self):
        return f"PolynomialLoadCost({list(self.coeffs)})"


@dataclass(frozen=True)
class NormTerm:
    w: float
    subset: frozenset[int] | None
    k: float


class NormSumCost(SetCostFunction):
    """f(S) = sum_j w_j ||c restricted to S and S_j||_{k_j}; ``subset=None`` is everything."""

    kind = "norm_sum"

    def __init__(self, terms: Iterable[NormTerm]):
        self.terms = tuple(terms)
        for t in self.terms:
            if t.w <= 0 or t.k < 1:
                raise InputError("norm terms need w > 0 and k >= 1")

    def __call__(self, members):
        total = 0.0
        for t in self.terms:
            vals = [c for e, c in members.items() if t.subset is None or e in t.subset]
            if not vals:
                continue
            if math.isinf(t.k):
                total += t.w * max(vals)
            else:
                total += t.w * sum(v**t.k for v in vals) ** (1.0 / t.k)
        return total

    def to_json(self):
        return {
            "kind": self.kind,
            "terms": [
                {
                    "w": t.w,
                    "subset": None if t.subset is None else sorted(t.subset),
                    "k": "inf" if math.isinf(t.k) else t.k,
                }
                for t in self.terms
            ],
        }


class PiecewisePowerCost(SetCostFunction):
    """g(y) = y^k outside [m1, m2] and m1^k on it, applied to the weighted load."""

    kind = "piecewise_power"

    def __init__(self, k: float, m1: float, m2: float, weights: Mapping[int, float] | None = None):
        if not m1 < m2:
            raise InputError("piecewise cost needs m1 < m2")
        if k < 1:
            raise InputError("piecewise cost needs k >= 1")
        self.k, self.m1, self.m2 = float(k), float(m1), float(m2)
        self.weights = None if weights is None else dict(weights)
        self._weight = _weight_lookup(self.weights)

    def g(self, y):
        y = np.asarray(y, dtype=float)
        flat = (y >= self.m1) & (y <= self.m2)
        return np.where(flat, self.m1**self.k, y**self.k)

    def __call__(self, members):
        return float(self.g(sum(self._weight(e) * c for e, c in members.items())))

    def load_function(self):
        return self._weight, self.g

    def to_json(self):
        d = {"kind": self.kind, "k": self.k, "m1": self.m1, "m2": self.m2}
        if self.weights is not None:
            d["weights"] = {str(k): v for k, v in self.weights.items()}
        return d


def _mask_of(members: Iterable[int], n: int) -> int:
    mask = 0
    for e in members:
        if not 0 <= e < n:
            raise InputError(f"element {e} outside table ground set of size {n}")
        mask |= 1 << e
    return mask


class TableCost(SetCostFunction):
    """Explicit value per subset of {0..n-1}; contributions are ignored."""

    kind = "custom_table"

    def __init__(self, values: Sequence[float]):
        values = np.asarray(values, dtype=float)
        n = int(round(math.log2(len(values)))) if len(values) else -1
        if n < 0 or len(values) != 1 << n:
            raise InputError("table length must be a power of two")
        if n > 16:
            raise SizeError("tables are limited to 16 ground elements")
        self.n = n
        self.values = values
        masks = np.arange(1 << n)
        for b in range(n):
            low = masks[(masks >> b & 1) == 0]
            if np.any(values[low | (1 << b)] < values[low] - 1e-12):
                raise InputError("table is not monotone")
        if values[0] < 0:
            raise InputError("table value on the empty set must be non-negative")

    def __call__(self, members):
        return float(self.values[_mask_of(members, self.n)])

    def to_json(self):
        return {"kind": self.kind, "values": self.values.tolist()}


class SubmodularCost(SetCostFunction):
    """Marker base for monotone submodular costs with f(empty) = 0."""

    n: int


class SubmodularTableCost(TableCost, SubmodularCost):
    """Table form, validated submodular (and normalised) at construction."""

    kind = "custom_table"

    def __init__(self, values: Sequence[float]):
        super().__init__(values)
        if abs(self.values[0]) > 1e-12:
            raise InputError("submodular costs need f(empty) = 0")
        if not is_submodular(self.values, self.n):
            raise InputError("table is not submodular")

    def to_json(self):
        return {"kind": self.kind, "values": self.values.tolist(), "submodular": True}


class CoverageCost(SubmodularCost):
    """f(S) = total weight of items covered by the elements of S."""

    kind = "submodular_coverage"

    def __init__(self, covers: Sequence[Iterable[int]], item_weights: Sequence[float] | None = None):
        self.covers = tuple(frozenset(c) for c in covers)
        self.n = len(self.covers)
        n_items = 1 + max((i for c in self.covers for i in c), default=-1)
        w = [1.0] * n_items if item_weights is None else [float(x) for x in item_weights]
        if len(w) < n_items or any(x < 0 for x in w):
            raise InputError("item weights must be non-negative and cover every item")
        self.item_weights = tuple(w)

    def __call__(self, members):
        covered: set[int] = set()
        for e in members:
            if not 0 <= e < self.n:
                raise InputError(f"element {e} outside coverage ground set")
            covered |= self.covers[e]
        return float(sum(self.item_weights[i] for i in covered))

    def to_json(self):
        return {
            "kind": self.kind,
            "covers": {str(e): sorted(c) for e, c in enumerate(self.covers)},
            "item_weights": list(self.item_weights),
        }


def is_submodular(values: np.ndarray, n: int, tol: float = 1e-9) -> bool:
    """Diminishing returns, checked on every (S, e, e') triple."""
    masks = np.arange(1 << n)
    for e in range(n):
        for e2 in range(n):
            if e2 == e:
                continue
            base = masks[((masks >> e) & 1 == 0) & ((masks >> e2) & 1 == 0)]
            gain_small = values[base | (1 << e)] - values[base]
            gain_big = values[base | (1 << e) | (1 << e2)] - values[base | (1 << e2)]
            if np.any(gain_big > gain_small + tol):
                return False
    return True


def ground_of(f: SetCostFunction) -> list[int] | None:
    """Ground set a cost function carries with it, if any."""
    if isinstance(f, (TableCost, CoverageCost)):
        return list(range(f.n))
    weights = getattr(f, "weights", None)
    if weights is not None:
        return sorted(weights)
    return None


class UndefinedCurvature(ValueError):
    pass


def curvature(f: SubmodularCost, n: int | None = None) -> float:
    """Total curvature 1 - min_e [f(E) - f(E - e)] / f({e}).

    Elements with f({e}) = 0 are left out of the minimum.
    """
    n = f.n if n is None else n
    full = set(range(n))
    top = f.of_set(full)
    ratios = []
    for e in range(n):
        single = f.of_set([e])
        if single <= 0:
            continue
        ratios.append((top - f.of_set(full - {e})) / single)
    if not ratios:
        raise UndefinedCurvature("every singleton has zero value")
    return float(min(1.0, max(0.0, 1.0 - min(ratios))))


def zero_singletons(f: SubmodularCost) -> list[int]:
    return [e for e in range(f.n) if f.of_set([e]) <= 0]


@dataclass(frozen=True)
class LemmaCheck:
    holds: bool
    witness: list[int] | None = None
    gap: float = 0.0

    def __bool__(self):
        return self.holds


def curvature_lemma_check(f: SubmodularCost, n_max: int = 16, tol: float | None = None) -> LemmaCheck:
    """Check f(S) >= (1 - kappa) sum_{e in S} f({e}) on every subset."""
    n = f.n
    if n > n_max:
        raise SizeError(f"ground set of {n} exceeds n_max={n_max}")
    tol = tolerance() if tol is None else tol
    kappa = curvature(f)
    table = subset_table(f, list(range(n)))
    singles = np.array([table[1 << e] for e in range(n)])
    masks = np.arange(1 << n)
    member = (masks[:, None] >> np.arange(n)[None, :]) & 1
    rhs = (1.0 - kappa) * (member @ singles)
    gap = rhs - table
    worst = int(np.argmax(gap))
    if gap[worst] > tol * max(1.0, abs(table[worst])):
        return LemmaCheck(False, [e for e in range(n) if worst >> e & 1], float(gap[worst]))
    return LemmaCheck(True)


def covering_log(d: int) -> float:
    """ln(1 + 2 d^2), the scale the covering solver runs at."""
    return math.log(1.0 + 2.0 * d * d)


class AssertedParamsRequired(ValueError):
    pass


def params_for(
    f: SetCostFunction,
    d: int | None = None,
    mu_target: float | None = None,
    check: bool = False,
) -> SmoothnessParams:
    """Local-smoothness pair (lam, mu) for ``f`` as the covering solver uses it.

    The solver's dual needs mu already divided by 8 ln(1 + 2 d^2); families
    with a positive mu (polynomials, piecewise) therefore require ``d``.
    ``mu_target`` is the undivided mu and defaults to (k-1)/k.  The
    piecewise family is verified on its own ground set and, if the
    polynomial constants fail there, falls back to the smallest lam that
    enumeration certifies.
    """
    if isinstance(f, NormSumCost):
        params = SmoothnessParams(1.0, 0.0, "analytic:norm-triangle")
    elif isinstance(f, SubmodularCost):
        kappa = curvature(f)
        if kappa >= 1.0:
            raise ValueError("curvature 1 gives no finite local-smoothness constant")
        params = SmoothnessParams(1.0 / (1.0 - kappa), 0.0, "analytic:curvature")
    elif isinstance(f, PolynomialLoadCost) and f.degree <= 1:
        params = SmoothnessParams(1.0, 0.0, "analytic:linear")
    elif isinstance(f, (PolynomialLoadCost, PiecewisePowerCost)):
        if d is None:
            raise ValueError("row sparsity d is required for polynomial-type costs")
        k = f.degree if isinstance(f, PolynomialLoadCost) else int(math.ceil(f.k))
        mu_thm = (k - 1) / k if mu_target is None else mu_target
        mu = mu_thm / (8.0 * covering_log(d))
        lam = poly_lambda(k, mu) if k > 1 else 1.0
        params = SmoothnessParams(lam, mu if k > 1 else 0.0, "analytic:poly-scaled-mu")
        if isinstance(f, PiecewisePowerCost):
            ground = ground_of(f)
            if ground is None:
                raise ValueError("piecewise costs need explicit weights to be certified")
            if not verify_local_smoothness(f, ground, params, n_max=12):
                lam = tightest_local_lambda(f, ground, params.mu)
                params = SmoothnessParams(lam * (1 + 1e-9), params.mu, "verified:enumeration")
    else:
        raise AssertedParamsRequired(
            f"no analytic parameters for {type(f).__name__}; pass asserted params"
        )
    if check:
        ground = ground_of(f)
        if ground is not None and len(ground) <= 8:
            res = verify_local_smoothness(f, ground, params)
            if not res:
                raise ValueError(f"params {params} fail on {f!r}: {res.witness}")
    return params


def cost_from_json(d: Mapping) -> SetCostFunction:
    if not isinstance(d, Mapping):
        raise InputError("cost must be a JSON object")
    try:
        return _cost_from_json(d)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed {d.get('kind')!r} cost: {exc!r}") from exc


def _cost_from_json(d: Mapping) -> SetCostFunction:
    kind = d.get("kind")
    if kind == "polynomial":
        w = d.get("weights")
        return PolynomialLoadCost(d["coeffs"], None if w is None else _int_keys(w))
    if kind == "norm_sum":
        terms = []
        for t in d["terms"]:
            k = math.inf if t.get("k") in ("inf", None) else float(t["k"])
            sub = t.get("subset")
            terms.append(NormTerm(float(t.get("w", 1.0)), None if sub is None else frozenset(sub), k))
        return NormSumCost(terms)
    if kind == "piecewise_power":
        w = d.get("weights")
        return PiecewisePowerCost(d["k"], d["m1"], d["m2"], None if w is None else _int_keys(w))
    if kind == "submodular_coverage":
        covers = d["covers"]
        if isinstance(covers, Mapping):
            covers = [covers[str(e)] if str(e) in covers else covers.get(e, []) for e in range(len(covers))]
        return CoverageCost(covers, d.get("item_weights"))
    if kind == "custom_table":
        if d.get("submodular"):
            return SubmodularTableCost(d["values"])
        return TableCost(d["values"])
    raise InputError(f"unknown cost kind {kind!r}")
