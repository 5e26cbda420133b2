"""Online fractional 0-1 covering under a monotone cost, via its multilinear extension.

Rows sum_e b_{i,e} x_e >= 1 arrive one at a time.  While the current row is
short, x grows along (b x_e + 1/d) / grad_e F(x) and the row's dual alpha
grows at a fixed rate; alphas of earlier rows are drained where needed to
keep the first dual constraint tight.  The continuous process is integrated
with forward Euler at step ``dtau``.

The saturated set A* (coordinates at 1) only grows.  An epoch is a maximal
stretch with A* fixed, and alpha is stored per (row, epoch).
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np

from .core import InputError, SetCostFunction, SizeError, subset_table, tolerance
from .multilinear import mobius
from .smoothness import SmoothnessParams

GRAD_FLOOR = 1e-12
MAX_STEPS = 10**7
CHECKPOINT = 50_000
RATE_SLACK = 10.0  # the primal rate may exceed 2 by RATE_SLACK * dtau


@dataclass(frozen=True)
class CoveringRow:
    i: int
    b: Mapping[int, float]

    def __post_init__(self):
        if not self.b:
            raise InputError(f"row {self.i} is empty")
        for e, v in self.b.items():
            if not v > 0:
                raise InputError(f"row {self.i} has non-positive coefficient on {e}")


def truncated(row_b: np.ndarray, A: int) -> tuple[float, np.ndarray]:
    """(c_{i,A}, b_{i,.,A}) for a dense row and a saturated-set bitmask."""
    n = row_b.size
    inA = ((A >> np.arange(n)) & 1).astype(bool)
    c = max(1.0 - float(row_b[inA].sum()), 0.0)
    return c, np.minimum(row_b, c)


def covering_log(d: int) -> float:
    return math.log(1.0 + 2.0 * d * d)


@dataclass
class CoveringState:
    n: int
    d: int
    dtau: float = 1e-4
    x: np.ndarray = None
    A: int = 0
    rows: list[CoveringRow] = field(default_factory=list)
    alpha: dict[tuple[int, int], float] = field(default_factory=dict)
    epochs: list[int] = field(default_factory=lambda: [0])
    lhs: np.ndarray = None
    steps: int = 0
    max_rate: float = 0.0
    rate_ok: bool = True
    monotone_ok: bool = True
    lemma_worst: float = 0.0
    halvings: int = 0

    def __post_init__(self):
        if self.n < 0 or self.d < 1:
            raise InputError("need n >= 0 and d >= 1")
        if self.x is None:
            self.x = np.zeros(self.n)
        if self.lhs is None:
            self.lhs = np.zeros(self.n)

    @property
    def epoch(self) -> int:
        return len(self.epochs) - 1

    def dense(self, row: CoveringRow) -> np.ndarray:
        out = np.zeros(self.n)
        for e, v in row.b.items():
            if not 0 <= e < self.n:
                raise InputError(f"row {row.i} references resource {e} outside 0..{self.n - 1}")
            out[e] = v
        return out

    def saturated(self) -> list[int]:
        return [e for e in range(self.n) if self.A >> e & 1]


def new_state(n: int, d: int, dtau: float = 1e-4) -> CoveringState:
    return CoveringState(n=n, d=d, dtau=dtau)


@numba.njit(cache=True)
def _gradients(m, x, n):
    size = m.size
    prod = np.empty(size)
    prod[0] = 1.0
    for mask in range(1, size):
        low = mask & -mask
        b = 0
        while (1 << b) != low:
            b += 1
        prod[mask] = prod[mask ^ low] * x[b]
    g = np.zeros(n)
    for mask in range(1, size):
        if m[mask] == 0.0:
            continue
        for e in range(n):
            if mask >> e & 1:
                g[e] += m[mask] * prod[mask ^ (1 << e)]
    return g


@numba.njit(cache=True)
def _epoch_kernel(m, x, A, bk, c, Bt, k, alpha, lhs, d, dtau, lam, scale, max_steps):
    """Integrate one row inside one epoch.

    Returns (status, steps, max_rate) with status 0 = row satisfied,
    1 = a coordinate saturated (epoch ends), 2 = step budget used up.
    ``Bt`` holds every seen row truncated to the current A*; ``alpha`` the
    current-epoch alphas, indexed like the rows of ``Bt``.
    """
    n = x.size
    nrows = Bt.shape[0]
    max_rate = 0.0
    inc = dtau / (c * lam * scale)
    for step in range(max_steps):
        cover = 0.0
        for e in range(n):
            if not (A >> e & 1):
                cover += bk[e] * x[e]
        if cover >= c:
            return 0, step, max_rate
        g = _gradients(m, x, n)
        # alpha_k rises; its effect on lhs is applied together with the drains
        d_alpha = np.zeros(nrows)
        d_alpha[k] += inc
        for e in range(n):
            if (A >> e & 1) or bk[e] <= 0.0:
                continue
            if lhs[e] >= g[e] / lam:
                best = -1
                for i in range(nrows):
                    if alpha[i] > 0.0 and Bt[i, e] > 0.0:
                        if best < 0 or Bt[i, e] > Bt[best, e]:
                            best = i
                if best >= 0:
                    d_alpha[best] -= inc * bk[e] / Bt[best, e]
        for i in range(nrows):
            if d_alpha[i] != 0.0:
                new = max(alpha[i] + d_alpha[i], 0.0)
                delta = new - alpha[i]
                alpha[i] = new
                for e in range(n):
                    if not (A >> e & 1):
                        lhs[e] += Bt[i, e] * delta
        rate = 0.0
        hit = False
        for e in range(n):
            if (A >> e & 1) or bk[e] <= 0.0:
                continue
            ge = max(g[e], 1e-12)
            dx = dtau * (bk[e] * x[e] + 1.0 / d) / ge
            if x[e] + dx >= 1.0:
                dx = 1.0 - x[e]
                hit = True
            rate += g[e] * dx / dtau
            x[e] += dx
        if rate > max_rate:
            max_rate = rate
        if hit:
            return 1, step + 1, max_rate
    return 2, max_steps, max_rate


@dataclass(frozen=True)
class LemmaCheck:
    holds: bool
    resource: int | None = None
    gap: float = -math.inf

    def __bool__(self):
        return self.holds


class CoveringSolver:
    """Holds the cost's Möbius coefficients and runs rows against a state."""

    def __init__(self, f: SetCostFunction, n: int, params: SmoothnessParams):
        if n > 20:
            raise SizeError("exact gradients are limited to 20 resources")
        self.f, self.n, self.params = f, n, params
        self.table = subset_table(f, list(range(n)))
        self.m = mobius(self.table)

    def F(self, x) -> float:
        from .multilinear import subset_probabilities

        return float(subset_probabilities(np.asarray(x, float)) @ self.table)

    def grad(self, x) -> np.ndarray:
        return _gradients(self.m, np.asarray(x, dtype=float), self.n)


def _truncated_rows(state: CoveringState) -> np.ndarray:
    out = np.zeros((len(state.rows), state.n))
    for i, row in enumerate(state.rows):
        out[i] = truncated(state.dense(row), state.A)[1]
    return out


def _run_row(state: CoveringState, solver: CoveringSolver, row: CoveringRow, lemma_tol: float) -> LemmaCheck:
    lam = solver.params.lam
    scale = covering_log(state.d)
    dense = state.dense(row)
    if dense.sum() < 1.0 - 1e-12:
        raise InputError(f"row {row.i} cannot be satisfied inside [0, 1]^n")
    k = len(state.rows)
    state.rows.append(row)
    worst = LemmaCheck(True)
    budget = MAX_STEPS
    while True:
        c, bk = truncated(dense, state.A)
        if c <= 1e-12:  # saturated coordinates already cover the row (up to rounding)
            break
        free = np.array([not (state.A >> e & 1) for e in range(state.n)])
        if float(bk[free] @ state.x[free]) >= c:
            break
        if not np.any(bk[free] > 0):  # pragma: no cover - excluded by the row check above
            raise RuntimeError(f"row {row.i} has no free coordinate left to raise")
        Bt = _truncated_rows(state)
        ep = state.epoch
        alpha = np.array([state.alpha.get((r.i, ep), 0.0) for r in state.rows])
        before = state.x.copy()
        status, steps, rate = _epoch_kernel(
            solver.m, state.x, state.A, bk, c, Bt, k, alpha, state.lhs,
            state.d, state.dtau, lam, scale, min(CHECKPOINT, budget),
        )
        budget -= steps
        state.steps += steps
        state.max_rate = max(state.max_rate, rate)
        if rate > 2.0 + RATE_SLACK * state.dtau:
            state.rate_ok = False
        if np.any(state.x < before):
            state.monotone_ok = False
        for r, a in zip(state.rows, alpha):
            if a != 0.0 or (r.i, ep) in state.alpha:
                state.alpha[r.i, ep] = float(a)
        if status == 1:
            newly = 0
            for e in range(state.n):
                if state.x[e] >= 1.0 and not state.A >> e & 1:
                    newly |= 1 << e
            state.A |= newly
            state.epochs.append(state.A)
        check = check_lemma_bound(state, solver, tol=lemma_tol)
        if check.gap > worst.gap:
            worst = check
        state.lemma_worst = max(state.lemma_worst, check.gap)
        if status == 2 and budget <= 0:
            raise RuntimeError(
                f"row {row.i} did not converge within {MAX_STEPS} steps; "
                f"x={state.x.tolist()}, A*={state.saturated()}, dtau={state.dtau}"
            )
    return worst


def process_constraint(
    state: CoveringState,
    row: CoveringRow,
    f: SetCostFunction | CoveringSolver,
    params: SmoothnessParams | None = None,
    lemma_tol: float = 1e-2,
    max_halvings: int = 2,
) -> CoveringState:
    """Run the continuous update for one arriving row.

    If the exponential lower bound on x or the primal-rate bound drifts
    past tolerance, the row is replayed from its starting state at half the
    step, up to ``max_halvings`` times; the next row starts again at the
    original step.
    """
    solver = f if isinstance(f, CoveringSolver) else CoveringSolver(f, state.n, params)
    if any(r.i == row.i for r in state.rows):
        raise InputError(f"row {row.i} was already processed")
    if len(row.b) > state.d:
        raise InputError(f"row {row.i} has {len(row.b)} > d={state.d} nonzeros")
    dtau = state.dtau
    for attempt in range(max_halvings + 1):
        trial = copy.deepcopy(state)
        trial.rate_ok = True
        check = _run_row(trial, solver, row, lemma_tol)
        if (check and trial.rate_ok) or attempt == max_halvings:
            break
        state.dtau /= 2.0
        state.halvings += 1
    trial.rate_ok = trial.rate_ok and state.rate_ok
    state.__dict__.update(trial.__dict__)
    state.dtau = dtau  # a halved step only applies to the row that needed it
    return state


def _lemma_rhs(state: CoveringState, g: np.ndarray, lam: float) -> np.ndarray:
    scale = covering_log(state.d)
    n = state.n
    rows = [state.dense(r) for r in state.rows]
    rhs = np.zeros(n)
    for ep, A in enumerate(state.epochs):
        trunc = [truncated(b, A)[1] for b in rows]
        alphas = [state.alpha.get((r.i, ep), 0.0) for r in state.rows]
        for e in range(n):
            if A >> e & 1:
                continue
            s = sum(b[e] * a for b, a in zip(trunc, alphas))
            if s <= 0.0:
                continue
            bmax = max(b[e] for b in trunc)
            ge = max(g[e], GRAD_FLOOR)
            rhs[e] += (math.expm1(min(lam * scale * s / ge, 700.0))) / (bmax * state.d)
    return rhs


def check_lemma_bound(state: CoveringState, f, params: SmoothnessParams | None = None, tol: float = 1e-2) -> LemmaCheck:
    """Compare x_e with the exponential lower bound summed over logged epochs.

    Only unsaturated coordinates are checked; the reported gap is the
    largest rhs - x_e over them (negative when the bound holds strictly).
    """
    solver = f if isinstance(f, CoveringSolver) else CoveringSolver(f, state.n, params)
    if not state.rows:
        return LemmaCheck(True, None, -math.inf)
    g = solver.grad(state.x)
    rhs = _lemma_rhs(state, g, solver.params.lam)
    free = [e for e in range(state.n) if not state.A >> e & 1]
    if not free:
        return LemmaCheck(True, None, -math.inf)
    gaps = {e: rhs[e] - state.x[e] for e in free}
    e = max(gaps, key=gaps.get)
    return LemmaCheck(bool(gaps[e] <= tol), e, float(gaps[e]))


@dataclass(frozen=True)
class CoveringCertificate:
    alpha: dict[tuple[int, int], float]
    beta: np.ndarray
    gamma: float
    primal: float
    dual: float
    params: SmoothnessParams
    d: int

    @property
    def ratio(self) -> float:
        if self.dual <= 0:
            return 1.0 if self.primal <= tolerance() else math.inf
        return self.primal / self.dual


def build_covering_certificate(state: CoveringState, f, params: SmoothnessParams | None = None) -> CoveringCertificate:
    """beta_e = grad_e F(x) / lam and gamma = -(mu / lam) F(x).

    ``params.mu`` is the solver-scale mu, already divided by 8 ln(1 + 2 d^2).
    """
    solver = f if isinstance(f, CoveringSolver) else CoveringSolver(f, state.n, params)
    lam, mu = solver.params.lam, solver.params.mu
    primal = solver.F(state.x)
    beta = solver.grad(state.x) / lam
    gamma = -(mu / lam) * primal
    rows = {r.i: state.dense(r) for r in state.rows}
    dual = gamma
    for (i, ep), a in sorted(state.alpha.items()):
        dual += truncated(rows[i], state.epochs[ep])[0] * a
    return CoveringCertificate(dict(state.alpha), beta, gamma, primal, float(dual), solver.params, state.d)


@dataclass(frozen=True)
class CoveringDualCheck:
    feasible: bool
    constraint: int | None = None
    where: object = None
    slack: float = 0.0

    def __bool__(self):
        return self.feasible


def check_covering_dual(
    state: CoveringState,
    f,
    cert: CoveringCertificate,
    n_max: int = 16,
    tol: float | None = None,
) -> CoveringDualCheck:
    """Both dual constraint families, the second by enumeration over all S.

    Tolerance is ``tol`` (default 1e-6) plus 10 dtau to absorb the Euler lag.
    """
    if state.n > n_max:
        raise SizeError(f"{state.n} resources exceed n_max={n_max}")
    tol = (1e-6 if tol is None else tol) + 10.0 * state.dtau
    rows = {r.i: state.dense(r) for r in state.rows}
    lhs = np.zeros(state.n)
    for (i, ep), a in state.alpha.items():
        A = state.epochs[ep]
        b = truncated(rows[i], A)[1]
        for e in range(state.n):
            if not A >> e & 1:
                lhs[e] += b[e] * a
    for e in range(state.n):
        slack = cert.beta[e] - lhs[e]
        if slack < -tol * max(1.0, abs(cert.beta[e])):
            return CoveringDualCheck(False, 1, e, float(slack))
    table = subset_table(f if not isinstance(f, CoveringSolver) else f.f, list(range(state.n)))
    sums = np.zeros(1 << state.n)
    for b, v in enumerate(cert.beta):
        size = 1 << b
        sums[size : 2 * size] = sums[:size] + v
    slack = table - cert.gamma - sums
    worst = int(np.argmin(slack))
    if slack[worst] < -tol * max(1.0, abs(table[worst])):
        S = [e for e in range(state.n) if worst >> e & 1]
        return CoveringDualCheck(False, 2, S, float(slack[worst]))
    return CoveringDualCheck(True)


def row_satisfied(state: CoveringState, row: CoveringRow, tol: float = 1e-6) -> bool:
    return float(state.dense(row) @ np.minimum(state.x, 1.0)) >= 1.0 - tol


def solve_online(
    f: SetCostFunction,
    n: int,
    rows: Iterable[CoveringRow],
    params: SmoothnessParams,
    d: int | None = None,
    dtau: float = 1e-4,
    lemma_tol: float = 1e-2,
    max_halvings: int = 2,
    track_x: bool = False,
):
    """Process ``rows`` in order; returns (state, certificate, lemma_ok, trace)."""
    rows = list(rows)
    if d is None:
        d = max((len(r.b) for r in rows), default=1)
    state = new_state(n, d, dtau)
    solver = CoveringSolver(f, n, params)
    lemma_ok = True
    trace = []
    for row in rows:
        process_constraint(state, row, solver, lemma_tol=lemma_tol, max_halvings=max_halvings)
        if check_lemma_bound(state, solver, tol=lemma_tol).gap > lemma_tol:
            lemma_ok = False
        if track_x:
            trace.append(state.x.copy())
    lemma_ok = lemma_ok and state.lemma_worst <= lemma_tol
    return state, build_covering_certificate(state, solver), lemma_ok, trace


def derived_bound(lam: float, mu_thm: float, d: int) -> float:
    """8 ln(1 + 2 d^2) lam / (1 - mu): the constant the dual-rate argument yields."""
    return 8.0 * covering_log(d) * lam / (1.0 - mu_thm)
