import copy
import math

import numpy as np
import pytest

from smoothpd import generators as gen
from smoothpd.core import InputError
from smoothpd.costlib import CoverageCost, PolynomialLoadCost, params_for
from smoothpd.covering import (
    CoveringCertificate,
    CoveringRow,
    CoveringSolver,
    build_covering_certificate,
    check_covering_dual,
    check_lemma_bound,
    covering_log,
    derived_bound,
    new_state,
    process_constraint,
    row_satisfied,
    solve_online,
    truncated,
)
from smoothpd.oracle import fractional_opt_grid

LINEAR2 = PolynomialLoadCost([0, 1], {0: 1.0, 1: 2.0})


def test_truncation():
    b = np.array([0.5, 0.4, 0.3])
    c, bt = truncated(b, 0b001)
    assert c == pytest.approx(0.5)
    assert np.allclose(bt, [0.5, 0.4, 0.3])
    c, bt = truncated(b, 0b011)
    assert c == pytest.approx(0.1)
    assert np.allclose(bt, [0.1, 0.1, 0.1])


def test_single_row_reaches_one():
    f = PolynomialLoadCost([0, 1])
    state, cert, ok, _ = solve_online(f, 1, [CoveringRow(0, {0: 1.0})], params_for(f, d=1))
    assert state.x[0] >= 1.0 - 1e-9 and state.A == 1
    assert cert.primal == pytest.approx(1.0, abs=1e-3)
    assert ok and check_covering_dual(state, f, cert)


def test_modular_two_variables():
    rows = [CoveringRow(0, {0: 1.0, 1: 1.0})]
    state, cert, _, _ = solve_online(LINEAR2, 2, rows, params_for(LINEAR2, d=2))
    assert row_satisfied(state, rows[0])
    assert state.x[0] > state.x[1]  # the cheaper coordinate grows faster
    opt = fractional_opt_grid(LINEAR2, rows, 2).value
    assert opt == pytest.approx(1.0)
    assert cert.primal <= derived_bound(1.0, 0.0, 2) * opt
    assert cert.dual <= opt + 1e-6


def test_repeated_row_is_idempotent():
    f = PolynomialLoadCost([0, 1, 1], {0: 1.0, 1: 1.0})
    state = new_state(2, 2)
    solver = CoveringSolver(f, 2, params_for(f, d=2))
    process_constraint(state, CoveringRow(0, {0: 0.6, 1: 0.6}), solver)
    x = state.x.copy()
    process_constraint(state, CoveringRow(1, {0: 0.6, 1: 0.6}), solver)
    assert np.array_equal(state.x, x)
    with pytest.raises(InputError):
        process_constraint(state, CoveringRow(1, {0: 1.0}), solver)


def test_empty_state():
    f = LINEAR2
    state = new_state(2, 1)
    cert = build_covering_certificate(state, f, params_for(f, d=1))
    assert cert.primal == 0.0 and cert.dual == 0.0
    assert check_lemma_bound(state, f, params_for(f, d=1)).holds
    assert check_covering_dual(state, f, cert)


def test_input_checks():
    f = LINEAR2
    state = new_state(2, 1)
    with pytest.raises(InputError):
        process_constraint(state, CoveringRow(0, {0: 0.5, 1: 0.5}), f, params_for(f, d=1))  # 2 > d
    state = new_state(2, 2)
    with pytest.raises(InputError):
        process_constraint(state, CoveringRow(0, {0: 0.3, 1: 0.3}), f, params_for(f, d=2))  # unsatisfiable
    with pytest.raises(InputError):
        CoveringRow(0, {0: 0.0})
    with pytest.raises(InputError):
        new_state(2, 2).dense(CoveringRow(0, {5: 1.0}))


def test_inflated_alpha_fails_constraint_one():
    f, n, rows = gen.covering("polynomial", 4, 5, 2, seed=2)
    params = params_for(f, d=2)
    state, cert, _, _ = solve_online(f, n, rows, params, d=2)
    fat = copy.deepcopy(state)
    fat.alpha = {k: 5 * v + 1 for k, v in state.alpha.items()}
    check = check_covering_dual(fat, f, cert)
    assert not check and check.constraint == 1


def test_deflated_gamma_fails_constraint_two():
    f, n, rows = gen.covering("polynomial", 4, 5, 2, seed=2)
    state, cert, _, _ = solve_online(f, n, rows, params_for(f, d=2), d=2)
    bad = CoveringCertificate(cert.alpha, cert.beta + 10.0, cert.gamma, cert.primal, cert.dual, cert.params, cert.d)
    check = check_covering_dual(state, f, bad)
    assert not check and check.constraint == 2


@pytest.mark.parametrize("family", ["polynomial", "norm", "piecewise", "submodular"])
def test_runs_are_feasible_monotone_and_deterministic(family):
    for seed in range(6):
        f, n, rows = gen.covering(family, 4, 5, 3, seed=seed)
        params = params_for(f, d=3)
        state, cert, _, trace = solve_online(f, n, rows, params, d=3, track_x=True)
        assert all(row_satisfied(state, r) for r in rows)
        assert state.monotone_ok and state.rate_ok
        assert all(np.all(b >= a) for a, b in zip(trace, trace[1:]))
        again, cert2, _, _ = solve_online(f, n, rows, params, d=3)
        assert np.array_equal(again.x, state.x) and cert2.dual == cert.dual


def test_dual_feasible_for_polynomial_costs():
    # gradients of polynomial load costs only grow with x, so beta read at the end covers the alpha mass
    for seed in range(6):
        f, n, rows = gen.covering("polynomial", 4, 5, 3, seed=seed)
        state, cert, _, _ = solve_online(f, n, rows, params_for(f, d=3), d=3)
        assert check_covering_dual(state, f, cert)


def test_shrinking_gradient_can_break_constraint_one():
    # coverage costs have gradients that fall as x grows; the final beta then undercuts the alpha mass
    f, n, rows = gen.covering("submodular", 4, 5, 3, seed=3)
    state, cert, _, _ = solve_online(f, n, rows, params_for(f, d=3), d=3)
    check = check_covering_dual(state, f, cert)
    assert not check and check.constraint == 1


def test_lemma_bound_on_unit_rows_with_polynomial_costs():
    # with all-ones rows the exponential lower bound on x_e holds at the plain Euler step
    for seed in range(25):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        w = {e: float(v) for e, v in enumerate(rng.uniform(0.5, 1.5, n))}
        f = gen.polynomial_cost(rng, int(rng.integers(1, 4)), w)
        rows = [
            CoveringRow(i, {int(e): 1.0 for e in rng.choice(n, int(rng.integers(1, min(d, n) + 1)), replace=False)})
            for i in range(int(rng.integers(1, 6)))
        ]
        state, _, ok, _ = solve_online(f, n, rows, params_for(f, d=d), d=d, max_halvings=0)
        assert ok, (seed, state.lemma_worst)


def test_derived_bound_formula():
    assert derived_bound(2.0, 0.5, 3) == pytest.approx(8 * math.log(19) * 2 / 0.5)
    assert covering_log(1) == pytest.approx(math.log(3))


def test_coverage_cost_run():
    f = CoverageCost([{0, 3}, {1, 3}, {2}], [1.0, 1.0, 1.0, 2.0])
    rows = [CoveringRow(0, {0: 0.5, 1: 0.5}), CoveringRow(1, {1: 0.7, 2: 0.7})]
    state, cert, _, _ = solve_online(f, 3, rows, params_for(f))
    assert all(row_satisfied(state, r) for r in rows)
    assert check_covering_dual(state, f, cert)
