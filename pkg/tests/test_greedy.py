import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothpd import generators as gen
from smoothpd.core import GeneralInstance, InputError, Request, SizeError, Strategy, competitive_ratio, total_cost
from smoothpd.costlib import PolynomialLoadCost
from smoothpd.greedy import (
    DualCertificate,
    GreedyState,
    certificate,
    check_dual_feasibility,
    greedy_step,
    run_online,
)
from smoothpd.oracle import offline_opt_general
from smoothpd.smoothness import SmoothnessParams, compute_poly_params

LINEAR = PolynomialLoadCost([0, 1])
SQUARE = PolynomialLoadCost([0, 0, 1])


def _instance(costs, strategies):
    reqs = tuple(Request(i, tuple(Strategy(s) for s in ss)) for i, ss in enumerate(strategies))
    return GeneralInstance(costs, reqs)


def test_picks_least_marginal():
    inst = _instance({0: SQUARE, 1: SQUARE}, [[{0: 1.0}], [{0: 1.0}, {1: 1.0}]])
    state = GreedyState(inst.costs)
    assert greedy_step(state, inst.requests[0]) == (0, 1.0)
    j, paid = greedy_step(state, inst.requests[1])
    assert (j, paid) == (1, 1.0)  # 1 on the empty resource beats 4 - 1 = 3
    assert state.marginal[1, 0] == 3.0


def test_ties_go_to_lower_index():
    inst = _instance({0: LINEAR, 1: LINEAR}, [[{1: 2.0}, {0: 2.0}]])
    assign, _, _ = run_online(inst, SmoothnessParams(1.0, 0.0))
    assert assign == {0: 0}


def test_repeat_and_unknown_resource():
    inst = _instance({0: LINEAR}, [[{0: 1.0}]])
    state = GreedyState(inst.costs)
    greedy_step(state, inst.requests[0])
    with pytest.raises(InputError):
        greedy_step(state, inst.requests[0])
    with pytest.raises(InputError):
        greedy_step(state, Request(5, (Strategy({9: 1.0}),)))


def test_linear_costs_are_optimal():
    inst = _instance({0: LINEAR, 1: LINEAR}, [[{0: 1.0}, {1: 2.0}], [{1: 1.0}], [{0: 3.0}, {1: 1.0}]])
    assign, state, cert = run_online(inst, SmoothnessParams(1.0, 0.0))
    opt, _ = offline_opt_general(inst)
    assert state.primal == pytest.approx(total_cost(inst, assign))
    assert competitive_ratio(state.primal, opt) == pytest.approx(1.0)
    assert check_dual_feasibility(inst, cert)


def test_certificate_identity():
    inst = gen.general(6, 4, seed=3)
    params = compute_poly_params(2)
    _, state, cert = run_online(inst, params)
    assert cert.dual == pytest.approx((1 - params.mu) / params.lam * state.primal, rel=1e-9)
    assert cert.ratio == pytest.approx(params.ratio, rel=1e-9)


def test_inflated_beta_breaks_constraint_two():
    inst = gen.general(5, 3, seed=1)
    _, _, cert = run_online(inst, compute_poly_params(2))
    fat = DualCertificate(cert.alpha, {k: 10 * v + 10 for k, v in cert.beta.items()}, cert.gamma,
                          cert.primal, cert.dual, cert.params)
    check = check_dual_feasibility(inst, fat)
    assert not check and check.constraint == 2 and check.slack < 0


def test_inflated_alpha_breaks_constraint_one():
    inst = gen.general(5, 3, seed=1)
    _, _, cert = run_online(inst, compute_poly_params(2))
    fat = DualCertificate({i: a + 1 for i, a in cert.alpha.items()}, cert.beta, cert.gamma,
                          cert.primal, cert.dual, cert.params)
    check = check_dual_feasibility(inst, fat)
    assert not check and check.constraint == 1


def test_wrong_params_give_infeasible_dual():
    # squares are not (1, 0)-smooth, so the certificate built with those constants fails
    inst = _instance({0: SQUARE}, [[{0: 1.0}]] * 4)
    _, _, cert = run_online(inst, SmoothnessParams(1.0, 0.0))
    assert not check_dual_feasibility(inst, cert)
    _, _, cert = run_online(inst, compute_poly_params(2))
    assert check_dual_feasibility(inst, cert)


def test_size_guard():
    inst = gen.general(13, 3, seed=0)
    _, _, cert = run_online(inst, compute_poly_params(2))
    with pytest.raises(SizeError):
        check_dual_feasibility(inst, cert, n_max=12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 4), st.integers(1, 3))
def test_weak_duality_and_bound(seed, n_req, n_res, k):
    inst = gen.general(n_req, n_res, max_strategies=3, degree=k, seed=seed)
    params = compute_poly_params(k)
    _, state, cert = run_online(inst, params)
    assert check_dual_feasibility(inst, cert)
    opt, _ = offline_opt_general(inst)
    assert cert.dual <= opt * (1 + 1e-9) + 1e-9
    assert competitive_ratio(state.primal, opt) <= params.ratio * (1 + 1e-9)


def test_order_does_not_matter_for_the_bound():
    inst = gen.general(5, 3, seed=11)
    params = compute_poly_params(2)
    opt, _ = offline_opt_general(inst)
    for perm in itertools.permutations(range(5)):
        reqs = tuple(Request(i, inst.requests[p].strategies) for i, p in enumerate(perm))
        shuffled = GeneralInstance(inst.costs, reqs)
        _, state, cert = run_online(shuffled, params)
        assert check_dual_feasibility(shuffled, cert)
        assert state.primal <= params.ratio * opt * (1 + 1e-9)
