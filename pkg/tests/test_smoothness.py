import math

import numpy as np
import pytest

from smoothpd.core import SizeError
from smoothpd.costlib import NormSumCost, NormTerm, PolynomialLoadCost, TableCost
from smoothpd.smoothness import (
    SmoothnessParams,
    compute_b_of_k,
    compute_poly_params,
    poly_lambda,
    verify_local_smoothness,
    verify_smoothness,
)


def power(k, weights=None):
    return PolynomialLoadCost([0.0] * k + [1.0], weights)


def test_params_validation():
    with pytest.raises(ValueError):
        SmoothnessParams(0.0, 0.0)
    with pytest.raises(ValueError):
        SmoothnessParams(1.0, 1.0)
    assert SmoothnessParams(3.0, 0.5).ratio == 6.0


def test_linear_is_1_0_smooth():
    assert verify_smoothness(PolynomialLoadCost([0, 2.5]), range(6), SmoothnessParams(1, 0))


def test_square_with_1_0_is_decided_by_enumeration():
    res = verify_smoothness(power(2), [1, 2], SmoothnessParams(1, 0))
    assert not res
    # replay the witness by hand: each a_i pays its marginal on top of its chain set
    f = power(2)
    lhs = sum(f.of_set(set(b) | {a}) - f.of_set(b) for a, b in zip(res.witness["A"], res.witness["chain"]))
    rhs = f.of_set(res.witness["A"])
    assert lhs == pytest.approx(res.lhs) and rhs == pytest.approx(res.rhs)
    assert lhs > rhs


def test_huge_lambda_always_holds():
    f = TableCost([0, 1, 1, 5, 2, 6, 7, 9])
    assert verify_smoothness(f, range(3), SmoothnessParams(1e6, 0))


def test_size_guard():
    with pytest.raises(SizeError):
        verify_smoothness(power(2), range(9), SmoothnessParams(1, 0))
    with pytest.raises(SizeError):
        verify_local_smoothness(power(2), range(9), SmoothnessParams(1, 0))


def test_local_l1_norm_and_modular():
    f = NormSumCost([NormTerm(1.0, None, 1.0), NormTerm(0.5, frozenset({0, 1, 2}), 1.0)])
    assert verify_local_smoothness(f, range(6), SmoothnessParams(1, 0))
    assert verify_local_smoothness(PolynomialLoadCost([0, 1], {e: e + 1.0 for e in range(6)}), range(6), SmoothnessParams(1, 0))


def test_local_weighted_square():
    w = {e: 0.5 + 0.25 * e for e in range(8)}
    p = compute_poly_params(2)
    assert p.mu == 0.5
    assert verify_local_smoothness(power(2, w), w.keys(), p)


@pytest.mark.parametrize("k,a,z0,b", [(1, 0.5, 2.0, 2.0), (1, 1.0, 1.0, 1.5)])
def test_b_of_k_closed_forms(k, a, z0, b):
    z, bb = compute_b_of_k(k, a)
    assert z == pytest.approx(z0, rel=1e-11)
    assert bb == pytest.approx(b, rel=1e-11)


def test_b_of_k_root_equation():
    for k in range(1, 9):
        for a in (1.0 / (k + 1), 0.3, 1.0):
            z, _ = compute_b_of_k(k, a)
            assert a * z**k == pytest.approx((1 + z) ** (k - 1), rel=1e-9)


def test_b_of_k_rejects_bad_input():
    with pytest.raises(ValueError):
        compute_b_of_k(0, 0.5)
    with pytest.raises(ValueError):
        compute_b_of_k(2, 1.5)


def test_poly_params_values():
    p1 = compute_poly_params(1)
    assert (p1.lam, p1.mu) == (1.0, 0.0)
    p2 = compute_poly_params(2, self_check=True)
    assert p2.mu == 0.5
    # a = mu for the t = 2 monomial: z0 = 2, b = 2, lambda = 2 b = 4
    assert p2.lam == pytest.approx(4.0, rel=1e-10)
    p3 = compute_poly_params(3, self_check=True)
    assert p3.mu == pytest.approx(2 / 3)
    assert p3.lam > p2.lam


def _lambda_with_a_scaled_by_t(k):
    # the alternative choice a = mu t / (t - 1), capped at 1
    mu, lam = (k - 1) / k, 1.0
    for t in range(2, k + 1):
        lam = max(lam, t * compute_b_of_k(t - 1, min(mu * t / (t - 1), 1.0))[1])
    return lam


def test_a_scaled_by_t_verifies_for_squares_only():
    assert _lambda_with_a_scaled_by_t(2) == pytest.approx(3.0)
    assert verify_smoothness(power(2), range(8), SmoothnessParams(3.0, 0.5))
    cube = SmoothnessParams(_lambda_with_a_scaled_by_t(3), 2 / 3)
    assert not verify_smoothness(power(3), range(8), cube)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_mu_tightening_must_fail(k):
    p = compute_poly_params(k)
    assert verify_smoothness(power(k), range(8), p)
    tight = SmoothnessParams(p.lam, max(p.mu - 0.3, 0.0))
    assert not verify_smoothness(power(k), range(8), tight)


def test_log_scaled_variant():
    p = compute_poly_params(3, "log_scaled", self_check=True)
    assert p.mu == pytest.approx(2 / (3 * math.log(3)))
    assert p.lam >= compute_poly_params(3).lam


def test_poly_lambda_monotone_in_mu():
    # a smaller mu must be paid for with a larger lambda
    assert poly_lambda(3, 0.2) > poly_lambda(3, 0.6)


def test_verifiers_on_mixed_polynomial():
    f = PolynomialLoadCost([0, 0.3, 0.7, 0.2], {e: 1.0 + 0.1 * e for e in range(7)})
    p = compute_poly_params(3)
    assert verify_smoothness(f, {e: 1.0 for e in range(7)}, p)
    assert verify_local_smoothness(f, range(7), p)
