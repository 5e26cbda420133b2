import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothpd.core import InputError, SizeError, subset_table
from smoothpd.costlib import CoverageCost, NormSumCost, NormTerm, PiecewisePowerCost, PolynomialLoadCost
from smoothpd.multilinear import Sampled, eval_F, grad_all, grad_F, mobius, sample_F, subset_probabilities

SQUARE = PolynomialLoadCost([0, 0, 1])


def test_vertices_agree_with_f():
    f = CoverageCost([{0, 1}, {1, 2}, {3}, {0, 3}], [1.0, 2.0, 0.5, 3.0])
    table = subset_table(f, range(4))
    for mask in range(16):
        x = [(mask >> e) & 1 for e in range(4)]
        assert eval_F(f, x) == pytest.approx(table[mask], abs=1e-12)


def test_modular_is_linear():
    a = {0: 1.0, 1: 2.5, 2: 0.25}
    f = PolynomialLoadCost([0, 1], a)
    x = np.array([0.3, 0.9, 0.5])
    assert eval_F(f, x) == pytest.approx(sum(a[e] * x[e] for e in a))
    for e in a:
        assert grad_F(f, x, e) == pytest.approx(a[e])
        assert grad_F(f, np.zeros(3), e) == pytest.approx(a[e])


def test_square_values():
    assert eval_F(SQUARE, [0.5, 0.5]) == pytest.approx(1.5)
    assert grad_F(SQUARE, [0.5, 0.3], 1) == pytest.approx(2.0)
    assert grad_F(SQUARE, [0.3, 0.5], 1) == pytest.approx(1.6)


def test_dp_route_matches_exact():
    f = PolynomialLoadCost([0, 1, 0.5, 0.1], {e: float(e % 3 + 1) for e in range(9)})
    x = np.linspace(0.05, 0.95, 9)
    assert eval_F(f, x, "dp") == pytest.approx(eval_F(f, x, "exact"), rel=1e-12)
    assert np.allclose(grad_all(f, x, "dp"), grad_all(f, x, "exact"), rtol=1e-12)


def test_dp_rejects_fractional_weights():
    f = PolynomialLoadCost([0, 1], {0: 0.5})
    with pytest.raises(InputError):
        eval_F(f, [0.5], "dp")
    assert eval_F(f, [0.5], "auto") == pytest.approx(0.25)


def test_guards():
    with pytest.raises(SizeError):
        eval_F(NormSumCost([NormTerm(1.0, None, 2.0)]), np.full(21, 0.5))
    with pytest.raises(InputError):
        eval_F(SQUARE, [1.5])
    with pytest.raises(InputError):
        grad_F(SQUARE, [0.5], 3)
    with pytest.raises(InputError):
        eval_F(SQUARE, [0.5], "bogus")


def test_probabilities_and_mobius():
    x = np.array([0.2, 0.7, 0.4])
    p = subset_probabilities(x)
    assert p.sum() == pytest.approx(1.0)
    f = CoverageCost([{0}, {0, 1}, {2}])
    table = subset_table(f, range(3))
    m = mobius(table)
    for mask in range(8):
        sub = [t for t in range(8) if t & mask == t]
        assert sum(m[t] for t in sub) == pytest.approx(table[mask])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_gradient_constant_in_own_coordinate(seed, n):
    rng = np.random.default_rng(seed)
    f = PiecewisePowerCost(2.0, 1.0, 2.0, {e: float(w) for e, w in enumerate(rng.uniform(0.2, 1.5, n))})
    x = rng.random(n)
    e = int(rng.integers(n))
    a, b = x.copy(), x.copy()
    a[e], b[e] = 0.2, 0.9
    assert grad_F(f, a, e) == pytest.approx(grad_F(f, b, e), abs=1e-9)
    assert grad_F(f, x, e) >= -1e-9


def test_sampled_mode_is_seeded_and_close():
    f = PolynomialLoadCost([0, 1, 1], {e: 1.0 for e in range(8)})
    x = np.full(8, 0.4)
    exact = eval_F(f, x)
    mean, se = sample_F(f, x, 20_000, seed=3)
    assert mean == sample_F(f, x, 20_000, seed=3)[0]
    assert abs(mean - exact) <= 4 * se
    assert eval_F(f, x, Sampled(20_000, 3)) == mean


def test_sampled_coverage_rate():
    # |sampled - exact| <= 3 standard errors in at least 99% of seeded trials
    f = PolynomialLoadCost([0, 0.5, 1], {e: 1.0 + 0.5 * e for e in range(8)})
    x = np.linspace(0.1, 0.8, 8)
    exact = eval_F(f, x)
    hits = 0
    for seed in range(200):
        mean, se = sample_F(f, x, 100_000, seed)
        hits += abs(mean - exact) <= 3 * se
    assert hits >= 198
