import itertools

import numpy as np
import pytest

from smoothpd import generators as gen
from smoothpd.core import GeneralInstance, Request, SizeError, Strategy, total_cost
from smoothpd.costlib import CoverageCost, PolynomialLoadCost
from smoothpd.covering import CoveringRow
from smoothpd.multilinear import eval_F
from smoothpd.oracle import fractional_opt_grid, offline_opt_general

SQUARE = PolynomialLoadCost([0, 0, 1])


def _brute(inst):
    best = np.inf
    for choice in itertools.product(*(range(len(r.strategies)) for r in inst.requests)):
        best = min(best, total_cost(inst, dict(enumerate(choice))))
    return best


def test_empty_instance():
    assert offline_opt_general(GeneralInstance({0: SQUARE})) == (0.0, {})


def test_single_request_takes_cheapest():
    inst = GeneralInstance({0: SQUARE, 1: SQUARE}, (Request(0, (Strategy({0: 3.0}), Strategy({1: 2.0}))),))
    assert offline_opt_general(inst) == (4.0, {0: 1})


def test_two_by_two_spreads_load():
    both = (Strategy({0: 1.0}), Strategy({1: 1.0}))
    inst = GeneralInstance({0: SQUARE, 1: SQUARE}, (Request(0, both), Request(1, both)))
    value, assign = offline_opt_general(inst)
    assert value == 2.0 and assign == {0: 0, 1: 1}


@pytest.mark.parametrize("seed", range(15))
def test_matches_plain_enumeration(seed):
    inst = gen.general(6, 4, max_strategies=3, degree=1 + seed % 3, seed=seed)
    value, assign = offline_opt_general(inst)
    assert value == pytest.approx(_brute(inst), rel=1e-12)
    assert total_cost(inst, assign) == pytest.approx(value, rel=1e-12)


def test_product_guard():
    many = tuple(Strategy({e: 1.0}) for e in range(4))
    inst = GeneralInstance({e: SQUARE for e in range(4)}, tuple(Request(i, many) for i in range(12)))
    with pytest.raises(SizeError):
        offline_opt_general(inst)


def test_grid_single_row():
    f = PolynomialLoadCost([0, 1])
    res = fractional_opt_grid(f, [CoveringRow(0, {0: 1.0})], 1)
    assert res.value == pytest.approx(1.0) and res.integral == 1.0
    assert res.lower_bound <= res.value


def test_grid_modular_lp():
    f = PolynomialLoadCost([0, 1], {0: 1.0, 1: 10.0})
    res = fractional_opt_grid(f, [CoveringRow(0, {0: 1.0, 1: 1.0})], 2)
    assert res.value == pytest.approx(1.0)
    assert np.allclose(res.x, [1.0, 0.0])


def test_grid_fractional_beats_integral():
    # rows 2 x_e >= 1 allow x = (1/2, 1/2) with F = 1.5, while the only integral cover costs 4
    rows = [CoveringRow(0, {0: 2.0}), CoveringRow(1, {1: 2.0})]
    res = fractional_opt_grid(SQUARE, rows, 2)
    assert res.value == pytest.approx(eval_F(SQUARE, [0.5, 0.5]))
    assert res.integral == pytest.approx(4.0)


def test_refinement_never_increases_value():
    for seed in range(5):
        f, n, rows = gen.covering("polynomial", 3, 3, 2, seed=seed)
        coarse = fractional_opt_grid(f, rows, n, resolution=1 / 10)
        fine = fractional_opt_grid(f, rows, n, resolution=1 / 20)
        assert fine.value <= coarse.value + 1e-12
        assert fine.lower_bound <= fine.value + 1e-12
        assert coarse.lower_bound <= fine.value + 1e-9


def test_grid_guards():
    f = CoverageCost([{e} for e in range(7)])
    with pytest.raises(SizeError):
        fractional_opt_grid(f, [CoveringRow(0, {0: 1.0})], 7)
    with pytest.raises(ValueError):
        fractional_opt_grid(f, [CoveringRow(0, {0: 1.0})], 2, resolution=0.3)
    with pytest.raises(ValueError):
        fractional_opt_grid(f, [CoveringRow(0, {0: 0.4, 1: 0.4})], 2)


def test_grid_without_rows():
    res = fractional_opt_grid(SQUARE, [], 3)
    assert res.value == 0.0 and res.nodes == 0
