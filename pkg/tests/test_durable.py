import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circharvest.durable import (
    RoundShares,
    closed_form_two_round,
    durable_gradient,
    durable_objective,
    export_row,
    growth_factors_from_params,
    slow_growth_share,
    solve_case,
    solve_monopoly,
)
from circharvest.model import DomainError, ModelParams, ParameterError


def test_objective_formula_by_hand():
    s = RoundShares([0.2, 0.3], [1.0, 1.5], 2.0)
    expected = 2.0 * (0.2 * 0.8 * 1.0 + 0.3 * 0.5 * 1.5 * 0.8)
    assert math.isclose(durable_objective(s), expected, rel_tol=1e-15)


def test_objective_domain():
    with pytest.raises(DomainError):
        durable_objective(RoundShares([0.7, 0.6], [1.0, 1.0]))
    with pytest.raises(DomainError):
        durable_objective(RoundShares([-0.1, 0.5], [1.0, 1.0]))
    with pytest.raises(ParameterError):
        RoundShares([0.1], [1.0, 2.0])


def test_two_round_closed_form_example():
    a1, a2 = closed_form_two_round(1.0, 11 / 9)
    sol = solve_monopoly(2, (1.0, 11 / 9))
    np.testing.assert_allclose(sol.alpha, (a1, a2), atol=1e-10)
    assert abs(a1 - 0.224) < 1e-3 and abs(a2 - 0.388) < 1e-3
    with pytest.raises(DomainError):
        closed_form_two_round(1.0, 2.0)


def test_case_two_prefix_is_exact():
    sol = solve_case((1.0, 1.0), zero_prefix=1)
    assert sol.case_tag == "II"
    assert tuple(sol.alpha) == (0.0, 0.5)


def test_interior_wins_ties():
    sol = solve_monopoly(2, (1.0, 1.0))
    assert sol.case_tag == "I" and sol.zero_prefix == 0
    assert len(sol.candidates) >= 1


def test_export_row_and_helpers():
    sol = solve_monopoly(3, (1.0, 1.0, 1.0))
    row = export_row(sol)
    assert row[0] == 3 and row[1] == "I" and len(row) == 7
    assert slow_growth_share(4) == 0.2
    f = growth_factors_from_params(ModelParams(0.2, 0.05, round_time=2.0), 3)
    np.testing.assert_allclose(f, np.exp([0.0, 0.3, 0.6]))


def _brute_force(f, step=0.01):
    grid = np.arange(0.0, 1.0 + 1e-12, step)
    best = -np.inf
    for x in itertools.product(grid, repeat=len(f)):
        if sum(x) <= 1.0:
            best = max(best, durable_objective(RoundShares(x, f)))
    return best


@pytest.mark.parametrize("f", [(1.0, 1.1), (1.0, 2.0), (1.3, 1.0), (1.0, 1.05, 1.2)])
def test_monopoly_beats_grid_search(f):
    sol = solve_monopoly(len(f), f)
    assert sol.objective >= _brute_force(np.array(f), 0.01 if len(f) == 2 else 0.05) - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.5, 2.0), min_size=2, max_size=5), st.integers(0, 10_000))
def test_gradient_matches_finite_difference(f, seed):
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.ones(len(f) + 1))[: len(f)] * 0.9
    s = RoundShares(x, f)
    g = durable_gradient(s)
    h = 1e-6
    for m in range(len(f)):
        e = np.zeros(len(f))
        e[m] = h
        fd = (durable_objective(RoundShares(x + e, f)) - durable_objective(RoundShares(x - e, f))) / (2 * h)
        assert abs(g[m] - fd) < 1e-7


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.6, 1.8), min_size=2, max_size=4))
def test_solution_is_feasible_and_stationary(f):
    sol = solve_monopoly(len(f), f)
    assert sol.shares.in_simplex()
    assert sol.gradient_residual < 1e-9
    # no feasible coordinate move improves the objective
    x = sol.alpha
    for m in range(len(f)):
        for d in (-1e-4, 1e-4):
            y = x.copy()
            y[m] += d
            if y[m] >= 0 and y.sum() <= 1:
                assert durable_objective(RoundShares(y, f)) <= sol.objective + 1e-12


def test_zero_share_inside_the_horizon():
    # a poor middle round is skipped entirely
    sol = solve_monopoly(3, (1.5, 0.75, 1.5))
    assert sol.case_tag == "boundary"
    assert sol.alpha[1] == 0.0 and sol.alpha[0] > 0 and sol.alpha[2] > 0
    assert sol.objective > 0.375
