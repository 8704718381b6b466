import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circharvest.model import DomainError, ModelParams, ParameterError
from circharvest.nondurable import (
    ConstantSharePlan,
    aggregate_revenue_closed,
    aggregate_revenue_oracle,
    golden_section_max,
    optimize_constant_share,
    per_round_revenue,
    sweep_objective,
)

P = ModelParams.from_net_growth(0.15, horizon=10.0, round_time=5.0)


def test_plan_validation():
    with pytest.raises(DomainError):
        ConstantSharePlan(1.2, 5.0)
    with pytest.raises(ParameterError):
        ConstantSharePlan(0.2, 0.0)


def test_zero_share_earns_nothing():
    assert aggregate_revenue_closed(ConstantSharePlan(0.0, 5.0), P) == 0.0
    assert aggregate_revenue_oracle(ConstantSharePlan(0.0, 5.0), P, 64) == 0.0


def test_single_round_value():
    # one full round: alpha (1 - alpha) 2 pi y0 (e^{sigma theta} - 1)/(sigma theta)
    a = 0.3
    expected = a * (1 - a) * 2 * math.pi * math.expm1(1.5) / 1.5
    assert math.isclose(aggregate_revenue_closed(ConstantSharePlan(a, 10.0), P), expected, rel_tol=1e-13)


def test_frozen_two_round_optimum():
    a, g = optimize_constant_share(5.0, P)
    assert abs(a - 0.27950977706) < 1e-7
    assert abs(g - 3.64379174448) < 1e-9


def test_closed_form_matches_term_sum():
    for theta in (1.0, 2.0, 2.5, 5.0):
        for a in (0.05, 0.2, 0.4, 0.9):
            plan = ConstantSharePlan(a, theta)
            n = int(round(10.0 / theta))
            direct = math.fsum(per_round_revenue(k, plan, P) for k in range(1, n + 1))
            assert math.isclose(aggregate_revenue_closed(plan, P), direct, rel_tol=1e-11, abs_tol=1e-12)


def test_singular_denominator_is_finite():
    # alpha + e^{-sigma theta} - 1 = 0
    theta = 2.0
    a = 1.0 - math.exp(-0.15 * theta)
    g = aggregate_revenue_closed(ConstantSharePlan(a, theta), P)
    o = aggregate_revenue_oracle(ConstantSharePlan(a, theta), P)
    assert math.isfinite(g) and abs(g - o) < 1e-7


def test_zero_net_growth_limit():
    p0 = ModelParams.from_net_growth(0.0, horizon=10.0)
    g = aggregate_revenue_closed(ConstantSharePlan(0.2, 5.0), p0)
    # alpha (1-alpha) 2 pi + alpha (1 - 2 alpha)(1 - alpha) 2 pi
    expected = 2 * math.pi * (0.2 * 0.8 + 0.2 * 0.6 * 0.8)
    assert math.isclose(g, expected, rel_tol=1e-12)


def test_oracle_heterogeneous_stock():
    # doubling the stock everywhere doubles the revenue
    plan = ConstantSharePlan(0.3, 5.0)
    base = aggregate_revenue_oracle(plan, P, 256)
    assert math.isclose(aggregate_revenue_oracle(plan, P, 256, np.full(256, 2.0)), 2 * base, rel_tol=1e-13)
    with pytest.raises(ParameterError):
        aggregate_revenue_oracle(plan, P, 256, np.ones(3))


def test_golden_section():
    assert abs(golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-10) - 0.3) < 1e-9


def test_sweep_table_and_validation():
    table = sweep_objective([2.5, 5.0], [0.1, 0.2], P)
    assert len(table.rows) == 4
    assert next(table.records())[-1] == "closed-form"
    with pytest.raises(ParameterError):
        sweep_objective([5.0], [], P)
    threaded = sweep_objective([2.5, 5.0], [0.1, 0.2], P, threads=2)
    assert threaded.rows == table.rows


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.floats(0.01, 0.99), st.floats(-0.2, 0.3))
def test_closed_form_equals_oracle_on_whole_rounds(k, a, sigma):
    p = ModelParams.from_net_growth(sigma, horizon=10.0)
    plan = ConstantSharePlan(a, 10.0 / k)
    c = aggregate_revenue_closed(plan, p)
    o = aggregate_revenue_oracle(plan, p, 2048)
    assert abs(c - o) / max(1.0, abs(c)) < 1e-7
