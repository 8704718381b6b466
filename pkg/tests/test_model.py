import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circharvest.model import (
    TWO_PI,
    DomainError,
    ModelParams,
    ParameterError,
    arrival_time,
    grow,
    harvest_jump,
    location_at,
    round_schedule,
)


def test_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(0.1, horizon=0.0)
    with pytest.raises(ParameterError):
        ModelParams(0.1, round_time=-1.0)
    with pytest.raises(ParameterError):
        ModelParams(0.1, discount_rate=-0.01)
    p = ModelParams.from_net_growth(0.15, discount_rate=0.05)
    assert math.isclose(p.net_growth, 0.15)
    assert math.isclose(p.speed, TWO_PI / 5.0)


def test_round_schedule_counts():
    g = round_schedule(ModelParams(0.1, horizon=10.0, round_time=3.0), 8)
    assert (g.complete_rounds, g.residual) == (3, 1.0)
    assert g.shape == (4, 9)
    # the last row is cut at the residual time
    assert g.active_mask()[-1].sum() == np.count_nonzero(g.times < 1.0)
    assert np.all(g.active_mask(extended=False))


def test_round_schedule_snaps_to_integer_ratio():
    g = round_schedule(ModelParams(0.1, horizon=10.0, round_time=10.0 / 3.0))
    assert g.complete_rounds == 3 and g.residual == 0.0
    assert not g.active_mask()[-1].any()


def test_quadrature_integrates_exponential():
    p = ModelParams(0.1, horizon=10.0, round_time=4.0)
    g = round_schedule(p, 2048)
    approx = np.sum(g.quadrature_weights() * np.exp(0.3 * g.absolute_times()))
    exact = (math.exp(3.0) - 1) / 0.3
    # the partial round is cut at the last node below the residual
    assert abs(approx - exact) / exact < 2e-3


def test_location_and_arrivals():
    p = ModelParams(0.1, round_time=2.0)
    assert location_at(4.0, p) == 0.0
    assert math.isclose(location_at(0.5, p), math.pi / 2)
    x = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(location_at(arrival_time(3, x, p), p), x, atol=1e-12)
    with pytest.raises(ParameterError):
        location_at(-1.0, p)


def test_harvest_jump_and_domain():
    s = harvest_jump(2.0, 0.25)
    assert s.after == 1.5 and s.harvested == 0.5
    assert harvest_jump(3.0, 0.0).after == 3.0
    assert harvest_jump(3.0, 1.0).after == 0.0
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(DomainError):
            harvest_jump(1.0, bad)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.0, 10.0),
    st.floats(-1.0, 1.0),
    st.floats(0.0, 3.0),
    st.floats(0.0, 3.0),
)
def test_growth_composes(y, r, t1, t2):
    assert math.isclose(grow(grow(y, t1, r), t2, r), grow(y, t1 + t2, r), rel_tol=1e-12, abs_tol=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 50.0), st.integers(0, 20))
def test_location_is_periodic(theta, t, n):
    p = ModelParams(0.1, round_time=theta)
    a, b = location_at(t, p), location_at(t + n * theta, p)
    d = abs(a - b)
    assert min(d, TWO_PI - d) < 1e-9 * max(1.0, t + n * theta)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10.0), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6), st.floats(-0.5, 0.5))
def test_round_recursion_matches_direct_simulation(theta, shares, r):
    """Stock before round l+1 = e^{r theta} (1 - a_l) times stock before round l."""
    y = 1.0
    direct = y
    for a in shares:
        direct = grow(harvest_jump(direct, a).after, theta, r)
    product = y * math.exp(r * theta * len(shares)) * math.prod(1 - a for a in shares)
    assert math.isclose(direct, product, rel_tol=1e-10, abs_tol=1e-300)
