import csv
import math

import numpy as np
import pytest
from conftest import supersolution_slack
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import expm_theta

from mmquote import (
    ContractError,
    DomainError,
    IntensityModel,
    Penalty,
    SingleAssetProblem,
    StepSizeError,
    exponential_oracle,
    quotes_from_theta,
    solve_theta,
    value_function,
)
from mmquote.errors import UnsupportedModelError
from mmquote.single_asset import time_grid


def small(**changes):
    base = dict(sigma=0.3, gamma=0.5, xi=0.5, delta_qty=1.0, Q=3.0, T=20.0, bid_intensity=IntensityModel.exponential(1.0, 1.5))
    base.update(changes)
    return SingleAssetProblem(**base)


def test_grid_and_validation():
    p = small()
    np.testing.assert_array_equal(p.inventory_grid, [-3, -2, -1, 0, 1, 2, 3])
    assert p.model == "A"
    assert small(xi=0.0).model == "B"
    with pytest.raises(ContractError):
        small(Q=2.5)
    with pytest.raises(ContractError):
        small(gamma=0.0)


def test_time_grid_ends_at_T_with_short_first_gap():
    tg = time_grid(10.0, 3.0)
    np.testing.assert_allclose(tg, [0.0, 1.0, 4.0, 7.0, 10.0])


@pytest.mark.parametrize("penalty", [Penalty(), Penalty("linear", 0.2), Penalty("quadratic", 0.05)])
def test_terminal_condition_exact(penalty):
    p = small(penalty=penalty)
    s = solve_theta(p, dt=0.5)
    np.testing.assert_array_equal(s.values[-1], -penalty(p.inventory_grid))


def test_zero_penalty_terminal_is_zero(ig_a):
    _, s = ig_a
    assert np.all(s.values[-1] == 0.0)


def test_symmetry_in_inventory(ig_a, ig_b):
    for _, s in (ig_a, ig_b):
        assert np.max(np.abs(s.values - s.values[:, ::-1])) <= 1e-10 * max(1.0, np.abs(s.values).max())


def test_supersolution_and_time_monotonicity(ig_a, ig_b, hy_a):
    for p, s in (ig_a, ig_b, hy_a):
        assert supersolution_slack(s, p) <= 0.0
        q = s.inventory_grid
        shifted = s.values + 0.5 * p.gamma * p.sigma**2 * q**2 * (p.T - s.time_grid)[:, None]
        # read backward from T, the shifted value can only grow
        assert np.all(np.diff(shifted, axis=0) <= 1e-9 * np.abs(shifted).max())


@pytest.mark.parametrize("xi", [0.0, 0.5])
def test_matches_matrix_exponential(xi):
    p = small(xi=xi, penalty=Penalty("quadratic", 0.1))
    s = solve_theta(p, dt=0.01)
    times = [0.0, 10.0, 19.0]
    _, ref = expm_theta(0.3, 0.5, xi, 1.0, 3.0, 1.0, 1.0, 1.5, 20.0, times, lambda q: 0.1 * q * q)
    for t, row in zip(times, ref):
        np.testing.assert_allclose(s.at(t), row, atol=5e-3)


@pytest.mark.parametrize("xi", [0.0, 0.5])
def test_oracle_matches_matrix_exponential(xi):
    p = small(xi=xi, penalty=Penalty("linear", 0.3), ask_intensity=IntensityModel.exponential(0.7, 1.5))
    o = exponential_oracle(p, dt=0.5)
    times = [0.0, 7.5, 19.5]
    _, ref = expm_theta(0.3, 0.5, xi, 1.0, 3.0, 1.0, 0.7, 1.5, 20.0, times, lambda q: 0.3 * np.abs(q))
    for t, row in zip(times, ref):
        np.testing.assert_allclose(o.at(t), row, rtol=0, atol=1e-7)


def test_oracle_no_volatility_growth():
    # sigma = 0: interior v grows like exp(2 A C (T - t)) on a wide grid
    lam = IntensityModel.exponential(1.0, 1.0)
    p = SingleAssetProblem(0.0, 0.5, 0.0, 1.0, 40.0, 1.0, lam)
    o = exponential_oracle(p, dt=0.1)
    v0 = np.exp(1.0 / 1.0 * o.at(0.0))
    assert v0[40] == pytest.approx(math.exp(2 * math.exp(-1) * 1.0), rel=1e-9)


def test_oracle_rejects_mixed_decay():
    p = small(ask_intensity=IntensityModel.exponential(1.0, 2.0))
    with pytest.raises(UnsupportedModelError):
        exponential_oracle(p)
    custom = IntensityModel.custom(lambda d: (np.exp(-d), -np.exp(-d), np.exp(-d)), 1.0)
    with pytest.raises(UnsupportedModelError):
        exponential_oracle(small(bid_intensity=custom))


def test_custom_intensity_matches_exponential_solve():
    custom = IntensityModel.custom(lambda d: (np.exp(-1.5 * d), -1.5 * np.exp(-1.5 * d), 2.25 * np.exp(-1.5 * d)), 1.5)
    a = solve_theta(small(), dt=0.5)
    b = solve_theta(small(bid_intensity=custom), dt=0.5)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_quotes_bounds_and_symmetry(ig_a):
    p, s = ig_a
    bid, ask = quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, p.Q)
    assert bid is None and ask is not None
    bid, ask = quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, -p.Q)
    assert ask is None and bid is not None
    bid, ask = quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, 0.0)
    assert bid == pytest.approx(ask, rel=1e-12)
    with pytest.raises(DomainError):
        quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, 0.5 * p.delta_qty)
    with pytest.raises(DomainError):
        quotes_from_theta(s, p.bid_context, p.ask_context, -1.0, 0.0)


def test_bid_increasing_in_inventory(ig_a, hy_a):
    for p, s in (ig_a, hy_a):
        bids = [quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, q)[0] for q in p.inventory_grid[:-1]]
        asks = [quotes_from_theta(s, p.bid_context, p.ask_context, 0.0, q)[1] for q in p.inventory_grid[1:]]
        assert np.all(np.diff(bids) > 0) and np.all(np.diff(asks) < 0)


def test_value_function():
    p = small()
    s = solve_theta(p, dt=0.5)
    theta0 = float(s.at(0.0)[3])
    assert value_function(s, "A", 0.0, -theta0, 0.0, 1.0) == pytest.approx(-1.0, rel=1e-15)
    pb = small(xi=0.0, penalty=Penalty("quadratic", 0.1))
    sb = solve_theta(pb, dt=0.5)
    assert value_function(sb, "B", pb.T, 2.0, 1.0, 3.0) == pytest.approx(2.0 + 3.0 - 0.1)
    zero = small(xi=0.0, T=1e-9)
    sz = solve_theta(zero, dt=1.0)
    assert value_function(sz, "B", zero.T, 0.0, 0.0, 5.0) == 0.0
    with pytest.raises(ContractError):
        value_function(s, "B", 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ContractError):
        value_function(sb, "A", 0.0, 0.0, 0.0, 1.0)


def test_step_size_error_on_tiny_iteration_budget():
    p = small(penalty=Penalty("quadratic", 50.0), sigma=3.0)
    with pytest.raises(StepSizeError):
        solve_theta(p, dt=5.0, max_iter=1)


def test_csv_round_trip(tmp_path):
    s = solve_theta(small(), dt=5.0)
    path = tmp_path / "theta.csv"
    s.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "q", "theta"]
    assert len(rows) == 1 + s.values.size
    back = np.array([float(r[2]) for r in rows[1:]]).reshape(s.values.shape)
    np.testing.assert_array_equal(back, s.values)
    assert float(rows[1][0]) == 0.0 and float(rows[1][1]) == -3.0


@settings(max_examples=15, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.floats(0.1, 2.0),
    st.sampled_from([0.0, 0.3, 1.0]),
    st.integers(1, 4),
    st.sampled_from(["zero", "linear", "quadratic"]),
)
def test_supersolution_property(sigma, gamma, xi, n, kind):
    pen = Penalty(kind, 0.0 if kind == "zero" else 0.2)
    p = SingleAssetProblem(sigma, gamma, xi, 1.0, float(n), 10.0, IntensityModel.exponential(1.0, 1.0), penalty=pen)
    s = solve_theta(p, dt=0.5)
    assert supersolution_slack(s, p) <= 1e-12
    # symmetric intensities and an even penalty give an even theta
    np.testing.assert_allclose(s.values, s.values[:, ::-1], rtol=0, atol=1e-10 * max(1.0, np.abs(s.values).max()))


def test_deterministic(ig_a):
    p, s = ig_a
    again = solve_theta(p, dt=1.0)
    np.testing.assert_array_equal(again.values, s.values)
