import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import poisson_mle

from mmquote import (
    ConstantOffsetsPolicy,
    IdentifiabilityError,
    IntensityModel,
    MarketSimConfig,
    QuoteExposure,
    SingleAssetProblem,
    fit_exponential_intensity,
    simulate_paths,
)
from mmquote.calibration import exposures_from_report, log_likelihood, read_exposures, write_exposures
from mmquote.errors import ConfigError, ContractError


def synthetic(A=2.0, k=3.0, deltas=(0.0, 0.25, 0.5, 0.75, 1.0), duration=500.0, seed=0):
    rng = np.random.default_rng(seed)
    return [QuoteExposure(d, duration, int(rng.poisson(A * math.exp(-k * d) * duration))) for d in deltas]


def test_round_trip_on_poisson_counts():
    fit = fit_exponential_intensity(synthetic(duration=20000.0))
    assert fit.A == pytest.approx(2.0, rel=0.05)
    assert fit.k == pytest.approx(3.0, rel=0.05)


def test_exact_expected_counts_recover_parameters():
    A, k = 0.7, 12.0
    obs = [QuoteExposure(d, 1e6, round(A * math.exp(-k * d) * 1e6)) for d in np.linspace(0, 0.3, 7)]
    fit = fit_exponential_intensity(obs)
    assert fit.A == pytest.approx(A, rel=1e-4)
    assert fit.k == pytest.approx(k, rel=1e-4)


def test_matches_two_parameter_oracle():
    obs = synthetic(seed=3)
    fit = fit_exponential_intensity(obs)
    A, k, ll = poisson_mle([o.delta for o in obs], [o.duration for o in obs], [o.fills for o in obs])
    assert fit.A == pytest.approx(A, rel=1e-6)
    assert fit.k == pytest.approx(k, rel=1e-6)
    assert fit.log_likelihood >= ll - 1e-9 * abs(ll)


@pytest.mark.parametrize(
    "obs",
    [
        [QuoteExposure(0.5, 100.0, 10), QuoteExposure(0.5, 50.0, 4)],
        [QuoteExposure(0.1, 100.0, 0), QuoteExposure(0.5, 100.0, 0)],
        [QuoteExposure(0.1, 100.0, 7), QuoteExposure(0.5, 100.0, 0)],
    ],
    ids=["single-offset", "no-fills", "fills-at-one-offset"],
)
def test_unidentifiable_inputs(obs):
    with pytest.raises(IdentifiabilityError):
        fit_exponential_intensity(obs)


def test_increasing_fill_rate_has_no_maximum():
    obs = [QuoteExposure(0.1, 100.0, 1), QuoteExposure(0.5, 100.0, 50)]
    with pytest.raises(IdentifiabilityError):
        fit_exponential_intensity(obs)


def test_doubling_durations_halves_A():
    obs = synthetic(seed=5)
    a = fit_exponential_intensity(obs)
    b = fit_exponential_intensity([QuoteExposure(o.delta, 2 * o.duration, o.fills) for o in obs])
    # golden section resolves a flat optimum only to about sqrt(eps) in k
    assert b.A == pytest.approx(a.A / 2, rel=1e-7)
    assert b.k == pytest.approx(a.k, rel=1e-7)


def test_fit_dominates_random_probes():
    obs = synthetic(seed=7)
    fit = fit_exponential_intensity(obs)
    rng = np.random.default_rng(1)
    for _ in range(200):
        A = fit.A * math.exp(rng.uniform(-1, 1))
        k = fit.k * math.exp(rng.uniform(-1, 1))
        assert log_likelihood(obs, A, k) <= fit.log_likelihood + 1e-9
    assert log_likelihood(obs, fit.A, fit.k) == pytest.approx(fit.log_likelihood, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_order_invariance(seed):
    obs = synthetic(seed=seed % 50, duration=300.0)
    shuffled = list(obs)
    random.Random(seed).shuffle(shuffled)
    a = fit_exponential_intensity(obs)
    b = fit_exponential_intensity(shuffled)
    assert (a.A, a.k, a.log_likelihood) == (b.A, b.k, b.log_likelihood)


def test_csv_round_trip(tmp_path):
    obs = synthetic(seed=2)
    path = tmp_path / "obs.csv"
    write_exposures(path, obs)
    assert read_exposures(path) == obs


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("delta,time,fills\n0.1,1,1\n")
    with pytest.raises(ConfigError):
        read_exposures(bad)
    bad.write_text("delta,duration,fills\n0.1,abc,1\n")
    with pytest.raises(ConfigError) as exc:
        read_exposures(bad)
    assert "line 2" in exc.value.path


def test_exposure_contract():
    with pytest.raises(ContractError):
        QuoteExposure(0.1, 0.0, 1)
    with pytest.raises(ContractError):
        QuoteExposure(0.1, 1.0, -1)


def test_recovers_simulator_intensity():
    A, k = 0.5, 2.0
    lam = IntensityModel.exponential(A, k)
    obs = []
    for j, x in enumerate((0.0, 0.5, 1.0, 1.5, 2.0)):
        delta = x / k
        prob = SingleAssetProblem(1e-9, 0.1, 0.0, 1.0, 5000.0, 400.0, lam)
        cfg = MarketSimConfig(prob, n_paths=100, base_seed=50 + j, dt_sim=0.1)
        r = simulate_paths(cfg, ConstantOffsetsPolicy([delta], [delta]))
        obs.extend(exposures_from_report(r, np.array([delta, delta])))
    fit = fit_exponential_intensity(obs)
    # dt_sim keeps rate*dt below the thinning cap so no offset is clamped
    assert fit.A == pytest.approx(A, rel=0.05)
    assert fit.k == pytest.approx(k, rel=0.05)
