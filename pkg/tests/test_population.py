import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contsrtp.clusters import INTERRUPTIBLE, UNINTERRUPTIBLE, ClusterSpec, response_table
from contsrtp.errors import ConfigurationError, NonPositiveInnerProduct
from contsrtp.population import (
    PreferenceNoiseConfig,
    SensitivityModel,
    expected_load,
    inner,
    mean_adjustments,
    moment_table,
    realize_load,
    sample_adjustments,
)

SPECS = [
    ClusterSpec(INTERRUPTIBLE, 1, 3, energy=6.0, rho=1.0, beta=2.0),
    ClusterSpec(INTERRUPTIBLE, 2, 6, energy=8.0, rho=2.0, beta=3.0),
    ClusterSpec(UNINTERRUPTIBLE, 1, 4, pulse=(1.0, 0.5), beta=1.5),
]
PRICE = np.array([0.1, 0.3, 0.1, 0.3, 0.3, 0.1])
THETA = SensitivityModel(np.full(6, 2.0), 1)


def test_noise_free_adjustment_is_exact():
    noise = PreferenceNoiseConfig(0.0, 0.0, True)
    a = sample_adjustments(THETA, PRICE, SPECS, noise, np.random.default_rng(0))
    ip = 2.0 * PRICE.sum()
    np.testing.assert_allclose(a, [2.0 / ip, 3.0 / ip, 1.5 / ip], rtol=1e-15)
    doubled = sample_adjustments(THETA, 2 * PRICE, SPECS, noise, np.random.default_rng(0))
    np.testing.assert_allclose(doubled, a / 2)


def test_adjustment_moments():
    noise = PreferenceNoiseConfig(0.4, 0.0, False)
    rng = np.random.default_rng(1)
    draws = np.array([sample_adjustments(THETA, PRICE, SPECS, noise, rng) for _ in range(20_000)])
    mean = mean_adjustments(THETA, PRICE, SPECS)
    se = 0.4 / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    np.testing.assert_allclose(draws.std(axis=0), 0.4, rtol=0.03)


def test_truncation():
    noise = PreferenceNoiseConfig(5.0, 0.0, True)
    rng = np.random.default_rng(2)
    draws = np.array([sample_adjustments(THETA, PRICE, SPECS, noise, rng) for _ in range(500)])
    assert draws.min() == 0.0


def test_realized_load_noise_free():
    noise = PreferenceNoiseConfig(0.0, 0.0, True)
    obs = realize_load(THETA, PRICE, SPECS, noise, np.random.default_rng(0), day=3)
    mean, var = expected_load(THETA, PRICE, SPECS, noise)
    np.testing.assert_allclose(obs.load, mean, rtol=1e-14)
    assert obs.day == 3 and not var.any()


def test_load_moments_match_simulation():
    noise = PreferenceNoiseConfig(0.3, 0.2, False)
    rng, orng = np.random.default_rng(4), np.random.default_rng(5)
    prof = response_table(SPECS, [PRICE])[0]
    ys = np.array([realize_load(THETA, PRICE, SPECS, noise, rng, obs_rng=orng, profiles=prof).load for _ in range(20_000)])
    mean, var = expected_load(THETA, PRICE, SPECS, noise)
    se = np.sqrt(var / ys.shape[0])
    assert np.all(np.abs(ys.mean(axis=0) - mean) < 4 * se)
    np.testing.assert_allclose(ys.var(axis=0), var, rtol=0.05)


def test_same_seed_same_load():
    noise = PreferenceNoiseConfig(0.5, 0.3, True)
    a = realize_load(THETA, PRICE, SPECS, noise, np.random.default_rng(9)).load
    b = realize_load(THETA, PRICE, SPECS, noise, np.random.default_rng(9)).load
    np.testing.assert_array_equal(a, b)


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        SensitivityModel([1.0, 0.0])
    with pytest.raises(NonPositiveInnerProduct):
        inner(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        PreferenceNoiseConfig(-1.0)


def test_moment_table_matches_expected_load():
    noise = PreferenceNoiseConfig(0.5, 0.1, True)
    prices = [PRICE, PRICE[::-1].copy()]
    thetas = [THETA.theta, THETA.theta * np.linspace(0.5, 1.5, 6)]
    prof = response_table(SPECS, prices)
    mean, var = moment_table(thetas, prices, prof, np.array([s.beta for s in SPECS]), noise)
    for k, th in enumerate(thetas):
        for j, p in enumerate(prices):
            m, v = expected_load(th, p, SPECS, noise)
            np.testing.assert_allclose(mean[k, j], m, rtol=1e-13)
            np.testing.assert_allclose(var[j], v, rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_mean_energy_inverse_in_price(theta_scale, price_scale):
    noise = PreferenceNoiseConfig(0.5, 0.0, True)
    base, _ = expected_load(THETA, PRICE, SPECS, noise)
    scaled, _ = expected_load(THETA.theta * theta_scale, PRICE * price_scale, SPECS, noise)
    # profiles are scale invariant in price, so mean load scales as 1/(theta.p)
    np.testing.assert_allclose(scaled, base / (theta_scale * price_scale), rtol=1e-12)
