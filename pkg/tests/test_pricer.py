import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contsrtp.bandit import init_prior
from contsrtp.clusters import INTERRUPTIBLE, ClusterSpec
from contsrtp.errors import ConfigurationError, NoFeasiblePrice
from contsrtp.grid import load_network
from contsrtp.population import PreferenceNoiseConfig, SensitivityModel, expected_load, realize_load
from contsrtp.pricer import (
    ChanceConfig,
    ChanceMode,
    GridContext,
    PricingModel,
    PriceSignal,
    clairvoyant_price,
    constraint_probability,
    constraint_probability_mc,
    expected_cost,
    fallback_index,
    load_prices,
    load_targets,
    price_grid,
    satisfaction,
    select_price,
)

HEADER = "line_index,parent_node,child_node,R_ohm,X_ohm,Smax_kVA\n"
ONE_LINE = load_network(HEADER + "1,0,1,0.0242,0.0482,54\n")
THREE = load_network(HEADER + "1,0,1,2.0,2.0,40\n2,1,2,3.0,3.0,20\n3,1,3,2.5,2.0,30\n")

SPECS = [
    ClusterSpec(INTERRUPTIBLE, 1, 3, energy=8.0, rho=2.0, beta=3.0),
    ClusterSpec(INTERRUPTIBLE, 2, 4, energy=6.0, rho=2.0, beta=2.0),
]
NOISE = PreferenceNoiseConfig(0.5, 0.3, False)
PRICES = price_grid(0.1, 0.3, 4)


def test_flow_at_limit_is_a_coin_flip():
    grid = GridContext(ONE_LINE, 1)
    sat = satisfaction(np.array([54.0]), np.array([4.0]), grid)
    assert sat[2, 0, 0] == pytest.approx(0.5, abs=1e-12)


def test_deterministic_load_inside_limits():
    grid = GridContext(ONE_LINE, 1)
    sat = satisfaction(np.array([10.0, 53.0]), np.zeros(2), grid)
    assert np.all(sat == 1.0)
    assert satisfaction(np.array([55.0]), np.zeros(1), grid)[2, 0, 0] == 0.0


def small_case(rng, topo):
    node = int(rng.integers(1, topo.node_count + 1))
    grid = GridContext(topo, node)
    theta = SensitivityModel(rng.uniform(0.5, 2.0, 4), 1)
    price = PRICES[int(rng.integers(len(PRICES)))].price
    # scale betas so the binding constraint sits somewhere interesting
    specs = [ClusterSpec(s.kind, s.t1, s.t2, s.energy, s.rho, beta=s.beta * rng.uniform(2, 12)) for s in SPECS]
    return grid, theta, price, specs


def test_analytic_matches_monte_carlo_entrywise():
    rng = np.random.default_rng(17)
    n = 40_000
    for topo in (ONE_LINE, THREE):
        for _ in range(3):
            grid, theta, price, specs = small_case(rng, topo)
            exact = constraint_probability(theta, price, grid, specs, NOISE).stacked()
            mc = constraint_probability_mc(theta, price, grid, specs, NOISE, n_samples=n, rng=rng).stacked()
            se = np.sqrt(exact * (1 - exact) / n)
            assert np.all(np.abs(mc - exact) <= 4.5 * se + 1e-12)


def test_mixture_probability_is_weighted():
    grid = GridContext(THREE, 2)
    models = [SensitivityModel(np.full(4, s), i) for i, s in enumerate((0.3, 0.6))]
    prior = init_prior(models, [0.25, 0.75])
    mix = constraint_probability(prior, PRICES[5].price, grid, SPECS, NOISE).stacked()
    parts = [constraint_probability(m, PRICES[5].price, grid, SPECS, NOISE).stacked() for m in models]
    np.testing.assert_allclose(mix, 0.25 * parts[0] + 0.75 * parts[1])


def test_expected_cost_matches_simulation():
    theta = SensitivityModel(np.full(4, 1.0), 1)
    price, target = PRICES[9].price, np.array([3.0, 1.0, 4.0, 1.5])
    rng = np.random.default_rng(8)
    sims = [((realize_load(theta, price, SPECS, NOISE, rng).load - target) ** 2).sum() for _ in range(40_000)]
    exact = expected_cost(theta, price, target, SPECS, NOISE)
    assert abs(np.mean(sims) - exact) < 4 * np.std(sims) / np.sqrt(len(sims))


def test_expected_cost_zero_and_variance_only():
    quiet = PreferenceNoiseConfig(0.0, 0.0, True)
    theta = SensitivityModel(np.full(4, 1.0), 1)
    mean, _ = expected_load(theta, PRICES[3].price, SPECS, quiet)
    assert expected_cost(theta, PRICES[3].price, mean, SPECS, quiet) == pytest.approx(0.0, abs=1e-24)
    mean, var = expected_load(theta, PRICES[3].price, SPECS, NOISE)
    assert expected_cost(theta, PRICES[3].price, mean, SPECS, NOISE) == pytest.approx(var.sum())


def brute_select(theta, target, specs, grid, mu, prices):
    best, best_cost = None, np.inf
    for p in prices:
        if grid is not None and not constraint_probability(theta, p.price, grid, specs, NOISE).feasible(mu):
            continue
        c = expected_cost(theta, p.price, target, specs, NOISE)
        if c < best_cost:
            best, best_cost = p.id, c
    return best


def test_select_price_brute_force():
    rng = np.random.default_rng(23)
    checked = 0
    for _ in range(30):
        grid, theta, _, specs = small_case(rng, THREE)
        target = rng.uniform(0, 8, 4)
        ref = brute_select(theta, target, specs, grid, 0.1, PRICES)
        cfg = ChanceConfig(ChanceMode.SET_A, 0.1, 0.1)
        if ref is None:
            with pytest.raises(NoFeasiblePrice):
                select_price(theta, target, PRICES, cfg, specs=specs, noise=NOISE, grid=grid)
            continue
        got = select_price(theta, target, PRICES, cfg, specs=specs, noise=NOISE, grid=grid)
        assert got.id == ref
        free = select_price(theta, target, PRICES, ChanceConfig(ChanceMode.UNCONSTRAINED), specs=specs, noise=NOISE)
        assert free.id == brute_select(theta, target, specs, None, 0.1, PRICES)
        checked += 1
    assert checked >= 10


def test_single_price_set():
    theta = SensitivityModel(np.ones(4), 1)
    got = select_price(theta, np.ones(4), [PRICES[7]], ChanceConfig(ChanceMode.SET_A), specs=SPECS, noise=NOISE,
                       grid=GridContext(THREE, 2))
    assert got is PRICES[7]


def test_constraints_exclude_risky_cheap_price():
    # the unconstrained optimum overloads line 2; the constrained choice must not
    grid = GridContext(THREE, 2)
    theta = SensitivityModel(np.full(4, 0.2), 1)
    specs = SPECS
    target = np.full(4, 40.0)
    free = select_price(theta, target, PRICES, ChanceConfig(ChanceMode.UNCONSTRAINED), specs=specs, noise=NOISE)
    assert constraint_probability(theta, free.price, grid, specs, NOISE).min() < 0.9
    for mode in (ChanceMode.SET_A, ChanceMode.SET_B):
        got = select_price(theta, target, PRICES, ChanceConfig(mode, 0.1, 0.1), specs=specs, noise=NOISE, grid=grid,
                           prior=init_prior([theta]))
        assert got.id != free.id
        assert constraint_probability(theta, got.price, grid, specs, NOISE).feasible(0.1)


def test_set_b_with_point_prior_equals_set_a():
    rng = np.random.default_rng(29)
    for _ in range(20):
        grid, theta, _, specs = small_case(rng, THREE)
        target = rng.uniform(0, 8, 4)
        prior = init_prior([theta])
        picks = []
        for mode in (ChanceMode.SET_A, ChanceMode.SET_B):
            try:
                picks.append(select_price(theta, target, PRICES, ChanceConfig(mode, 0.1, 0.1), specs=specs,
                                          noise=NOISE, grid=grid, prior=prior).id)
            except NoFeasiblePrice as exc:
                picks.append(("fallback", exc.fallback.id))
        assert picks[0] == picks[1]


def test_no_feasible_price_carries_fallback():
    tight = load_network(HEADER + "1,0,1,0.1,0.1,0.01\n")
    theta = SensitivityModel(np.ones(4), 1)
    with pytest.raises(NoFeasiblePrice) as info:
        select_price(theta, np.ones(4), PRICES, ChanceConfig(ChanceMode.SET_A), specs=SPECS, noise=NOISE,
                     grid=GridContext(tight, 1))
    assert np.all(info.value.fallback.price == 0.3)


def test_fallback_index():
    assert fallback_index([[1, 2], [2, 2], [1, 1]]) == 1
    assert fallback_index([[1, 3], [2, 1]]) == 0


def test_clairvoyant_is_set_a_under_truth():
    grid = GridContext(THREE, 3)
    theta = SensitivityModel(np.full(4, 0.4), 2)
    target = np.full(4, 5.0)
    for mode in ChanceMode:
        cfg = ChanceConfig(mode, 0.1, 0.3)
        got = clairvoyant_price(theta, target, PRICES, cfg, specs=SPECS, noise=NOISE, grid=grid)
        ref_mode = ChanceMode.UNCONSTRAINED if mode is ChanceMode.UNCONSTRAINED else ChanceMode.SET_A
        ref = select_price(theta, target, PRICES, ChanceConfig(ref_mode, 0.1), specs=SPECS, noise=NOISE, grid=grid)
        assert got.id == ref.id


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.floats(0.01, 0.5))
def test_mixture_constraint_bounds_the_true_model(k, seed, mu):
    # sum_j w_j s_j >= 1 - nu and s_j <= 1 imply s_k >= 1 - nu / w_k
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(k))
    sats = 1.0 - rng.beta(0.5, 3.0, (k, 5)) * rng.random((k, 1))
    for j in range(k):
        nu = mu * w[j]
        if (w @ sats).min() >= 1 - nu:
            assert sats[j].min() >= 1 - mu - 1e-12


def test_mixture_feasibility_implies_single_feasibility():
    grid = GridContext(THREE, 2)
    thetas = [np.full(4, s) for s in (0.1, 0.15, 0.2, 0.3)]
    pm = PricingModel(thetas, PRICES, [ClusterSpec(s.kind, s.t1, s.t2, s.energy, s.rho, beta=s.beta * 2) for s in SPECS],
                      NOISE, grid)
    w = np.array([0.1, 0.2, 0.3, 0.4])
    for k in range(4):
        mix = pm.feasible_mixture(w, 0.1 * w[k])
        assert np.all(pm.feasible_single(k, 0.1)[mix])


def test_pricing_model_matches_direct_computation():
    grid = GridContext(THREE, 2)
    thetas = [np.full(4, 0.5), np.linspace(0.3, 0.9, 4)]
    pm = PricingModel(thetas, PRICES, SPECS, NOISE, grid)
    target = np.array([2.0, 3.0, 1.0, 0.5])
    costs = pm.costs(target)
    for k, th in enumerate(thetas):
        for j in (0, 5, 15):
            assert costs[k, j] == pytest.approx(expected_cost(th, PRICES[j].price, target, SPECS, NOISE))
            assert pm.min_sat()[k, j] == pytest.approx(
                constraint_probability(SensitivityModel(th), PRICES[j].price, grid, SPECS, NOISE).min()
            )


def test_price_files():
    prices = load_prices(io.StringIO("price_id,p1,p2\n0,0.1,0.3\n1,0.3,0.3\n"))
    assert [p.id for p in prices] == [0, 1]
    targets = load_targets(io.StringIO("target_id,v1,v2\n1,2.0,3.0\n"))
    np.testing.assert_array_equal(targets[0].target, [2.0, 3.0])
    with pytest.raises(ConfigurationError):
        load_prices(io.StringIO("price_id,p1\n0,0.0\n"))
    with pytest.raises(ConfigurationError):
        load_prices(io.StringIO("price_id,p1\n0,0.1\n0,0.2\n"))


def test_price_grid_bits():
    grid = price_grid(0.1, 0.3, 3)
    assert len(grid) == 8
    np.testing.assert_array_equal(grid[5].price, [0.3, 0.1, 0.3])
    assert isinstance(grid[0], PriceSignal)
