"""
How appliance clusters answer a price signal
============================================

Each cluster picks its cheapest feasible schedule.  The population load is
the participation-weighted sum of those schedules.
"""
import numpy as np

from contsrtp.clusters import INTERRUPTIBLE, UNINTERRUPTIBLE, ClusterSpec, min_cost_profile, population_profile_set
from contsrtp.population import PreferenceNoiseConfig, SensitivityModel, expected_load, realize_load
from contsrtp.pricer import price_grid

ev = ClusterSpec(INTERRUPTIBLE, t1=1, t2=3, energy=16.0, rho=2.0, beta=3.0)
washer = ClusterSpec(UNINTERRUPTIBLE, t1=2, t2=5, pulse=(1.5, 0.5), beta=2.0)

price = np.array([1, 3, 2, 9, 9, 9], dtype=float)
print("EV charging:", min_cost_profile(ev, price).power)
print("washer     :", min_cost_profile(washer, price).power)

# the whole high/low grid for six slots: bit t of the id is slot t+1 high
prices = price_grid(0.10, 0.30, 6)
print(len(prices), "price signals, e.g. id 5 =", prices[5].price)

pop = population_profile_set([ev, washer], [2.0, 1.0])
for pid in (0, 5, 63):
    print(f"price {pid:2d} -> population profile", pop.profile(prices[pid].price))

# participation falls as theta . p grows
theta = SensitivityModel(np.full(6, 2.0))
noise = PreferenceNoiseConfig(sigma=0.5, sigma_obs=0.2, truncate_at_zero=True)
for pid in (0, 63):
    mean, var = expected_load(theta, prices[pid].price, [ev, washer], noise)
    print(f"price {pid:2d}: mean load {np.round(mean, 2)}, sd {np.round(np.sqrt(var), 2)}")

rng = np.random.default_rng(0)
obs = realize_load(theta, prices[0].price, [ev, washer], noise, rng)
print("one simulated day at price 0:", np.round(obs.load, 2))
