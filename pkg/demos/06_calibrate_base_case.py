"""
Rebuilding and checking the bundled test case
=============================================

The bundled scenario is generated, not hand written.  This script

1. screens generator seeds for cases whose targets have a unique best price
   that sits near the feeder limit,
2. measures the day the belief passes 0.95 on calibration seeds (100-179),
   which are disjoint from the seeds the test-suite uses, and
3. optionally rewrites the data files (``--write DIR``).

The slow part is step 2 (80 one-year runs, about 20 s).
"""
import argparse

import numpy as np

from contsrtp.grid import bundled_network
from contsrtp.harness import run_scenario
from contsrtp.scenario import load_scenario
from contsrtp.synthetic import BASE_NOISE, GeneratorConfig, generate, screen, write_base_case

parser = argparse.ArgumentParser()
parser.add_argument("--scan", type=int, default=40, help="generator seeds to screen")
parser.add_argument("--seed", type=int, default=GeneratorConfig.seed, help="generator seed to build")
parser.add_argument("--write", default="demo_out/case", help="where to write the case files")
args = parser.parse_args()

topo = bundled_network()
passing = []
for seed in range(args.scan):
    cfg = GeneratorConfig(seed=seed)
    try:
        case = generate(cfg)
    except ValueError:  # candidates too close to tell apart
        continue
    if screen(*case, BASE_NOISE, topo, cfg).acceptable(cfg.mu):
        passing.append(seed)
print("generator seeds passing the screen:", passing)

cfg = GeneratorConfig(seed=args.seed)
case = generate(cfg)
s = screen(*case, BASE_NOISE, topo, cfg)
print("\nseed", args.seed)
print("  clairvoyant price per target:", s.best)
print("  its violation probability   :", np.round(s.risk, 3))
print("  unconstrained optimum's risk:", np.round(s.free_risk, 2))
print("  cost margin to runner-up    :", np.round(s.gap, 1))

sc = load_scenario(write_base_case(args.write, cfg))
crossings = []
for seed in range(100, 180):
    mass = np.array([r.posterior_mass_on_true for r in run_scenario(sc.replace(seed=seed)).node_records()])
    crossings.append(int(np.argmax(mass >= 0.95)) + 1 if (mass >= 0.95).any() else np.inf)
crossings = np.array(crossings)
print("\ncrossing day on calibration seeds: median", np.median(crossings),
      "quartiles", np.percentile(crossings, [25, 75]), "share by day 365", np.mean(crossings <= 365))

# chance that ten fresh seeds give >= 8 crossings and a median in [100, 250]
rng = np.random.default_rng(0)
draws = np.array([rng.choice(crossings, 10, replace=False) for _ in range(4000)])
ok = ((draws <= 365).sum(axis=1) >= 8) & (np.abs(np.median(draws, axis=1) - 175) <= 75)
print(f"resampled chance a 10-seed batch lands in the target window: {ok.mean():.2f}")
