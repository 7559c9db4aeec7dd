"""Seeded generator for synthetic single-node pricing scenarios.

The generated case has EV-style interruptible clusters, the full high/low
price grid, a candidate set built around a true sensitivity vector, and
target profiles drawn from loads the population can actually produce.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .clusters import INTERRUPTIBLE, ClusterSpec, write_clusters
from .metrics import kl_marginal
from .population import PreferenceNoiseConfig, SensitivityModel
from .pricer import PricingModel, price_grid, write_vectors


BASE_NOISE = PreferenceNoiseConfig(sigma=0.5, sigma_obs=0.5, truncate_at_zero=True)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 9
    slots: int = 6
    clusters: int = 20
    candidates: int = 10
    targets: int = 10
    price_low: float = 0.10
    price_high: float = 0.30
    rho_range: tuple = (0.6, 1.2)  # kW per participating unit
    width_range: tuple = (2, 4)  # plug-in window in slots
    fill_range: tuple = (0.4, 1.0)  # energy in units of one full slot at the cap
    beta_range: tuple = (2.4, 5.6)
    theta_scale: float = 1.6
    near_offset: float = -0.0115  # relative gap of the near competitor
    spread: tuple = (0.8, 0.88, 0.93, 0.96, 1.04, 1.07, 1.12, 1.2)
    true_index: int = 3  # position of the true vector in the candidate list
    near_index: int = 4
    target_scale: tuple = (0.9, 1.3)
    kl_floor: float = 1e-4
    node: int = 10
    mu: float = 0.1


def ev_clusters(cfg: GeneratorConfig, rng) -> list[ClusterSpec]:
    """Charging clusters with random plug-in windows, energies and charger ratings."""
    dt = 24.0 / cfg.slots
    out = []
    for c in range(cfg.clusters):
        width = int(rng.integers(cfg.width_range[0], cfg.width_range[1] + 1))
        t1 = int(rng.integers(1, cfg.slots - width + 2))
        rho = float(np.round(rng.uniform(*cfg.rho_range), 2))
        # at most one slot of charging, so the cheapest schedule fits in one slot
        slots_needed = rng.uniform(*cfg.fill_range)
        energy = float(np.round(rho * dt * slots_needed, 2))
        beta = float(np.round(rng.uniform(*cfg.beta_range), 3))
        out.append(ClusterSpec(INTERRUPTIBLE, t1, t1 + width - 1, energy, rho, beta=beta, cluster_id=c + 1))
    return out


def candidate_set(cfg: GeneratorConfig, rng) -> tuple[list[SensitivityModel], int]:
    """Candidates around a random true vector; returns ``(models, true_id)``.

    One candidate is a small uniform scaling of the truth (slow to rule out),
    the others are rescaled and reshaped copies that are easy to tell apart.
    """
    base = cfg.theta_scale / (cfg.slots * 0.5 * (cfg.price_low + cfg.price_high))
    star = base * rng.uniform(0.7, 1.3, cfg.slots)
    others = [star * f * rng.uniform(0.85, 1.15, cfg.slots) for f in cfg.spread]
    order = others[: cfg.true_index] + [star] + others[cfg.true_index :]
    near = star * (1.0 + cfg.near_offset)
    order.insert(cfg.near_index, near)
    order = order[: cfg.candidates]
    models = [SensitivityModel(np.round(v, 6), i + 1) for i, v in enumerate(order)]
    return models, cfg.true_index + 1


def target_profiles(cfg: GeneratorConfig, specs, star: SensitivityModel, prices, rng) -> np.ndarray:
    """Mean loads under the truth at random prices, perturbed and rescaled.

    Scales above one ask for more energy than the picked price delivers,
    which pushes the best price towards the flow limit.
    """
    noise = PreferenceNoiseConfig(0.0, 0.0, False)
    pm = PricingModel([star.theta], [p.price for p in prices], specs, noise)
    picks = rng.choice(len(prices), size=cfg.targets, replace=False)
    base = pm.mean[0, picks]
    wobble = rng.uniform(0.8, 1.2, base.shape)
    scale = rng.uniform(*cfg.target_scale, size=(cfg.targets, 1))
    return np.round(scale * base * wobble, 3)


def min_pairwise_kl(models, price, specs, noise) -> float:
    best = np.inf
    for i, a in enumerate(models):
        for b in models[i + 1 :]:
            best = min(best, kl_marginal(a, b, price, specs, noise))
    return best


@dataclass(frozen=True)
class Screen:
    """Per-target structure of a generated case under the truth.

    ``best`` is the clairvoyant price index, ``gap`` its cost margin over the
    runner-up, ``risk`` its violation probability under the truth and
    ``near_risk`` under the near competitor, ``free_risk`` the violation
    probability of the unconstrained optimum, ``agree`` the number of
    candidates whose own constrained choice equals ``best``.
    """

    best: np.ndarray
    gap: np.ndarray
    risk: np.ndarray
    near_risk: np.ndarray
    near_agrees: np.ndarray
    free_risk: np.ndarray
    agree: np.ndarray

    def acceptable(self, mu: float = 0.1) -> bool:
        risky_best = ((self.risk >= 0.05) & (self.risk <= 0.09)).sum()
        return bool(
            self.near_agrees.all()
            and (self.near_risk <= mu - 0.005).all()
            and (self.gap >= 1.0).all()
            and risky_best >= 1
            and (self.free_risk >= 0.3).sum() >= 3
            and np.median(self.agree) <= 4
        )


def screen(specs, prices, targets, models, true_id, noise, topology, cfg: GeneratorConfig) -> Screen:
    from .pricer import GridContext

    grid = GridContext(topology, cfg.node)
    ids = [m.id for m in models]
    k = ids.index(true_id)
    near = k + 1 if cfg.near_index > cfg.true_index else k - 1
    pm = PricingModel([m.theta for m in models], [p.price for p in prices], specs, noise, grid)
    risk = 1.0 - pm.min_sat()
    out = {f: [] for f in Screen.__dataclass_fields__}
    for v in targets:
        costs = pm.costs(v)
        choice = [pm.choose(costs[j], pm.feasible_single(j, cfg.mu))[0] for j in range(len(models))]
        i = choice[k]
        masked = np.sort(np.where(pm.feasible_single(k, cfg.mu), costs[k], np.inf))
        free = int(np.argmin(costs[k]))
        out["best"].append(i)
        out["gap"].append(masked[1] - masked[0] if np.isfinite(masked[1]) else np.inf)
        out["risk"].append(risk[k, i])
        out["near_risk"].append(risk[near, i])
        out["near_agrees"].append(choice[near] == i)
        out["free_risk"].append(risk[k, free])
        out["agree"].append(sum(c == i for c in choice) - 2)
    return Screen(**{f: np.array(v) for f, v in out.items()})


def generate(cfg: GeneratorConfig = GeneratorConfig(), noise: PreferenceNoiseConfig | None = None):
    """Build ``(clusters, prices, targets, models, true_id)``."""
    rng = np.random.default_rng(cfg.seed)
    specs = ev_clusters(cfg, rng)
    prices = price_grid(cfg.price_low, cfg.price_high, cfg.slots)
    models, true_id = candidate_set(cfg, rng)
    star = next(m for m in models if m.id == true_id)
    targets = target_profiles(cfg, specs, star, prices, rng)
    noise = BASE_NOISE if noise is None else noise
    floor = min_pairwise_kl(models, prices[0].price, specs, noise)
    if floor < cfg.kl_floor:
        raise ValueError(f"candidates too close: min pairwise KL {floor:.3g} < {cfg.kl_floor}")
    return specs, prices, targets, models, true_id


def write_case(out_dir: str, specs, prices, targets, models, suffix: str = "") -> dict:
    """Write the four data files; returns their paths by kind."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "clusters": os.path.join(out_dir, f"clusters{len(specs)}{suffix}.csv"),
        "prices": os.path.join(out_dir, f"prices{len(prices)}{suffix}.csv"),
        "targets": os.path.join(out_dir, f"targets{len(targets)}{suffix}.csv"),
        "thetas": os.path.join(out_dir, f"thetas{len(models)}{suffix}.csv"),
    }
    write_clusters(specs, paths["clusters"])
    write_vectors([(p.id, p.price) for p in prices], paths["prices"], "price_id", "p")
    write_vectors(list(enumerate(targets, start=1)), paths["targets"], "target_id", "v")
    write_vectors([(m.id, m.theta) for m in models], paths["thetas"], "theta_id", "th")
    return paths


BASE_INI = """\
; Calibrated single-node case: 20 charging clusters at node {node},
; the 64-signal high/low price grid, 10 candidates and 10 targets.
[scenario]
network = network37.csv
clusters = {clusters}
prices = {prices}
targets = {targets}
thetas = {thetas}
target_mode = iid
nodes = {node}
true_theta = {true_id}
horizon = 365
seed = 0
variant = ConTS-B

[noise]
sigma = {sigma}
sigma_obs = {sigma_obs}
truncate_at_zero = {truncate}

[chance]
mu = {mu}
nu = 0.1

[grid]
voltage_band = 0.05
"""


def write_base_case(out_dir: str, cfg: GeneratorConfig = GeneratorConfig(), noise: PreferenceNoiseConfig | None = None) -> str:
    """Generate the case, write its data files and ``base.ini``; returns the ini path."""
    noise = BASE_NOISE if noise is None else noise
    specs, prices, targets, models, true_id = generate(cfg, noise)
    paths = write_case(out_dir, specs, prices, targets, models)
    ini = os.path.join(out_dir, "base.ini")
    with open(ini, "w", encoding="utf-8") as fh:
        fh.write(
            BASE_INI.format(
                node=cfg.node,
                true_id=true_id,
                sigma=noise.sigma,
                sigma_obs=noise.sigma_obs,
                truncate=str(noise.truncate_at_zero).lower(),
                mu=cfg.mu,
                **{k: os.path.basename(v) for k, v in paths.items()},
            )
        )
    return ini
