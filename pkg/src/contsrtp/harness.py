"""The daily learning-and-pricing loop, paired variant comparisons and sweeps.

Randomness comes from named streams derived from the scenario seed, so the
environment (targets, participation draws, observation noise) is identical
across variants run with the same seed.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .bandit import gaussian_loglik, init_prior, min_mass_bound, sample_index, update_weights
from .errors import AllZeroLikelihood
from .grid import NodalDemandSchedule, check_constraints, solve_lindistflow
from .metrics import DayRecord
from .pricer import ChanceMode, GridContext, PricingModel
from .scenario import Scenario, parse_variant, variant_mode

log = logging.getLogger(__name__)

STREAMS = {"targets": 0, "preferences": 1, "observation": 2, "sampling": 3, "exploration": 4}
NONREPEATING_ID_OFFSET = 10_000


def stream(seed: int, name: str, node: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, stream, node) triple."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[name], node))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class RunResult:
    scenario: Scenario
    records: dict  # node -> list[DayRecord]
    posterior: dict  # node -> list[(day, ids, weights)]
    system_violations: np.ndarray  # (days, 3) counts over the whole feeder
    mass_alerts: dict = field(default_factory=dict)  # node -> days below the minimum-mass bound
    likelihood_failures: dict = field(default_factory=dict)

    @property
    def node(self) -> int:
        return self.scenario.nodes[0]

    def node_records(self, node: int | None = None) -> list[DayRecord]:
        return self.records[self.node if node is None else node]


class _Node:
    """Per-node learner state and precomputed tables."""

    def __init__(self, sc: Scenario, node: int, grid: GridContext):
        self.node = node
        self.ids = [m.id for m in sc.thetas]
        thetas = [m.theta for m in sc.thetas]
        prices = [p.price for p in sc.prices]
        self.learner = PricingModel(thetas, prices, sc.learner_specs(), sc.noise, grid)
        self.truth = PricingModel(thetas, prices, sc.clusters, sc.noise, grid)
        self.beta_true = np.array([c.beta for c in sc.clusters])
        self.true_id = sc.true_theta[node]
        w = init_prior(sc.thetas, sc.prior_weights).weights
        self.weights = w
        self.prior0_true = float(w[self.ids.index(self.true_id)])
        self.sampling = stream(sc.seed, "sampling", node)
        self.exploration = stream(sc.seed, "exploration", node)
        self.preferences = stream(sc.seed, "preferences", node)
        self.observation = stream(sc.seed, "observation", node)
        self.committed = None  # (mode index, frozen weights) for TwoStage
        self.last_price = self.learner.fallback
        self.safe = None
        self.today = (0, False)  # (sampled index, fell back)

    @property
    def true_k(self) -> int:
        return self.ids.index(self.true_id)

    def safe_set(self, sc: Scenario) -> np.ndarray:
        if self.safe is None:
            if sc.safe_prices is not None:
                pos = {p.id: i for i, p in enumerate(sc.prices)}
                self.safe = np.array([pos[i] for i in sc.safe_prices])
            else:
                robust = (self.learner.min_sat() >= 1.0 - sc.mu - 1e-12).all(axis=0)
                robust[self.learner.fallback] = True
                self.safe = np.flatnonzero(robust)
        return self.safe


def _moments_under_belief(pm: PricingModel, weights, price_idx: int):
    mean = np.tensordot(weights, pm.mean[:, price_idx], axes=1)
    second = np.tensordot(weights, pm.mean[:, price_idx] ** 2, axes=1)
    return mean, pm.var[price_idx] + second - mean**2


def _targets(sc: Scenario):
    """Daily target sequence as (ids, profiles)."""
    rng = stream(sc.seed, "targets")
    base = np.array([t.target for t in sc.targets])
    tids = [t.id for t in sc.targets]
    if sc.target_mode == "fixed":
        sched = [sc.target_schedule[d % len(sc.target_schedule)] for d in range(sc.horizon)]
        lookup = {t.id: t.target for t in sc.targets}
        return sched, np.array([lookup[i] for i in sched])
    picks = rng.integers(len(sc.targets), size=sc.horizon)
    if sc.target_mode == "iid":
        return [tids[i] for i in picks], base[picks]
    # nonrepeating: every day a fresh, jittered version of a base profile
    jitter = np.exp(sc.target_jitter * rng.standard_normal((sc.horizon, base.shape[1])))
    ids = [NONREPEATING_ID_OFFSET + d for d in range(sc.horizon)]
    return ids, base[picks] * jitter


def run_scenario(sc: Scenario, out_dir: str | None = None) -> RunResult:
    """Simulate ``sc.horizon`` days and optionally write the CSV artifacts."""
    variant, stage_len = parse_variant(sc.variant)
    cfg_mode = variant_mode(sc.variant)
    topo = sc.topology
    limits = sc.limits
    slots = sc.slot_count
    n = topo.node_count
    background = np.zeros((n, slots)) if sc.background is None else sc.background
    nodes = [_Node(sc, node, GridContext(topo, node, limits, background)) for node in sc.nodes]
    coupled = len(nodes) > 1
    target_ids, target_vals = _targets(sc)
    clair_cache: dict = {}
    records = {st.node: [] for st in nodes}
    posterior = {st.node: [] for st in nodes}
    alerts = {st.node: [] for st in nodes}
    failures = {st.node: [] for st in nodes}
    system = np.zeros((sc.horizon, 3), dtype=int)
    n_prices = len(sc.prices)

    for d in range(sc.horizon):
        day = d + 1
        if sc.switch_day is not None and day == sc.switch_day:
            for st in nodes:
                st.true_id = sc.switch_to
        tid, target = target_ids[d], target_vals[d]
        chosen = {}
        for st in nodes:
            if coupled:
                _couple(st, nodes, chosen, background, sc)
            k_tilde = sample_index(st.weights, st.sampling)
            fell_back = False
            if variant == "Clairvoyant":
                idx, fell_back = _clairvoyant(st, target, sc.mu)
            elif variant == "TwoStage" and day <= stage_len:
                safe = st.safe_set(sc)
                idx = int(safe[st.exploration.integers(safe.size)])
            elif variant == "TwoStage":
                if st.committed is None:
                    st.committed = (int(np.argmax(st.weights)), st.weights.copy())
                k_mode, frozen = st.committed
                feas = st.learner.feasible_mixture(frozen, sc.nu)
                idx, fell_back = st.learner.choose(st.learner.costs(target)[k_mode], feas)
            else:
                if cfg_mode is ChanceMode.SET_A:
                    feas = st.learner.feasible_single(k_tilde, sc.mu)
                elif cfg_mode is ChanceMode.SET_B:
                    feas = st.learner.feasible_mixture(st.weights, sc.nu)
                else:
                    feas = np.ones(n_prices, dtype=bool)
                idx, fell_back = st.learner.choose(st.learner.costs(target)[k_tilde], feas)
            chosen[st.node] = idx
            st.last_price = idx
            st.today = (k_tilde, fell_back)

        # environment
        loads = {}
        for st in nodes:
            idx = chosen[st.node]
            k_true = st.true_k
            price = sc.prices[idx].price
            ip = sc.thetas[k_true].theta @ price
            a = st.beta_true / ip + sc.noise.sigma * st.preferences.standard_normal(st.beta_true.size)
            if sc.noise.truncate_at_zero:
                a = np.maximum(a, 0.0)
            y = a @ st.truth.profiles[idx] + sc.noise.sigma_obs * st.observation.standard_normal(slots)
            if sc.noise.truncate_at_zero:
                y = np.maximum(y, 0.0)
            loads[st.node] = y
        demand = background.copy()
        for node, y in loads.items():
            demand[node - 1] += y
        report = check_constraints(solve_lindistflow(topo, NodalDemandSchedule(demand)), limits)
        system[d] = [report.counts[k] for k in metrics.VIOLATION_KINDS]

        for st in nodes:
            idx, y = chosen[st.node], loads[st.node]
            k_true = st.true_k
            key = (tid, k_true) if sc.target_mode != "nonrepeating" else None
            if key is not None and key in clair_cache:
                opt_idx, opt_cost = clair_cache[key]
            else:
                opt_idx, _ = _clairvoyant(st, target, sc.mu)
                opt_cost = float(st.truth.costs(target)[k_true, opt_idx])
                if key is not None:
                    clair_cache[key] = (opt_idx, opt_cost)
            chosen_cost = float(st.truth.costs(target)[k_true, idx])
            # constraints on the root path of this node
            path_lines = topo.subtree_matrix[:, st.node - 1] > 0
            flags = {
                "under_voltage": int(report.under_voltage[path_lines].sum()),
                "over_voltage": int(report.over_voltage[path_lines].sum()),
                "overflow": int(report.overflow[path_lines].sum()),
            }
            learning = not (variant == "TwoStage" and st.committed is not None)
            if learning:
                ll = gaussian_loglik(y, st.learner.mean[:, idx], st.learner.var[idx])
                try:
                    st.weights = update_weights(st.weights, ll)
                except AllZeroLikelihood:
                    failures[st.node].append(day)
                    log.warning("day %d node %d: no candidate explains the load; belief kept", day, st.node)
            mass = float(st.weights[k_true])
            bound = min_mass_bound(st.prior0_true, sc.lam, n_prices)
            if mass < bound:
                alerts[st.node].append(day)
            k_tilde, fell_back = st.today
            records[st.node].append(
                DayRecord(
                    day=day,
                    target_id=int(tid),
                    chosen_price_id=sc.prices[idx].id,
                    optimal_price_id=sc.prices[opt_idx].id,
                    sampled_theta_id=st.ids[k_tilde],
                    realized_cost=float(((y - target) ** 2).sum()),
                    clairvoyant_expected_cost=opt_cost,
                    chosen_expected_cost_under_true=chosen_cost,
                    violation_flags=flags,
                    posterior_mass_on_true=mass,
                    fallback_flag=bool(fell_back),
                    true_violation_prob=float(1.0 - st.truth.min_sat()[k_true, idx]),
                    node=st.node,
                    variant=sc.variant,
                )
            )
            posterior[st.node].append((day, list(st.ids), st.weights.copy()))

    result = RunResult(sc, records, posterior, system, alerts, failures)
    if out_dir is not None:
        write_run(result, out_dir)
    return result


def _clairvoyant(st: _Node, target, mu: float) -> tuple[int, bool]:
    k = st.true_k
    feas = st.truth.feasible_single(k, mu)
    return st.truth.choose(st.truth.costs(target)[k], feas)


def _couple(st: _Node, nodes, chosen: dict, background, sc: Scenario) -> None:
    """Refresh ``st``'s grid context with the other learning nodes' loads.

    Nodes already priced today contribute at today's price, the rest at
    yesterday's; each at the moments of its own current belief.
    """
    extra_mean = background.copy()
    extra_var = np.zeros_like(background)
    for other in nodes:
        if other is st:
            continue
        idx = chosen.get(other.node, other.last_price)
        mean, var = _moments_under_belief(other.learner, other.weights, idx)
        extra_mean[other.node - 1] += mean
        extra_var[other.node - 1] += var
    grid = st.learner.grid.with_others(extra_mean, extra_var)
    st.learner.set_grid(grid)
    st.truth.set_grid(grid)


def write_run(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    multi = len(result.records) > 1
    for node, recs in result.records.items():
        d = os.path.join(out_dir, f"node{node}") if multi else out_dir
        os.makedirs(d, exist_ok=True)
        metrics.write_regret_csv(recs, os.path.join(d, "regret.csv"))
        metrics.write_suboptimal_csv(recs, os.path.join(d, "suboptimal.csv"))
        metrics.write_violations_csv(recs, os.path.join(d, "violations.csv"))
        metrics.write_posterior_csv(result.posterior[node], os.path.join(d, "posterior.csv"))
        metrics.write_records_csv(recs, os.path.join(d, "records.csv"))
    with open(os.path.join(out_dir, "system_violations.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", *metrics.VIOLATION_KINDS])
        for d, row in enumerate(result.system_violations, start=1):
            w.writerow([d, *map(int, row)])


def _run_cell(args):
    sc, = args
    return run_scenario(sc)


def run_many(scenarios, n_jobs: int = 1) -> list[RunResult]:
    """Run independent scenarios, in worker processes when ``n_jobs > 1``.

    Results are returned in input order and do not depend on ``n_jobs``.
    """
    scenarios = list(scenarios)
    if n_jobs <= 1 or len(scenarios) <= 1:
        return [run_scenario(sc) for sc in scenarios]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_cell, [(sc,) for sc in scenarios]))


@dataclass(frozen=True)
class RunSummary:
    """Per-day series of one run at one node."""

    regret: np.ndarray
    suboptimal: np.ndarray
    violating_days: np.ndarray
    mass_on_true: np.ndarray
    true_violation_prob: np.ndarray

    @classmethod
    def of(cls, result: RunResult, node: int | None = None) -> "RunSummary":
        recs = result.node_records(node)
        _, cum = metrics.cumulative_regret(recs)
        return cls(
            regret=cum,
            suboptimal=metrics.suboptimal_count(recs),
            violating_days=metrics.violation_summary(recs).cumulative_days,
            mass_on_true=np.array([r.posterior_mass_on_true for r in recs]),
            true_violation_prob=np.array([r.true_violation_prob for r in recs]),
        )


def compare_variants(base: Scenario, variants, seeds, out_path: str | None = None, n_jobs: int = 1) -> dict:
    """Run every variant on every seed with shared environment streams.

    Returns ``{(variant, seed): RunSummary}``.  The CSV (when ``out_path`` is
    given) has one row per seed and day with each variant's cumulative regret,
    suboptimal count and violating days, and their differences from the first
    variant.
    """
    variants = list(variants)
    seeds = list(seeds)
    cells = [(v, s) for s in seeds for v in variants]
    results = run_many([base.replace(variant=v, seed=s) for v, s in cells], n_jobs)
    out = {cell: RunSummary.of(r) for cell, r in zip(cells, results)}
    if out_path is not None:
        _write_paired(out, variants, seeds, out_path)
    return out


def _write_paired(summaries, variants, seeds, path) -> None:
    ref = variants[0]
    header = ["seed", "day"]
    for v in variants:
        header += [f"{v}:regret", f"{v}:suboptimal", f"{v}:violating_days"]
    for v in variants[1:]:
        header += [f"{v}-{ref}:regret", f"{v}-{ref}:suboptimal", f"{v}-{ref}:violating_days"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in seeds:
            base = summaries[(ref, s)]
            for d in range(base.regret.size):
                row = [s, d + 1]
                for v in variants:
                    r = summaries[(v, s)]
                    row += [repr(float(r.regret[d])), int(r.suboptimal[d]), int(r.violating_days[d])]
                for v in variants[1:]:
                    r = summaries[(v, s)]
                    row += [
                        repr(float(r.regret[d] - base.regret[d])),
                        int(r.suboptimal[d] - base.suboptimal[d]),
                        int(r.violating_days[d] - base.violating_days[d]),
                    ]
                w.writerow(row)


SWEEP_PARAMS = ("nu", "cluster_count", "horizon", "sigma")


def _apply(sc: Scenario, param: str, value):
    if param == "nu":
        return sc.replace(nu=float(value))
    if param == "horizon":
        return sc.replace(horizon=int(value))
    if param == "cluster_count":
        ids = [c.cluster_id for c in sc.clusters][: int(value)]
        return sc.replace(learner_clusters=tuple(ids))
    if param == "sigma":
        from .population import PreferenceNoiseConfig

        nz = sc.noise
        return sc.replace(noise=PreferenceNoiseConfig(float(value), nz.sigma_obs, nz.truncate_at_zero))
    raise ValueError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")


def sweep(param: str, values, base: Scenario, seeds, out_path: str | None = None, n_jobs: int = 1) -> list[dict]:
    """Grid over ``values`` x ``seeds``; rows hold per-day mean and std across seeds."""
    values = list(values)
    seeds = list(seeds)
    cells = [(v, s) for v in values for s in seeds]
    results = run_many([_apply(base, param, v).replace(seed=s) for v, s in cells], n_jobs)
    by_value: dict = {}
    for (v, _), r in zip(cells, results):
        by_value.setdefault(v, []).append(RunSummary.of(r))
    rows = []
    for v in values:
        sums = by_value[v]
        regret = np.array([s.regret for s in sums])
        sub = np.array([s.suboptimal for s in sums])
        viol = np.array([s.violating_days for s in sums])
        for d in range(regret.shape[1]):
            rows.append(
                {
                    "param": param,
                    "value": v,
                    "day": d + 1,
                    "regret_mean": float(regret[:, d].mean()),
                    "regret_std": float(regret[:, d].std()),
                    "suboptimal_mean": float(sub[:, d].mean()),
                    "suboptimal_std": float(sub[:, d].std()),
                    "violating_days_mean": float(viol[:, d].mean()),
                    "seeds": len(sums),
                }
            )
    if out_path is not None:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return rows
