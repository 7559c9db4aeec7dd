"""Daily price selection under chance constraints.

Flows and squared voltages are affine in the node load, and the node load is
affine in the Gaussian participation counts, so each scalar grid constraint
holds with a probability given by a Gaussian tail.  Mixture beliefs average
those probabilities over candidates.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np
from scipy.special import ndtr

from .bandit import Prior
from .clusters import _price_array, response_table
from .errors import ConfigurationError, DimensionMismatch, NoFeasiblePrice
from .grid import KW, ConstraintLimits, NetworkTopology, NodalDemandSchedule, default_limits, solve_lindistflow
from .population import (
    PreferenceNoiseConfig,
    SensitivityModel,
    betas,
    expected_load,
    moment_table,
)

FEAS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PriceSignal:
    price: np.ndarray
    id: int = 0

    def __post_init__(self):
        p = np.asarray(self.price, dtype=float).reshape(-1)
        if np.any(p <= 0):
            raise ConfigurationError(f"price {self.id} must be strictly positive")
        object.__setattr__(self, "price", p)


@dataclass(frozen=True, eq=False)
class TargetProfile:
    target: np.ndarray
    id: int = 0

    def __post_init__(self):
        v = np.asarray(self.target, dtype=float).reshape(-1)
        if np.any(v < 0):
            raise ConfigurationError(f"target {self.id} must be non-negative")
        object.__setattr__(self, "target", v)


class ChanceMode(str, Enum):
    SET_A = "SetA"
    SET_B = "SetB"
    UNCONSTRAINED = "Unconstrained"


@dataclass(frozen=True)
class ChanceConfig:
    mode: ChanceMode = ChanceMode.SET_B
    mu: float = 0.1
    nu: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "mode", ChanceMode(self.mode))
        if not (0 < self.mu <= 1 and 0 < self.nu <= 1):
            raise ConfigurationError("mu and nu must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class GridContext:
    """Where the priced population sits and what else loads the feeder.

    ``background_p``/``background_q`` are deterministic kW/kvar on every node;
    ``other_var`` is the variance (kW^2) of independent stochastic load on
    other nodes.  All default to zero.
    """

    topology: NetworkTopology
    node: int
    limits: ConstraintLimits | None = None
    background_p: np.ndarray | None = None
    background_q: np.ndarray | None = None
    other_var: np.ndarray | None = None

    def __post_init__(self):
        n = self.topology.node_count
        if not 1 <= self.node <= n:
            raise ConfigurationError(f"node {self.node} is not in the network")
        if self.limits is None:
            object.__setattr__(self, "limits", default_limits(self.topology))

    def _extra(self, arr, slots):
        n = self.topology.node_count
        if arr is None:
            return np.zeros((n, slots))
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (n, slots):
            raise DimensionMismatch(f"expected ({n}, {slots}) array, got {arr.shape}")
        return arr

    def with_others(self, background_p=None, other_var=None) -> "GridContext":
        return GridContext(self.topology, self.node, self.limits, background_p, self.background_q, other_var)


@dataclass(frozen=True)
class ConstraintProbabilities:
    """Satisfaction probabilities, each ``(N, T)``: ``u >= u_min``, ``u <= u_max``,
    and the apparent-power limit on each line."""

    under_voltage: np.ndarray
    over_voltage: np.ndarray
    flow: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.stack([self.under_voltage, self.over_voltage, self.flow])

    def min(self) -> float:
        return float(self.stacked().min())

    def feasible(self, level: float) -> bool:
        return self.min() >= 1.0 - level - FEAS_TOL


def _tail(margin, sd):
    """P[X <= margin] for X ~ N(0, sd^2); a step function when ``sd == 0``."""
    margin, sd = np.broadcast_arrays(margin, sd)
    pos = sd > 0
    out = np.where(margin >= 0, 1.0, 0.0)
    if pos.any():
        z = np.divide(margin, sd, out=np.zeros_like(margin), where=pos)
        out = np.where(pos, ndtr(z), out)
    return out


def satisfaction(mean, var, grid: GridContext) -> np.ndarray:
    """Constraint satisfaction for node-load moments.

    Parameters
    ----------
    mean : (..., T) array, kW at ``grid.node``
    var : (..., T) array broadcastable to ``mean``

    Returns
    -------
    (..., 3, N, T) array stacking under-voltage, over-voltage and flow
    satisfaction probabilities.
    """
    topo = grid.topology
    mean = np.asarray(mean, dtype=float)
    slots = mean.shape[-1]
    var = np.broadcast_to(np.asarray(var, dtype=float), mean.shape)
    bg_p = grid._extra(grid.background_p, slots)
    bg_q = grid._extra(grid.background_q, slots)
    o_var = grid._extra(grid.other_var, slots)
    m = topo.subtree_matrix
    sr, sx = topo.voltage_sensitivity
    col_m = m[:, grid.node - 1][:, None]  # (N, 1)
    col_r = sr[:, grid.node - 1][:, None]
    lim = grid.limits

    own = mean[..., None, :]  # (..., 1, T)
    own_var = var[..., None, :]
    flow_mean = col_m * own + m @ bg_p
    flow_sd = np.sqrt(col_m**2 * own_var + (m**2) @ o_var)
    flow_q = m @ bg_q
    s2 = lim.s_max[:, None] ** 2 - flow_q**2
    s_eff = np.sqrt(np.clip(s2, 0.0, None))
    flow_ok = _tail(s_eff - flow_mean, flow_sd) - _tail(-s_eff - flow_mean, flow_sd)
    flow_ok = np.where(s2 >= 0, np.clip(flow_ok, 0.0, 1.0), 0.0)

    u0 = topo.substation_voltage**2
    u_mean = u0 - 2.0 * KW * (col_r * own + sr @ bg_p + sx @ bg_q)
    u_sd = 2.0 * KW * np.sqrt(col_r**2 * own_var + (sr**2) @ o_var)
    under_ok = _tail(u_mean - lim.u_min[:, None], u_sd)
    over_ok = _tail(lim.u_max[:, None] - u_mean, u_sd)
    return np.stack(np.broadcast_arrays(under_ok, over_ok, flow_ok), axis=-3)


def _belief_models(belief) -> tuple[list, np.ndarray]:
    if isinstance(belief, Prior):
        return list(belief.support), np.asarray(belief.weights)
    return [belief], np.ones(1)


def constraint_probability(belief, price, grid: GridContext, specs, noise: PreferenceNoiseConfig) -> ConstraintProbabilities:
    """Exact Gaussian satisfaction probabilities for ``price`` under a model or a prior mixture."""
    models, weights = _belief_models(belief)
    profiles = response_table(specs, [price])[0]
    total = 0.0
    for model, w in zip(models, weights):
        if w == 0:
            continue
        mean, var = expected_load(model, price, specs, noise, profiles)
        total = total + w * satisfaction(mean, var, grid)
    return ConstraintProbabilities(*total)


def constraint_probability_mc(
    belief,
    price,
    grid: GridContext,
    specs,
    noise: PreferenceNoiseConfig,
    n_samples: int = 10_000,
    rng=None,
    chunk: int = 20_000,
) -> ConstraintProbabilities:
    """Monte Carlo estimate of :func:`constraint_probability` by sampling the
    population and running the LinDistFlow solver on every draw."""
    rng = np.random.default_rng() if rng is None else rng
    models, weights = _belief_models(belief)
    profiles = response_table(specs, [price])[0]  # (C, T)
    c, slots = profiles.shape
    topo = grid.topology
    n = topo.node_count
    bg_p = grid._extra(grid.background_p, slots)
    bg_q = grid._extra(grid.background_q, slots)
    o_sd = np.sqrt(grid._extra(grid.other_var, slots))
    means = np.array([m.theta @ _price_array(price) for m in models])
    beta = betas(specs)
    counts = np.zeros((3, n, slots))
    done = 0
    while done < n_samples:
        s = min(chunk, n_samples - done)
        k = rng.choice(len(models), size=s, p=weights)
        a = beta[None, :] / means[k][:, None] + noise.sigma * rng.standard_normal((s, c))
        if noise.truncate_at_zero:
            a = np.maximum(a, 0.0)
        load = a @ profiles + noise.sigma_obs * rng.standard_normal((s, slots))
        if noise.truncate_at_zero:
            load = np.maximum(load, 0.0)
        dp = np.repeat(bg_p[None], s, axis=0) + o_sd[None] * rng.standard_normal((s, n, slots))
        dp[:, grid.node - 1, :] += load
        dq = np.repeat(bg_q[None], s, axis=0)
        # samples become extra columns of one big schedule
        sol = solve_lindistflow(
            topo,
            NodalDemandSchedule(dp.transpose(1, 0, 2).reshape(n, -1), dq.transpose(1, 0, 2).reshape(n, -1)),
        )
        u = sol.u.reshape(n, s, slots)
        fp = sol.flow_p.reshape(n, s, slots)
        fq = sol.flow_q.reshape(n, s, slots)
        lim = grid.limits
        counts[0] += (u >= lim.u_min[:, None, None]).sum(axis=1)
        counts[1] += (u <= lim.u_max[:, None, None]).sum(axis=1)
        counts[2] += (fp**2 + fq**2 <= lim.s_max[:, None, None] ** 2).sum(axis=1)
        done += s
    return ConstraintProbabilities(*(counts / n_samples))


def expected_cost(theta, price, target, specs, noise: PreferenceNoiseConfig, profiles=None) -> float:
    """``E|D - V|^2`` in kW^2: squared bias of the mean plus the summed variance."""
    mean, var = expected_load(theta, price, specs, noise, profiles)
    v = np.asarray(getattr(target, "target", target), dtype=float)
    return float(((mean - v) ** 2).sum() + var.sum())


def fallback_index(prices) -> int:
    """Index of the entrywise-maximal price (largest total if none dominates)."""
    prices = np.asarray(prices)
    for i, p in enumerate(prices):
        if np.all(p >= prices):
            return i
    return int(np.argmax(prices.sum(axis=1)))


class PricingModel:
    """Precomputed moments, costs and constraint probabilities for a fixed
    candidate set and price set.

    ``mean`` is ``(K, P, T)``, ``var`` is ``(P, T)`` and ``sat`` is ``(K, P, J)``
    over the constraints that are not satisfied with certainty everywhere.
    """

    def __init__(self, thetas, prices, specs, noise: PreferenceNoiseConfig, grid: GridContext | None = None, profiles=None):
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        self.prices = np.atleast_2d(np.asarray([_price_array(p) for p in prices], dtype=float))
        self.specs = tuple(specs)
        self.noise = noise
        self.grid = grid
        self.profiles = response_table(self.specs, self.prices) if profiles is None else profiles
        self.mean, self.var = moment_table(self.thetas, self.prices, self.profiles, betas(self.specs), noise)
        self.var_total = self.var.sum(axis=-1)
        self.fallback = fallback_index(self.prices)
        if grid is None:
            self.sat = np.ones(self.mean.shape[:2] + (0,))
        else:
            self.set_grid(grid)

    def set_grid(self, grid: GridContext) -> None:
        self.grid = grid
        k, p, t = self.mean.shape
        full = satisfaction(self.mean, self.var[None], grid).reshape(k, p, -1)
        active = (full < 1.0).any(axis=(0, 1))
        self.sat = np.ascontiguousarray(full[:, :, active])

    def costs(self, target) -> np.ndarray:
        """``(K, P)`` expected costs for one target profile."""
        v = np.asarray(getattr(target, "target", target), dtype=float)
        return ((self.mean - v) ** 2).sum(axis=-1) + self.var_total[None, :]

    def min_sat(self) -> np.ndarray:
        if self.sat.shape[-1] == 0:
            return np.ones(self.sat.shape[:2])
        return self.sat.min(axis=-1)

    def feasible_single(self, k: int, level: float) -> np.ndarray:
        return self.min_sat()[k] >= 1.0 - level - FEAS_TOL

    def feasible_mixture(self, weights, level: float) -> np.ndarray:
        if self.sat.shape[-1] == 0:
            return np.ones(self.sat.shape[1], dtype=bool)
        mix = np.tensordot(np.asarray(weights, dtype=float), self.sat, axes=1)
        return mix.min(axis=-1) >= 1.0 - level - FEAS_TOL

    def feasible(self, cfg: ChanceConfig, k: int, weights=None) -> np.ndarray:
        if cfg.mode is ChanceMode.UNCONSTRAINED or self.grid is None:
            return np.ones(self.prices.shape[0], dtype=bool)
        if cfg.mode is ChanceMode.SET_A:
            return self.feasible_single(k, cfg.mu)
        if weights is None:
            raise ConfigurationError("Set B needs the prior weights")
        return self.feasible_mixture(weights, cfg.nu)

    def choose(self, cost_row, feasible) -> tuple[int, bool]:
        """Cheapest feasible index (lowest index on ties) and a fallback flag."""
        if not feasible.any():
            return self.fallback, True
        masked = np.where(feasible, cost_row, np.inf)
        return int(np.argmin(masked)), False


def _signals(price_set) -> list[PriceSignal]:
    return [p if isinstance(p, PriceSignal) else PriceSignal(p, i) for i, p in enumerate(price_set)]


def select_price(
    theta,
    target,
    price_set,
    cfg: ChanceConfig,
    *,
    specs,
    noise: PreferenceNoiseConfig,
    grid: GridContext | None = None,
    prior: Prior | None = None,
) -> PriceSignal:
    """Cheapest price under ``theta`` among those meeting the chance constraints.

    Set A evaluates the constraints under ``theta`` at level ``mu``; Set B under
    the ``prior`` mixture at level ``nu``.  Raises :class:`NoFeasiblePrice`
    carrying the fallback price when nothing qualifies.
    """
    signals = _signals(price_set)
    if not signals:
        raise ConfigurationError("empty price set")
    if cfg.mode is ChanceMode.SET_B:
        if prior is None:
            raise ConfigurationError("Set B needs the prior")
        models = list(prior.support)
        weights = np.asarray(prior.weights)
        try:
            k = next(i for i, m in enumerate(models) if m == theta)
        except StopIteration:
            models.append(theta)
            weights = np.append(weights, 0.0)
            k = len(models) - 1
    else:
        models, weights, k = [theta], None, 0
    pm = PricingModel([m.theta for m in models], [s.price for s in signals], specs, noise, grid)
    feas = pm.feasible(cfg, k, weights)
    idx, fell_back = pm.choose(pm.costs(target)[k], feas)
    if fell_back:
        raise NoFeasiblePrice("no price satisfies the chance constraints", fallback=signals[idx])
    return signals[idx]


def clairvoyant_price(theta_star, target, price_set, cfg: ChanceConfig, *, specs, noise, grid=None) -> PriceSignal:
    """Optimal price knowing the true model (Set A semantics at level ``mu``)."""
    mode = ChanceMode.UNCONSTRAINED if cfg.mode is ChanceMode.UNCONSTRAINED else ChanceMode.SET_A
    return select_price(
        theta_star, target, price_set, ChanceConfig(mode, cfg.mu, cfg.nu), specs=specs, noise=noise, grid=grid
    )


def _read_vectors(source, key: str):
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = [h.strip() for h in next(reader)]
    if not header or header[0] != key:
        raise ConfigurationError(f"first column must be {key}")
    out = []
    for rec in reader:
        try:
            out.append((int(rec[0]), np.array([float(x) for x in rec[1:]])))
        except ValueError as exc:
            raise ConfigurationError(f"malformed row {rec}") from exc
    if len({i for i, _ in out}) != len(out):
        raise ConfigurationError(f"duplicate {key}")
    return out


def load_prices(source) -> list[PriceSignal]:
    """``price_id,p1,...,pT`` in $/kWh."""
    return [PriceSignal(v, i) for i, v in _read_vectors(source, "price_id")]


def load_targets(source) -> list[TargetProfile]:
    """``target_id,v1,...,vT`` in kW."""
    return [TargetProfile(v, i) for i, v in _read_vectors(source, "target_id")]


def write_vectors(rows, path, key: str, prefix: str) -> None:
    rows = list(rows)
    width = len(rows[0][1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([key] + [f"{prefix}{t + 1}" for t in range(width)])
        for i, v in rows:
            w.writerow([i] + [repr(float(x)) for x in v])


def price_grid(low: float, high: float, slots: int) -> list[PriceSignal]:
    """All ``2**slots`` high/low price vectors; bit ``t`` of the id set means slot ``t`` is high."""
    out = []
    for i in range(2**slots):
        bits = [(i >> t) & 1 for t in range(slots)]
        out.append(PriceSignal([high if b else low for b in bits], i))
    return out
