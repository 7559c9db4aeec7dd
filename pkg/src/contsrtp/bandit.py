"""Discrete belief over candidate sensitivity models: sampling and Bayes updates.

The likelihood treats slots as independent Gaussians with the moments of
:func:`contsrtp.population.expected_load`.  Clusters actually correlate
slots and the simulator may truncate at zero; both are ignored here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clusters import response_table
from .errors import AllZeroLikelihood, EmptySupport, NonSimplexWeights
from .population import SensitivityModel, expected_load

LOG_2PI = math.log(2.0 * math.pi)
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Prior:
    support: tuple
    weights: np.ndarray

    def __len__(self):
        return len(self.support)

    @property
    def ids(self) -> list[int]:
        return [m.id for m in self.support]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([m.theta for m in self.support])

    def mass(self, model_id: int) -> float:
        return float(sum(w for m, w in zip(self.support, self.weights) if m.id == model_id))

    def mode(self) -> SensitivityModel:
        return self.support[int(np.argmax(self.weights))]

    def with_weights(self, weights) -> "Prior":
        return Prior(self.support, np.asarray(weights, dtype=float))


def init_prior(support, weights=None) -> Prior:
    """Belief over ``support``; uniform unless ``weights`` (a simplex point) is given."""
    support = tuple(m if isinstance(m, SensitivityModel) else SensitivityModel(m, i) for i, m in enumerate(support))
    if not support:
        raise EmptySupport("the candidate set is empty")
    if weights is None:
        w = np.full(len(support), 1.0 / len(support))
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != len(support) or np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise NonSimplexWeights(f"weights {w} are not a probability vector over {len(support)} candidates")
        w = w / w.sum()
    return Prior(support, w)


def sample_index(weights, rng) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    u = rng.random()
    cdf = np.cumsum(weights)
    k = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    k = min(k, len(weights) - 1)
    while weights[k] == 0:  # guard against landing on a zero-width bin at the edge
        k -= 1
    return k


def sample_theta(prior: Prior, rng) -> SensitivityModel:
    return prior.support[sample_index(prior.weights, rng)]


def gaussian_loglik(y, mean, var) -> np.ndarray:
    """Sum over the last axis of ``log N(y; mean, var)``.

    Zero-variance slots contribute 0 where ``mean`` reproduces ``y`` and
    ``-inf`` otherwise.
    """
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.broadcast_to(np.asarray(var, dtype=float), np.broadcast_shapes(np.shape(var), y.shape))
    resid = y - mean
    pos = var > 0
    safe = np.where(pos, var, 1.0)
    terms = np.where(pos, -0.5 * (LOG_2PI + np.log(safe) + resid**2 / safe), 0.0)
    if not pos.all():
        mismatch = (~pos) & (np.abs(resid) > 1e-9 * (1.0 + np.abs(y)))
        terms = np.where(mismatch, -np.inf, terms)
    return terms.sum(axis=-1)


def log_likelihood(obs, price, theta, specs, noise, profiles=None) -> float:
    """Per-slot independent Gaussian log density of ``obs`` under ``theta``."""
    if profiles is None:
        profiles = response_table(specs, [price])[0]
    mean, var = expected_load(theta, price, specs, noise, profiles)
    return float(gaussian_loglik(getattr(obs, "load", obs), mean, var))


def update_weights(weights, loglik) -> np.ndarray:
    """Bayes rule in the log domain with a max shift."""
    weights = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + np.asarray(loglik, dtype=float)
    logw = np.where(weights > 0, logw, -np.inf)
    top = np.max(logw)
    if not np.isfinite(top):
        raise AllZeroLikelihood("no candidate with positive weight explains the observation")
    w = np.exp(logw - top)
    return w / w.sum()


def posterior_update(prior: Prior, obs, price, specs, noise, profiles=None) -> Prior:
    if profiles is None:
        profiles = response_table(specs, [price])[0]
    ll = [log_likelihood(obs, price, m, specs, noise, profiles) for m in prior.support]
    return prior.with_weights(update_weights(prior.weights, ll))


def min_mass_bound(prior_mass_on_true: float, lam: float, price_count: int) -> float:
    """Lowest mass the true model is expected to keep: ``pi0 * exp(-lam * |P|)``."""
    if not 0 < prior_mass_on_true <= 1 or lam < 0 or price_count < 0:
        raise ValueError("need 0 < mass <= 1, lam >= 0, price_count >= 0")
    return prior_mass_on_true * math.exp(-lam * price_count)
