"""Ground-truth population: stochastic preference adjustments and realised load.

Each cluster's participation is ``a_c ~ Normal(beta_c / (theta . p), sigma^2)``
and the population draws ``Y = sum_c a_c * d_c(p) + eps`` with
``eps ~ Normal(0, sigma_obs^2)`` per slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clusters import _price_array, response_table
from .errors import ConfigurationError, NonPositiveInnerProduct


@dataclass(frozen=True, eq=False)
class SensitivityModel:
    theta: np.ndarray
    id: int = 0

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).reshape(-1)
        if np.any(th <= 0):
            raise ConfigurationError(f"sensitivity model {self.id} must be strictly positive")
        object.__setattr__(self, "theta", th)

    def __eq__(self, other):
        return (
            isinstance(other, SensitivityModel)
            and self.id == other.id
            and np.array_equal(self.theta, other.theta)
        )

    def __hash__(self):
        return hash((self.id, self.theta.tobytes()))


@dataclass(frozen=True)
class PreferenceNoiseConfig:
    sigma: float = 0.5
    sigma_obs: float = 0.0
    truncate_at_zero: bool = True

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_obs < 0:
            raise ConfigurationError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class Observation:
    load: np.ndarray
    day: int = 0


def _theta_array(theta) -> np.ndarray:
    return np.asarray(getattr(theta, "theta", theta), dtype=float)


def inner(theta, price) -> float:
    value = float(_theta_array(theta) @ _price_array(price))
    if not value > 0:
        raise NonPositiveInnerProduct(f"theta . p = {value} must be positive")
    return value


def betas(specs) -> np.ndarray:
    return np.array([s.beta for s in specs], dtype=float)


def mean_adjustments(theta, price, specs) -> np.ndarray:
    return betas(specs) / inner(theta, price)


def sample_adjustments(theta, price, specs, noise: PreferenceNoiseConfig, rng) -> np.ndarray:
    """Draw one day's ``a_c`` for every cluster (one standard normal per cluster)."""
    mean = mean_adjustments(theta, price, specs)
    a = mean + noise.sigma * rng.standard_normal(mean.size)
    if noise.truncate_at_zero:
        a = np.maximum(a, 0.0)
    return a


def realize_load(
    theta,
    price,
    specs,
    noise: PreferenceNoiseConfig,
    rng,
    *,
    obs_rng=None,
    day: int = 0,
    profiles: np.ndarray | None = None,
    slot_hours: float | None = None,
) -> Observation:
    """Simulate the population's load for one day.

    ``obs_rng`` supplies the observation noise (``rng`` is used when omitted).
    ``profiles`` may pass precomputed ``(C, T)`` min-cost profiles for ``price``.
    With ``truncate_at_zero`` the load is clamped at zero.
    """
    if profiles is None:
        profiles = response_table(specs, [price], slot_hours)[0]
    a = sample_adjustments(theta, price, specs, noise, rng)
    load = a @ profiles
    rng_obs = rng if obs_rng is None else obs_rng
    load = load + noise.sigma_obs * rng_obs.standard_normal(load.size)
    if noise.truncate_at_zero:
        load = np.maximum(load, 0.0)
    return Observation(load, day)


def expected_load(
    theta, price, specs, noise: PreferenceNoiseConfig, profiles=None, slot_hours=None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and per-slot variance of the untruncated load model."""
    if profiles is None:
        profiles = response_table(specs, [price], slot_hours)[0]
    mean = mean_adjustments(theta, price, specs) @ profiles
    var = noise.sigma**2 * (profiles**2).sum(axis=0) + noise.sigma_obs**2
    return mean, var


def moment_table(thetas, prices, profiles, beta, noise: PreferenceNoiseConfig):
    """Vectorised :func:`expected_load` over candidates and prices.

    Parameters
    ----------
    thetas : (K, T) array
    prices : (P, T) array
    profiles : (P, C, T) array from :func:`contsrtp.clusters.response_table`
    beta : (C,) array

    Returns
    -------
    mean : (K, P, T) array
    var : (P, T) array
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    ip = thetas @ prices.T
    if np.any(ip <= 0):
        raise NonPositiveInnerProduct("every theta . p must be positive")
    weighted = np.einsum("c,pct->pt", np.asarray(beta, dtype=float), profiles)
    mean = weighted[None, :, :] / ip[:, :, None]
    var = noise.sigma**2 * (profiles**2).sum(axis=1) + noise.sigma_obs**2
    return mean, var
