"""Flexible-appliance clusters and their cost-minimising daily response.

Slots are numbered ``1..T`` in specs and files (as in the cluster file
format); arrays are 0-based.  ``d(t)`` is power in kW and energy is
``sum(d) * slot_hours`` with ``slot_hours = 24 / T`` unless given.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigurationError, InfeasibleSpec, LengthMismatch

INTERRUPTIBLE = "interruptible"
UNINTERRUPTIBLE = "uninterruptible"
_TOL = 1e-12


def _price_array(price) -> np.ndarray:
    return np.asarray(getattr(price, "price", price), dtype=float)


def slot_duration(slot_count: int, slot_hours: float | None = None) -> float:
    return 24.0 / slot_count if slot_hours is None else float(slot_hours)


@dataclass(frozen=True)
class ClusterSpec:
    """Feasible-schedule description of one appliance cluster.

    Interruptible clusters need ``energy`` kWh inside slots ``[t1, t2]`` at no
    more than ``rho`` kW.  Uninterruptible clusters run ``pulse`` (kW per offset
    slot) starting at any slot in ``[t1, t2]``.  ``beta`` scales how many
    appliances participate.
    """

    kind: str
    t1: int
    t2: int
    energy: float = 0.0
    rho: float = 0.0
    pulse: tuple = ()
    beta: float = 1.0
    cluster_id: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in (INTERRUPTIBLE, UNINTERRUPTIBLE):
            raise ConfigurationError(f"unknown cluster kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "pulse", tuple(float(x) for x in self.pulse))
        if self.t1 < 1 or self.t2 < self.t1:
            raise InfeasibleSpec(f"cluster {self.cluster_id}: bad window [{self.t1}, {self.t2}]")
        if kind == UNINTERRUPTIBLE and (not self.pulse or min(self.pulse) < 0):
            raise InfeasibleSpec(f"cluster {self.cluster_id}: pulse must be non-empty and non-negative")
        if kind == INTERRUPTIBLE and (self.energy < 0 or self.rho < 0):
            raise InfeasibleSpec(f"cluster {self.cluster_id}: negative energy or power cap")

    def validate(self, slot_count: int, slot_hours: float | None = None) -> None:
        """Raise :class:`InfeasibleSpec` if the cluster has no schedule on a ``slot_count`` day."""
        if self.kind == INTERRUPTIBLE:
            if self.t2 > slot_count:
                raise InfeasibleSpec(f"cluster {self.cluster_id}: window ends after slot {slot_count}")
            dt = slot_duration(slot_count, slot_hours)
            capacity = self.rho * dt * (self.t2 - self.t1 + 1)
            if self.energy > capacity * (1 + _TOL):
                raise InfeasibleSpec(
                    f"cluster {self.cluster_id}: {self.energy} kWh does not fit in {capacity} kWh"
                )
        elif self.t2 + len(self.pulse) - 1 > slot_count:
            raise InfeasibleSpec(f"cluster {self.cluster_id}: latest start pushes the pulse past slot {slot_count}")


@dataclass(frozen=True)
class LoadProfile:
    power: np.ndarray
    slot_hours: float

    @property
    def energy(self) -> float:
        return float(self.power.sum() * self.slot_hours)


def _interruptible(spec: ClusterSpec, price: np.ndarray, dt: float) -> np.ndarray:
    d = np.zeros(price.size)
    remaining = spec.energy
    window = np.arange(spec.t1 - 1, spec.t2)
    # stable sort: equal prices fill the earliest slot first
    for t in window[np.argsort(price[window], kind="stable")]:
        if remaining <= 0:
            break
        d[t] = min(spec.rho, remaining / dt)
        remaining -= d[t] * dt
    return d


def _uninterruptible(spec: ClusterSpec, price: np.ndarray) -> np.ndarray:
    pulse = np.asarray(spec.pulse)
    starts = np.arange(spec.t1 - 1, spec.t2)
    costs = np.array([price[s : s + pulse.size] @ pulse for s in starts])
    s = starts[int(np.argmin(costs))]
    d = np.zeros(price.size)
    d[s : s + pulse.size] = pulse
    return d


def min_cost_profile(spec: ClusterSpec, price, slot_hours: float | None = None) -> LoadProfile:
    """Cheapest feasible schedule of ``spec`` under ``price``.

    Interruptible clusters fill their cheapest in-window slots at the power cap
    (ties go to the earlier slot); uninterruptible clusters take the cheapest
    start, earliest on ties.
    """
    p = _price_array(price)
    if p.ndim != 1 or np.any(p <= 0):
        raise ConfigurationError("price must be a 1-D vector of positive entries")
    dt = slot_duration(p.size, slot_hours)
    spec.validate(p.size, dt)
    if spec.kind == INTERRUPTIBLE:
        return LoadProfile(_interruptible(spec, p, dt), dt)
    return LoadProfile(_uninterruptible(spec, p), dt)


def response_table(specs, prices, slot_hours: float | None = None) -> np.ndarray:
    """Min-cost profiles for every (price, cluster) pair, shape ``(P, C, T)``."""
    prices = np.atleast_2d(np.asarray([_price_array(p) for p in prices], dtype=float))
    out = np.empty((prices.shape[0], len(specs), prices.shape[1]))
    for i, p in enumerate(prices):
        for c, spec in enumerate(specs):
            out[i, c] = min_cost_profile(spec, p, slot_hours).power
    return out


@dataclass(frozen=True)
class PopulationProfileSet:
    """Weighted (Minkowski) sum of cluster feasible sets.

    The set itself is never enumerated: the population's cost-minimising
    member under a price is the count-weighted sum of the clusters' own
    minimisers.
    """

    specs: tuple
    counts: np.ndarray
    slot_hours: float | None = None

    def profiles(self, price) -> np.ndarray:
        """Per-cluster min-cost profiles, shape ``(C, T)``."""
        return np.array([min_cost_profile(s, price, self.slot_hours).power for s in self.specs])

    def profile(self, price) -> np.ndarray:
        if len(self.specs) == 0:
            return np.zeros(_price_array(price).size)
        return self.counts @ self.profiles(price)


def population_profile_set(specs, counts, slot_hours: float | None = None) -> PopulationProfileSet:
    specs = tuple(specs)
    counts = np.asarray(counts, dtype=float).reshape(-1)
    if counts.size != len(specs):
        raise LengthMismatch(f"{len(specs)} clusters but {counts.size} counts")
    if np.any(counts < 0):
        raise ConfigurationError("cluster counts must be non-negative")
    return PopulationProfileSet(specs, counts, slot_hours)


CLUSTER_COLUMNS = ("cluster_id", "kind", "t1", "t2", "E_kWh", "rho_kW", "beta")


def _pulse(text: str) -> tuple:
    return tuple(float(x) for x in text.split("|") if x.strip())


def load_clusters(source) -> list[ClusterSpec]:
    """Read a cluster file.

    Columns ``cluster_id,kind,t1,t2,E_kWh,rho_kW,beta`` with an optional
    ``pulse_kW`` column.  Uninterruptible rows give the pulse as ``|``-separated
    kW values, either in ``pulse_kW`` or in place of ``E_kWh``; ``t1,t2`` is then
    the window of allowed start slots.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    header = tuple(f.strip() for f in reader.fieldnames or ())
    if header[: len(CLUSTER_COLUMNS)] != CLUSTER_COLUMNS:
        raise ConfigurationError(f"cluster header must start with {','.join(CLUSTER_COLUMNS)}")
    specs = []
    for rec in reader:
        rec = {k.strip(): (v or "").strip() for k, v in rec.items() if k}
        kind = rec["kind"].lower()
        try:
            common = dict(
                kind=kind,
                t1=int(rec["t1"]),
                t2=int(rec["t2"]),
                beta=float(rec["beta"]),
                cluster_id=int(rec["cluster_id"]),
            )
            if kind == UNINTERRUPTIBLE:
                pulse = rec.get("pulse_kW") or rec["E_kWh"]
                specs.append(ClusterSpec(pulse=_pulse(pulse), **common))
            else:
                specs.append(ClusterSpec(energy=float(rec["E_kWh"]), rho=float(rec["rho_kW"]), **common))
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"malformed cluster row {rec}") from exc
    return specs


def write_clusters(specs, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CLUSTER_COLUMNS + ("pulse_kW",))
        for s in specs:
            if s.kind == INTERRUPTIBLE:
                w.writerow([s.cluster_id, s.kind, s.t1, s.t2, repr(s.energy), repr(s.rho), repr(s.beta), ""])
            else:
                w.writerow([s.cluster_id, s.kind, s.t1, s.t2, "", "", repr(s.beta), "|".join(map(repr, s.pulse))])


def bundled_clusters(name: str = "clusters20.csv") -> list[ClusterSpec]:
    text = resources.files("contsrtp.data").joinpath(name).read_text(encoding="utf-8")
    return load_clusters(io.StringIO(text))
