"""Regret, suboptimal-selection counts, violation statistics and KL diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import IncompleteRecord
from .population import expected_load

VIOLATION_KINDS = ("under_voltage", "over_voltage", "overflow")


@dataclass
class DayRecord:
    day: int
    target_id: int
    chosen_price_id: int
    optimal_price_id: int | None = None
    sampled_theta_id: int | None = None
    realized_cost: float | None = None
    clairvoyant_expected_cost: float | None = None
    chosen_expected_cost_under_true: float | None = None
    violation_flags: dict = field(default_factory=dict)
    posterior_mass_on_true: float | None = None
    fallback_flag: bool = False
    true_violation_prob: float | None = None
    node: int = 0
    variant: str = ""

    @property
    def violations(self) -> int:
        return int(sum(self.violation_flags.get(k, 0) for k in VIOLATION_KINDS))

    @property
    def suboptimal(self) -> bool:
        return self.chosen_price_id != self.optimal_price_id

    def row(self) -> dict:
        out = asdict(self)
        flags = out.pop("violation_flags")
        for k in VIOLATION_KINDS:
            out[k] = int(flags.get(k, 0))
        return out


def _check_days(records):
    if not records:
        raise IncompleteRecord("no records")
    days = [r.day for r in records]
    if any(b <= a for a, b in zip(days, days[1:])):
        raise IncompleteRecord("days must be strictly increasing within a run")


def cumulative_regret(records) -> tuple[np.ndarray, np.ndarray]:
    """Daily expected-cost gap to the clairvoyant price under the true model, and its running sum.

    A gap is negative only on days the chosen price was cheaper than the
    clairvoyant one because it breaks the true-model chance constraint.
    """
    _check_days(records)
    gaps = []
    for r in records:
        if r.chosen_expected_cost_under_true is None or r.clairvoyant_expected_cost is None:
            raise IncompleteRecord(f"day {r.day} lacks expected costs")
        if r.chosen_price_id == r.optimal_price_id:
            gaps.append(0.0)
        else:
            gaps.append(r.chosen_expected_cost_under_true - r.clairvoyant_expected_cost)
    gaps = np.array(gaps)
    return gaps, np.cumsum(gaps)


def suboptimal_count(records) -> np.ndarray:
    """Running count of days whose price differs from the clairvoyant price."""
    if not records:
        return np.zeros(0, dtype=int)
    for r in records:
        if r.optimal_price_id is None:
            raise IncompleteRecord(f"day {r.day} lacks the clairvoyant price")
    return np.cumsum([r.suboptimal for r in records]).astype(int)


def suboptimal_rate(records, last: int) -> float:
    tail = records[-last:]
    return float(np.mean([r.suboptimal for r in tail])) if tail else 0.0


def gaussian_kl(mean_a, var_a, mean_b, var_b) -> float:
    """KL(N_a || N_b) summed over independent slots."""
    mean_a, var_a, mean_b, var_b = (np.asarray(x, dtype=float) for x in (mean_a, var_a, mean_b, var_b))
    var_a, var_b = np.broadcast_to(var_a, mean_a.shape), np.broadcast_to(var_b, mean_b.shape)
    total = 0.0
    for ma, va, mb, vb in zip(mean_a, var_a, mean_b, var_b):
        if va == 0 and vb == 0:
            if abs(ma - mb) > 1e-12 * (1 + abs(ma)):
                return math.inf
            continue
        if vb == 0 or va == 0:
            return math.inf
        total += 0.5 * (math.log(vb / va) + (va + (ma - mb) ** 2) / vb - 1.0)
    return total


def kl_marginal(theta_a, theta_b, price, specs, noise) -> float:
    """KL divergence in nats between the observation models of two candidates under one price."""
    ma, va = expected_load(theta_a, price, specs, noise)
    mb, vb = expected_load(theta_b, price, specs, noise)
    return gaussian_kl(ma, va, mb, vb)


@dataclass(frozen=True)
class ViolationSummary:
    per_day: np.ndarray  # violated scalar constraints per day
    by_kind: dict
    violating_days: int

    @property
    def cumulative_days(self) -> np.ndarray:
        return np.cumsum(self.per_day > 0)


def violation_summary(records) -> ViolationSummary:
    per_day = np.array([r.violations for r in records], dtype=int)
    by_kind = {k: int(sum(r.violation_flags.get(k, 0) for r in records)) for k in VIOLATION_KINDS}
    return ViolationSummary(per_day, by_kind, int((per_day > 0).sum()))


def violation_difference(records_a, records_b) -> np.ndarray:
    """Running difference in violating days, ``a`` minus ``b`` (paired runs)."""
    a = violation_summary(records_a).cumulative_days
    b = violation_summary(records_b).cumulative_days
    if a.shape != b.shape:
        raise IncompleteRecord("paired runs must cover the same days")
    return a - b


def write_regret_csv(records, path) -> None:
    gaps, cum = cumulative_regret(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "instant_gap", "cumulative"])
        for r, g, c in zip(records, gaps, cum):
            w.writerow([r.day, repr(float(g)), repr(float(c))])


def write_suboptimal_csv(records, path) -> None:
    counts = suboptimal_count(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "target_id", "chosen_price_id", "optimal_price_id", "suboptimal", "cumulative"])
        for r, c in zip(records, counts):
            w.writerow([r.day, r.target_id, r.chosen_price_id, r.optimal_price_id, int(r.suboptimal), int(c)])


def write_violations_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", *VIOLATION_KINDS, "total", "true_violation_prob", "fallback"])
        for r in records:
            flags = [int(r.violation_flags.get(k, 0)) for k in VIOLATION_KINDS]
            p = "" if r.true_violation_prob is None else repr(float(r.true_violation_prob))
            w.writerow([r.day, *flags, sum(flags), p, int(r.fallback_flag)])


def write_posterior_csv(snapshots, path) -> None:
    """``snapshots`` is an iterable of ``(day, ids, weights)``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "theta_id", "weight"])
        for day, ids, weights in snapshots:
            for i, wt in zip(ids, weights):
                w.writerow([day, i, repr(float(wt))])


def write_records_csv(records, path) -> None:
    rows = [r.row() for r in records]
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
