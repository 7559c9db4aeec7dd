"""Scenario description and scenario files.

Scenario files are INI documents::

    [scenario]
    network = network37.csv      ; paths relative to the file, else bundled data
    clusters = clusters20.csv
    prices = prices64.csv
    targets = targets10.csv
    thetas = thetas10.csv
    target_mode = iid            ; iid | nonrepeating | fixed
    target_schedule =            ; target ids, cycled, for target_mode = fixed
    nodes = 10                   ; learning nodes
    true_theta = 4               ; one id for every node, or "10:4, 12:7"
    horizon = 365
    seed = 0
    variant = ConTS-B            ; ConTS-A | ConTS-B | UnconstrainedTS | TwoStage(L) | Clairvoyant
    learner_clusters =           ; cluster ids the learner models (default: all)
    switch_day =                 ; optional day on which the true model changes
    switch_to =                  ; ... and its new id
    safe_prices =                ; TwoStage exploration set (default: robust-feasible)
    lam = 0.0                    ; minimum-mass monitor parameter
    prior_weights =              ; default uniform

    [noise]
    sigma = 0.5
    sigma_obs = 0.0
    truncate_at_zero = true

    [chance]
    mu = 0.1
    nu = 0.1

    [grid]
    voltage_band = 0.05
    background =                 ; optional node_id,p1..pT file (kW)
"""
from __future__ import annotations

import configparser
import io
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .clusters import load_clusters
from .errors import ConfigurationError
from .grid import NetworkTopology, default_limits, load_network
from .population import PreferenceNoiseConfig, SensitivityModel
from .pricer import ChanceConfig, ChanceMode, _read_vectors, load_prices, load_targets

VARIANTS = ("ConTS-A", "ConTS-B", "UnconstrainedTS", "TwoStage", "Clairvoyant")
TARGET_MODES = ("iid", "nonrepeating", "fixed")
_TWO_STAGE = re.compile(r"^TwoStage\s*[(:]\s*(\d+)\s*\)?$")


def parse_variant(text: str) -> tuple[str, int | None]:
    """``"TwoStage(25)"`` -> ``("TwoStage", 25)``; other names pass through."""
    text = text.strip()
    m = _TWO_STAGE.match(text)
    if m:
        return "TwoStage", int(m.group(1))
    if text not in VARIANTS or text == "TwoStage":
        raise ConfigurationError(f"unknown variant {text!r}; expected one of {VARIANTS} (TwoStage(L))")
    return text, None


def variant_mode(variant: str) -> ChanceMode:
    name, _ = parse_variant(variant)
    return {
        "ConTS-A": ChanceMode.SET_A,
        "ConTS-B": ChanceMode.SET_B,
        "UnconstrainedTS": ChanceMode.UNCONSTRAINED,
        "TwoStage": ChanceMode.SET_B,
        "Clairvoyant": ChanceMode.SET_A,
    }[name]


@dataclass(frozen=True, eq=False)
class Scenario:
    topology: NetworkTopology
    clusters: tuple
    prices: tuple
    targets: tuple
    thetas: tuple
    true_theta: dict  # node -> candidate id
    horizon: int = 365
    seed: int = 0
    variant: str = "ConTS-B"
    noise: PreferenceNoiseConfig = field(default_factory=PreferenceNoiseConfig)
    mu: float = 0.1
    nu: float = 0.1
    voltage_band: float = 0.05
    target_mode: str = "iid"
    target_schedule: tuple = ()
    target_jitter: float = 0.15
    learner_clusters: tuple | None = None
    switch_day: int | None = None
    switch_to: int | None = None
    safe_prices: tuple | None = None
    lam: float = 0.0
    prior_weights: tuple | None = None
    background: np.ndarray | None = None

    def __post_init__(self):
        parse_variant(self.variant)
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if self.target_mode not in TARGET_MODES:
            raise ConfigurationError(f"target_mode must be one of {TARGET_MODES}")
        if self.target_mode == "fixed" and not self.target_schedule:
            raise ConfigurationError("target_mode = fixed needs target_schedule")
        ids = {m.id for m in self.thetas}
        if len(ids) != len(self.thetas):
            raise ConfigurationError("duplicate theta ids")
        tids = {t.id for t in self.targets}
        for tid in self.target_schedule:
            if tid not in tids:
                raise ConfigurationError(f"target schedule refers to unknown target {tid}")
        for node, tid in self.true_theta.items():
            if tid not in ids:
                raise ConfigurationError(f"true theta {tid} for node {node} is not a candidate")
            if not 1 <= node <= self.topology.node_count:
                raise ConfigurationError(f"node {node} is not in the network")
        if self.switch_day is not None and self.switch_to not in ids:
            raise ConfigurationError("switch_to must name a candidate")
        if self.learner_clusters is not None:
            known = {c.cluster_id for c in self.clusters}
            if not set(self.learner_clusters) <= known:
                raise ConfigurationError("learner_clusters refers to unknown clusters")
        slots = len(self.prices[0].price)
        if any(len(p.price) != slots for p in self.prices) or any(len(t.target) != slots for t in self.targets):
            raise ConfigurationError("prices and targets must share the slot count")
        if any(len(m.theta) != slots for m in self.thetas):
            raise ConfigurationError("theta vectors must have one entry per slot")
        if len({p.id for p in self.prices}) != len(self.prices):
            raise ConfigurationError("duplicate price ids")
        for c in self.clusters:
            c.validate(slots)
        ChanceConfig(variant_mode(self.variant), self.mu, self.nu)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.true_theta)

    @property
    def slot_count(self) -> int:
        return len(self.prices[0].price)

    @property
    def chance(self) -> ChanceConfig:
        return ChanceConfig(variant_mode(self.variant), self.mu, self.nu)

    @property
    def limits(self):
        return default_limits(self.topology, self.voltage_band)

    def learner_specs(self) -> tuple:
        if self.learner_clusters is None:
            return self.clusters
        keep = set(self.learner_clusters)
        return tuple(c for c in self.clusters if c.cluster_id in keep)

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _resolve(path: str, base: str):
    candidate = path if os.path.isabs(path) else os.path.join(base, path)
    if os.path.exists(candidate):
        return candidate
    bundled = resources.files("contsrtp.data").joinpath(path)
    if bundled.is_file():
        return io.StringIO(bundled.read_text(encoding="utf-8"))
    raise ConfigurationError(f"referenced file not found: {path}")


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def load_thetas(source) -> list[SensitivityModel]:
    """``theta_id,th1,...,thT``."""
    return [SensitivityModel(v, i) for i, v in _read_vectors(source, "theta_id")]


def load_background(source, node_count: int, slots: int) -> np.ndarray:
    out = np.zeros((node_count, slots))
    for node, v in _read_vectors(source, "node_id"):
        if not 1 <= node <= node_count or v.size != slots:
            raise ConfigurationError(f"bad background row for node {node}")
        out[node - 1] = v
    return out


def _true_theta(text: str, nodes: tuple) -> dict:
    text = text.strip()
    if ":" not in text:
        return {n: int(text) for n in nodes}
    out = {}
    for part in text.split(","):
        node, _, tid = part.partition(":")
        out[int(node)] = int(tid)
    return out


def load_scenario(path) -> Scenario:
    """Read an INI scenario file; raises :class:`ConfigurationError` on any problem."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    try:
        s = cp["scenario"]
        noise = cp["noise"] if cp.has_section("noise") else {}
        chance = cp["chance"] if cp.has_section("chance") else {}
        grid = cp["grid"] if cp.has_section("grid") else {}
        topology = load_network(_resolve(s.get("network", "network37.csv"), base))
        clusters = tuple(load_clusters(_resolve(s["clusters"], base)))
        prices = tuple(load_prices(_resolve(s["prices"], base)))
        targets = tuple(load_targets(_resolve(s["targets"], base)))
        thetas = tuple(load_thetas(_resolve(s["thetas"], base)))
        nodes = _ints(s.get("nodes", "1"))
        opt = lambda key: (s.get(key, "") or "").strip()  # noqa: E731
        background = None
        if (grid.get("background", "") or "").strip():
            background = load_background(
                _resolve(grid["background"].strip(), base), topology.node_count, len(prices[0].price)
            )
        return Scenario(
            topology=topology,
            clusters=clusters,
            prices=prices,
            targets=targets,
            thetas=thetas,
            true_theta=_true_theta(s["true_theta"], nodes),
            horizon=int(s.get("horizon", "365")),
            seed=int(s.get("seed", "0")),
            variant=s.get("variant", "ConTS-B").strip(),
            noise=PreferenceNoiseConfig(
                float(noise.get("sigma", "0.5")),
                float(noise.get("sigma_obs", "0.0")),
                str(noise.get("truncate_at_zero", "true")).strip().lower() in ("1", "true", "yes", "on"),
            ),
            mu=float(chance.get("mu", "0.1")),
            nu=float(chance.get("nu", "0.1")),
            voltage_band=float(grid.get("voltage_band", "0.05")),
            target_mode=s.get("target_mode", "iid").strip(),
            target_schedule=_ints(opt("target_schedule")),
            target_jitter=float(s.get("target_jitter", "0.15")),
            learner_clusters=_ints(opt("learner_clusters")) or None,
            switch_day=int(opt("switch_day")) if opt("switch_day") else None,
            switch_to=int(opt("switch_to")) if opt("switch_to") else None,
            safe_prices=_ints(opt("safe_prices")) or None,
            lam=float(s.get("lam", "0.0")),
            prior_weights=_floats(opt("prior_weights")) or None,
            background=background,
        )
    except KeyError as exc:
        raise ConfigurationError(f"scenario {path} is missing {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"scenario {path}: {exc}") from exc


def bundled_scenario(name: str = "base.ini") -> Scenario:
    """The calibrated single-node test case shipped in ``contsrtp/data``."""
    with resources.as_file(resources.files("contsrtp.data").joinpath(name)) as p:
        return load_scenario(str(p))
