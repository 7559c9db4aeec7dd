"""Radial distribution network and the LinDistFlow linearised power flow.

Nodes are numbered ``0..N`` with node 0 the substation.  Line ``i`` feeds
node ``i`` from its parent, so line and node arrays share the index ``i``
(position ``i - 1`` in the 0-based arrays below).

Units
-----
Demands and flows are exchanged in kW / kvar, impedances in ohms, and
squared voltages ``u = v**2`` in V^2.  The voltage-drop equation is evaluated
in SI (kW are converted to W), so a 10 kW flow through 0.0242 ohm drops
``u`` by ``2 * 10_000 * 0.0242 = 484`` V^2.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .errors import (
    CycleDetected,
    DimensionMismatch,
    DisconnectedNode,
    DuplicateLine,
    NonPositiveImpedance,
    ConfigurationError,
)

KW = 1000.0
DEFAULT_V0 = 12_500.0
NETWORK_COLUMNS = ("line_index", "parent_node", "child_node", "R_ohm", "X_ohm", "Smax_kVA")


@dataclass(frozen=True)
class LineParams:
    index: int
    parent_node: int
    child_node: int
    resistance: float
    reactance: float
    s_max: float


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Validated radial tree.  Build it with :func:`build_topology` or
    :func:`load_network` rather than directly."""

    lines: tuple[LineParams, ...]
    substation_voltage: float = DEFAULT_V0

    @property
    def node_count(self) -> int:
        return len(self.lines)

    @cached_property
    def parent(self) -> np.ndarray:
        """``parent[i - 1]`` is the parent node of node ``i``."""
        return np.array([ln.parent_node for ln in self.lines], dtype=int)

    @cached_property
    def resistance(self) -> np.ndarray:
        return np.array([ln.resistance for ln in self.lines], dtype=float)

    @cached_property
    def reactance(self) -> np.ndarray:
        return np.array([ln.reactance for ln in self.lines], dtype=float)

    @cached_property
    def s_max(self) -> np.ndarray:
        return np.array([ln.s_max for ln in self.lines], dtype=float)

    def parent_of(self, node: int) -> int:
        return int(self.parent[node - 1])

    @cached_property
    def _children(self) -> dict[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {i: [] for i in range(self.node_count + 1)}
        for i, p in enumerate(self.parent, start=1):
            kids[int(p)].append(i)
        return {k: tuple(v) for k, v in kids.items()}

    def children_of(self, node: int) -> tuple[int, ...]:
        return self._children[node]

    @cached_property
    def order(self) -> np.ndarray:
        """Nodes 1..N in root-to-leaf (breadth-first) order."""
        out, frontier = [], [0]
        while frontier:
            nxt = []
            for n in frontier:
                nxt.extend(self._children[n])
            out.extend(nxt)
            frontier = nxt
        return np.array(out, dtype=int)

    @cached_property
    def subtree_matrix(self) -> np.ndarray:
        """``M[l - 1, j - 1] = 1`` when node ``j`` lies in the subtree fed by line ``l``.

        Flows are ``M @ d``; the root path of node ``i`` is the column ``M[:, i - 1]``.
        """
        n = self.node_count
        m = np.eye(n)
        for node in self.order[::-1]:
            p = self.parent[node - 1]
            if p > 0:
                m[p - 1] += m[node - 1]
        return m

    @cached_property
    def voltage_sensitivity(self) -> tuple[np.ndarray, np.ndarray]:
        """``(SR, SX)`` with ``u = v0^2 - 2 * (SR @ dP + SX @ dQ)`` for demands in W / var."""
        m = self.subtree_matrix
        return m.T @ (self.resistance[:, None] * m), m.T @ (self.reactance[:, None] * m)


def build_topology(lines, substation_voltage: float = DEFAULT_V0) -> NetworkTopology:
    """Validate ``lines`` (iterable of :class:`LineParams`) and return a topology.

    Raises
    ------
    DuplicateLine, NonPositiveImpedance, CycleDetected, DisconnectedNode
    """
    lines = list(lines)
    if not lines:
        raise DisconnectedNode("network has no lines")
    seen_index, seen_child = set(), set()
    for ln in lines:
        if ln.index in seen_index or ln.child_node in seen_child:
            raise DuplicateLine(f"line {ln.index} (child {ln.child_node}) listed twice")
        seen_index.add(ln.index)
        seen_child.add(ln.child_node)
        if ln.parent_node == ln.child_node:
            raise CycleDetected(f"line {ln.index} connects node {ln.child_node} to itself")
        if not (ln.resistance > 0 and ln.reactance > 0 and ln.s_max > 0):
            raise NonPositiveImpedance(f"line {ln.index} has non-positive R, X or s_max")
    n = len(lines)
    if 0 in seen_child:
        raise CycleDetected("the substation (node 0) cannot be fed by a line")
    expected = set(range(1, n + 1))
    if seen_index != expected or seen_child != expected:
        raise DisconnectedNode(
            "lines must be numbered 1..N and line i must feed node i "
            f"(got lines {sorted(seen_index)}, children {sorted(seen_child)})"
        )
    for ln in lines:
        if ln.index != ln.child_node:
            raise ConfigurationError(f"line {ln.index} must feed node {ln.index}, not {ln.child_node}")
        if not 0 <= ln.parent_node <= n:
            raise DisconnectedNode(f"line {ln.index} hangs from unknown node {ln.parent_node}")
    parent = {ln.child_node: ln.parent_node for ln in lines}
    for start in range(1, n + 1):
        node, steps = start, 0
        while node != 0:
            node = parent[node]
            steps += 1
            if steps > n:
                raise CycleDetected(f"node {start} is not connected to the substation (cycle)")
    ordered = tuple(sorted(lines, key=lambda ln: ln.index))
    if substation_voltage <= 0:
        raise ConfigurationError("substation voltage must be positive")
    return NetworkTopology(ordered, float(substation_voltage))


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, str) and "\n" in source:
        return source
    raise ConfigurationError(f"network file not found: {source!r}")


def load_network(source) -> NetworkTopology:
    """Parse a network document (path, open file, or CSV text).

    Format: a header row ``line_index,parent_node,child_node,R_ohm,X_ohm,Smax_kVA``,
    one row per line, and a comment ``#v0_volts=<volts>`` giving the substation
    voltage (12.5 kV when absent).
    """
    text = _read_text(source)
    v0 = DEFAULT_V0
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "v0_volts":
                v0 = float(value)
            continue
        rows.append(line)
    if not rows:
        raise ConfigurationError("network file is empty")
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != NETWORK_COLUMNS:
        raise ConfigurationError(f"network header must be {','.join(NETWORK_COLUMNS)}")
    lines = []
    for rec in reader:
        rec = {k.strip(): v for k, v in rec.items()}
        try:
            lines.append(
                LineParams(
                    index=int(rec["line_index"]),
                    parent_node=int(rec["parent_node"]),
                    child_node=int(rec["child_node"]),
                    resistance=float(rec["R_ohm"]),
                    reactance=float(rec["X_ohm"]),
                    s_max=float(rec["Smax_kVA"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed network row {rec}") from exc
    return build_topology(lines, v0)


def bundled_network(name: str = "network37.csv") -> NetworkTopology:
    """The 37-line 12.5 kV feeder shipped with the package."""
    text = resources.files("contsrtp.data").joinpath(name).read_text(encoding="utf-8")
    return load_network(io.StringIO(text))


@dataclass(frozen=True)
class NodalDemandSchedule:
    """Per-node demand, shape ``(N, T)``; ``reactive`` defaults to zeros."""

    active: np.ndarray
    reactive: np.ndarray | None = None

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.active, dtype=float))
        q = np.zeros_like(p) if self.reactive is None else np.atleast_2d(np.asarray(self.reactive, dtype=float))
        if q.shape != p.shape:
            raise DimensionMismatch(f"active {p.shape} and reactive {q.shape} differ")
        object.__setattr__(self, "active", p)
        object.__setattr__(self, "reactive", q)

    @property
    def slot_count(self) -> int:
        return self.active.shape[1]


@dataclass(frozen=True)
class PowerFlowSolution:
    flow_p: np.ndarray  # kW, (N, T); row i - 1 is line i
    flow_q: np.ndarray  # kvar
    u: np.ndarray  # V^2, (N, T); row i - 1 is node i
    u0: float


def solve_lindistflow(topology: NetworkTopology, demand: NodalDemandSchedule) -> PowerFlowSolution:
    """Solve LinDistFlow by accumulating demand up the tree and dropping voltage down it."""
    if not isinstance(demand, NodalDemandSchedule):
        demand = NodalDemandSchedule(demand)
    n = topology.node_count
    if demand.active.shape[0] != n:
        raise DimensionMismatch(f"demand has {demand.active.shape[0]} rows, network has {n} nodes")
    parent = topology.parent
    fp = demand.active.copy()
    fq = demand.reactive.copy()
    order = topology.order
    for node in order[::-1]:
        p = parent[node - 1]
        if p > 0:
            fp[p - 1] += fp[node - 1]
            fq[p - 1] += fq[node - 1]
    u0 = topology.substation_voltage ** 2
    u = np.empty_like(fp)
    drop = 2.0 * KW * (fp * topology.resistance[:, None] + fq * topology.reactance[:, None])
    for node in order:
        p = parent[node - 1]
        upstream = u0 if p == 0 else u[p - 1]
        u[node - 1] = upstream - drop[node - 1]
    return PowerFlowSolution(fp, fq, u, u0)


@dataclass(frozen=True)
class ConstraintLimits:
    u_min: np.ndarray  # V^2 per node
    u_max: np.ndarray
    s_max: np.ndarray  # kVA per line

    def __post_init__(self):
        if np.any(self.u_min <= 0) or np.any(self.u_min >= self.u_max):
            raise ConfigurationError("voltage limits need 0 < u_min < u_max")


def default_limits(topology: NetworkTopology, band: float = 0.05, nominal: float | None = None) -> ConstraintLimits:
    """+/- ``band`` service band around ``nominal`` volts (the substation voltage by default)."""
    v = topology.substation_voltage if nominal is None else nominal
    n = topology.node_count
    return ConstraintLimits(
        u_min=np.full(n, ((1 - band) * v) ** 2),
        u_max=np.full(n, ((1 + band) * v) ** 2),
        s_max=topology.s_max.copy(),
    )


@dataclass(frozen=True)
class ViolationReport:
    """Boolean flags, shape ``(N, T)``, and their counts."""

    under_voltage: np.ndarray
    over_voltage: np.ndarray
    overflow: np.ndarray
    counts: dict = field(default_factory=dict)

    @property
    def any(self) -> bool:
        return self.total > 0

    @property
    def total(self) -> int:
        return int(self.under_voltage.sum() + self.over_voltage.sum() + self.overflow.sum())

    def by_slot(self) -> np.ndarray:
        return (self.under_voltage | self.over_voltage | self.overflow).any(axis=0)

    def nodes(self) -> np.ndarray:
        """1-based node ids with a voltage violation."""
        return np.flatnonzero((self.under_voltage | self.over_voltage).any(axis=1)) + 1

    def lines(self) -> np.ndarray:
        return np.flatnonzero(self.overflow.any(axis=1)) + 1


def check_constraints(solution: PowerFlowSolution, limits: ConstraintLimits) -> ViolationReport:
    """Flag voltage-band and apparent-power violations; limits are non-strict."""
    u = solution.u
    if u.shape[0] != limits.u_min.shape[0] or solution.flow_p.shape[0] != limits.s_max.shape[0]:
        raise DimensionMismatch("limits do not match the solution dimensions")
    under = u < limits.u_min[:, None]
    over = u > limits.u_max[:, None]
    flow = solution.flow_p**2 + solution.flow_q**2 > limits.s_max[:, None] ** 2
    counts = {
        "under_voltage": int(under.sum()),
        "over_voltage": int(over.sum()),
        "overflow": int(flow.sum()),
    }
    return ViolationReport(under, over, flow, counts)
