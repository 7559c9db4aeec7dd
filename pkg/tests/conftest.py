import numpy as np
import pytest

from contsrtp.clusters import INTERRUPTIBLE, UNINTERRUPTIBLE, ClusterSpec
from contsrtp.grid import LineParams, build_topology

ACCEPTANCE_LINES: list[str] = []


def random_tree(rng, n, v0=12_500.0, s_max=None):
    """Random radial tree on ``n`` nodes: node i hangs from a uniformly drawn node < i."""
    lines = []
    for i in range(1, n + 1):
        parent = int(rng.integers(0, i))
        cap = float(rng.uniform(5, 80)) if s_max is None else float(s_max)
        lines.append(LineParams(i, parent, i, float(rng.uniform(0.005, 0.3)), float(rng.uniform(0.005, 0.3)), cap))
    return build_topology(lines, v0)


def random_spec(rng, slots, slot_hours=None):
    dt = 24.0 / slots if slot_hours is None else slot_hours
    t1 = int(rng.integers(1, slots + 1))
    if rng.random() < 0.5:
        t2 = int(rng.integers(t1, slots + 1))
        rho = float(rng.uniform(0.5, 5.0))
        energy = float(rng.uniform(0, 1) * rho * dt * (t2 - t1 + 1))
        return ClusterSpec(INTERRUPTIBLE, t1, t2, energy, rho, beta=float(rng.uniform(0.5, 2)))
    width = int(rng.integers(1, slots + 1))
    pulse = tuple(rng.uniform(0.1, 3.0, width))
    last = slots - width + 1
    t1 = int(rng.integers(1, last + 1))
    t2 = int(rng.integers(t1, last + 1))
    return ClusterSpec(UNINTERRUPTIBLE, t1, t2, pulse=pulse, beta=float(rng.uniform(0.5, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def report():
    """Collects one summary line per acceptance criterion."""

    def add(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
