import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from hardcore.landscape import EnergyLandscape  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def small_landscapes(draw, min_states=2, max_states=10, max_energy=4, extra_edge_prob=0.25):
    """Connected landscape with random integer energies (not all equal)."""
    n = draw(st.integers(min_states, max_states))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    tree = {(p, i) for i, p in zip(range(1, n), parents)}
    extra = [(u, v) for u in range(n) for v in range(u + 1, n)
             if (u, v) not in tree and draw(st.floats(0, 1)) < extra_edge_prob]
    # keep the graph sparse enough for exhaustive path enumeration
    edges = sorted(tree) + extra[:n]
    energies = draw(st.lists(st.integers(0, max_energy), min_size=n, max_size=n))
    if len(set(energies)) == 1:
        energies[draw(st.integers(0, n - 1))] += 1
    return EnergyLandscape(energies, edges)


@st.composite
def queries(draw, max_states=10, max_target=3):
    """A landscape, a start state and a target set not containing it."""
    land = draw(small_landscapes(max_states=max_states))
    x = draw(st.integers(0, land.n - 1))
    others = [s for s in range(land.n) if s != x]
    size = draw(st.integers(1, min(max_target, len(others))))
    target = draw(st.lists(st.sampled_from(others), min_size=size, max_size=size, unique=True))
    return land, x, frozenset(target)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and echo it."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
