import numpy as np
import pytest

from gvcmarkov.core import Labels, from_components
from gvcmarkov.ingest import SyntheticSpec, chain_example, random_economy


@pytest.fixture
def chain3():
    return chain_example(0.3, 0.3)


@pytest.fixture
def small_economy():
    return random_economy(SyntheticSpec(J=3, S=4, density=0.5, seed=7))


@pytest.fixture
def autarky():
    """Two countries, two sectors, no cross-border trade at all."""
    Z = np.zeros((4, 4))
    Z[:2, :2] = [[1.0, 2.0], [0.5, 1.0]]
    Z[2:, 2:] = [[2.0, 1.0], [1.0, 3.0]]
    F = np.array([[3.0, 0.0], [2.0, 0.0], [0.0, 4.0], [0.0, 2.5]])
    return from_components(Labels(("AA", "BB"), ("s1", "s2")), Z, F)


def economies(count, start=0):
    """Random economies with J in 2..5, S in 2..6 and mixed densities."""
    rng = np.random.default_rng(start)
    out = []
    for k in range(count):
        spec = SyntheticSpec(J=int(rng.integers(2, 6)), S=int(rng.integers(2, 7)),
                             density=float(rng.choice([0.2, 0.5, 1.0])), seed=start + k)
        out.append(random_economy(spec))
    return out


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
