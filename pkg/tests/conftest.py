import numpy as np
import pytest

from latqueue.model import InterferenceKernel, build_topology


def torus(n, d=1):
    dims = (n,) * d
    return build_topology("torus", dims, InterferenceKernel.nearest_neighbour(d))


def single_node():
    return build_topology("graph", adjacency=np.zeros((1, 1)))


def pair():
    return build_topology("graph", adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def ring3():
    return torus(3)


@pytest.fixture
def ring8():
    return torus(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
