import numpy as np
import pytest

from algossip.graph import FailureModel, Supergraph


@pytest.fixture
def pair_graph():
    """Two nodes, one edge."""
    return Supergraph(2, [(0, 1)])


@pytest.fixture
def path3_graph():
    """Path 0 - 1 - 2."""
    return Supergraph(3, [(0, 1), (1, 2)])


@pytest.fixture
def ring4_graph():
    """Cycle on four nodes."""
    return Supergraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def always_on(graph):
    return FailureModel.always_on(graph)
