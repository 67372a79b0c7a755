import numpy as np
import pytest

from irrepsync.group import haar_matrices
from irrepsync.laplacian import MeasurementGraph


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def complete_edges(n):
    i, j = np.triu_indices(n, 1)
    return np.stack([i, j], 1)


def noiseless_graph(group, truth, edges, kappa=1.0):
    i, j = np.asarray(edges).T
    rel = np.einsum("eba,ebc->eac", truth[i], truth[j])
    return MeasurementGraph(group, len(truth), edges, rel, np.full(len(edges), kappa))


def random_connected_edges(n, p, rng):
    """Erdos-Renyi edges plus a spanning path so the graph is connected."""
    keep = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p or j == i + 1]
    return np.array(keep)


def relative(truth, edges):
    i, j = np.asarray(edges).T
    return np.einsum("eba,ebc->eac", truth[i], truth[j])


def random_truth(group, n, rng):
    return haar_matrices(group, n, rng)
