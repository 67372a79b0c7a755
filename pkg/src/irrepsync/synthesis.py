"""Synthetic rotation-averaging instances."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import StructuralError, UsageError
from .group import Group, as_group, haar_matrices, langevin_noise_matrices, rotations_from_matrices
from .laplacian import MeasurementGraph

DEFAULT_KAPPA = {Group.SO2: 50.0, Group.SO3: 25.0}
MAX_ATTEMPTS = 100


@dataclass
class SynthesisConfig:
    group: Group = Group.SO3
    n: int = 50
    topology: str = "small_world"  # complete | small_world | custom
    k_loc: int = 8
    p_rewire: float = 0.3
    edges: Optional[Sequence] = None
    kappa: object = None  # scalar or one value per edge; None picks the group default
    corruption: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.group = as_group(self.group)
        if self.n < 2:
            raise UsageError("graph must have >= 2 nodes")
        if not 0.0 <= self.corruption <= 1.0:
            raise UsageError("corruption fraction must lie in [0, 1]")
        if self.topology not in ("complete", "small_world", "custom"):
            raise UsageError(f"unknown topology {self.topology!r}")
        if self.topology == "custom" and self.edges is None:
            raise UsageError("custom topology needs an edge list")
        if self.kappa is None:
            self.kappa = DEFAULT_KAPPA[self.group]


@dataclass
class SyntheticInstance:
    truth: np.ndarray  # (N, d, d)
    graph: MeasurementGraph
    corrupted: np.ndarray  # bool per edge
    config: SynthesisConfig

    @property
    def truth_rotations(self):
        return rotations_from_matrices(self.truth)


def ring_lattice(n, k_loc):
    i = np.repeat(np.arange(n), k_loc // 2)
    j = (i + np.tile(np.arange(1, k_loc // 2 + 1), n)) % n
    return np.sort(np.stack([i, j], 1), axis=1)


def watts_strogatz(n, k_loc, p_rewire, rng):
    """Small-world edge set: ring lattice, each lattice edge (u, u + s) rewired
    with probability ``p_rewire`` to a uniformly chosen new endpoint.

    Returns a sorted (E, 2) array with i < j; E = n k_loc / 2.
    """
    if k_loc % 2 or k_loc < 2 or k_loc >= n:
        raise UsageError("k_loc must be even with 2 <= k_loc < n")
    if not 0.0 <= p_rewire <= 1.0:
        raise UsageError("rewire probability must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    adj = [set() for _ in range(n)]
    for u in range(n):
        for s in range(1, k_loc // 2 + 1):
            v = (u + s) % n
            adj[u].add(v)
            adj[v].add(u)
    for s in range(1, k_loc // 2 + 1):
        for u in range(n):
            v = (u + s) % n
            if v not in adj[u] or rng.random() >= p_rewire:
                continue
            if len(adj[u]) >= n - 1:
                continue
            while True:
                w = int(rng.integers(n))
                if w != u and w not in adj[u]:
                    break
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = sorted((u, v) for u in range(n) for v in adj[u] if u < v)
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _topology(config, rng):
    n = config.n
    if config.topology == "complete":
        i, j = np.triu_indices(n, 1)
        return np.stack([i, j], 1)
    if config.topology == "custom":
        edges = np.sort(np.asarray(config.edges, dtype=np.int64).reshape(-1, 2), axis=1)
        probe = MeasurementGraph(config.group, n, edges, np.tile(np.eye(config.group.d), (len(edges), 1, 1)), np.ones(len(edges)))
        probe.check_connected()
        return probe.edges
    for _ in range(MAX_ATTEMPTS):
        edges = watts_strogatz(n, config.k_loc, config.p_rewire, rng)
        probe = MeasurementGraph(config.group, n, edges, np.tile(np.eye(config.group.d), (len(edges), 1, 1)), np.ones(len(edges)))
        if len(probe.components()) == 1:
            return edges
    raise StructuralError(f"no connected small-world graph after {MAX_ATTEMPTS} attempts")


def generate_instance(config):
    rng = np.random.default_rng(config.seed)
    group = config.group
    truth = haar_matrices(group, config.n, rng)
    edges = _topology(config, rng)
    n_e = len(edges)
    kappa = np.broadcast_to(np.asarray(config.kappa, dtype=float), (n_e,)).copy()
    if np.any(kappa < 0):
        raise UsageError("kappa must be non-negative")
    noise = np.empty((n_e, group.d, group.d))
    # one batched draw per distinct kappa, in order of first appearance
    values, first = np.unique(kappa, return_index=True)
    for k in values[np.argsort(first)]:
        sel = kappa == k
        noise[sel] = langevin_noise_matrices(group, k, int(sel.sum()), rng)
    corrupted = np.zeros(n_e, dtype=bool)
    n_bad = int(round(config.corruption * n_e))
    if n_bad:
        bad = rng.choice(n_e, size=n_bad, replace=False)
        corrupted[bad] = True
        noise[bad] = haar_matrices(group, n_bad, rng)
    i, j = edges.T
    rel = np.einsum("eba,ebc->eac", truth[i], truth[j])
    # the stored kappa must be usable downstream even for an exact instance
    graph = MeasurementGraph(group, config.n, edges, rel @ noise, np.maximum(kappa, 1e-12))
    return SyntheticInstance(truth, graph, corrupted, config)


def generate(config):
    """``(ground_truth, graph)`` for a synthesis config."""
    inst = generate_instance(config)
    return inst.truth_rotations, inst.graph
