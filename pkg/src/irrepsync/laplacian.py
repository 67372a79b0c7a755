"""Measurement graphs and the per-irrep block Laplacians built from them."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import StructuralError, UsageError
from .group import Group, IrrepIndex, Rotation, as_group, irrep_blocks, rotations_from_matrices, stack_matrices
from .harmonic import Kernel

DENSE_LIMIT = 2000


class NegativeWeightWarning(UserWarning):
    pass


@dataclass
class MeasurementGraph:
    """Edges stored once with i < j; the reverse measurement is the inverse.

    ``measurements[e]`` is the fundamental matrix of g~_ij for ``edges[e] = (i, j)``.
    """

    group: Group
    n: int
    edges: np.ndarray
    measurements: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        self.group = as_group(self.group)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.measurements = np.asarray(self.measurements, dtype=float).reshape(-1, self.group.d, self.group.d)
        self.kappa = np.asarray(self.kappa, dtype=float).reshape(-1)
        if self.n < 1:
            raise UsageError("graph needs at least one node")
        if not (len(self.edges) == len(self.measurements) == len(self.kappa)):
            raise UsageError("edge, measurement and kappa counts differ")
        if len(self.edges):
            i, j = self.edges[:, 0], self.edges[:, 1]
            if np.any(i == j):
                raise UsageError("self-loops are not allowed")
            if np.any(self.edges < 0) or np.any(self.edges >= self.n):
                raise UsageError(f"node index out of range [0, {self.n})")
            flip = i > j
            if np.any(flip):
                self.edges[flip] = self.edges[flip][:, ::-1]
                self.measurements[flip] = np.swapaxes(self.measurements[flip], 1, 2)
            if len(np.unique(self.edges, axis=0)) != len(self.edges):
                raise UsageError("duplicate edges")
            if np.any(self.kappa <= 0) or not np.all(np.isfinite(self.kappa)):
                raise UsageError("edge concentrations must be positive and finite")

    @classmethod
    def from_edges(cls, group, n, edge_list):
        """Build from ``(i, j, Rotation, kappa)`` tuples."""
        group = as_group(group)
        edge_list = list(edge_list)
        if not edge_list:
            return cls(group, n, np.zeros((0, 2)), np.zeros((0, group.d, group.d)), np.zeros(0))
        ij = [(e[0], e[1]) for e in edge_list]
        mats = stack_matrices([e[2] for e in edge_list])
        return cls(group, n, ij, mats, [e[3] for e in edge_list])

    @property
    def n_edges(self):
        return len(self.edges)

    def rotations(self):
        return rotations_from_matrices(self.measurements) if self.n_edges else []

    def adjacency(self):
        i, j = self.edges.T
        a = sparse.coo_matrix((np.ones(self.n_edges), (i, j)), shape=(self.n, self.n))
        return (a + a.T).tocsr()

    def components(self):
        count, labels = connected_components(self.adjacency(), directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(count)]

    def check_connected(self):
        comps = self.components()
        if len(comps) > 1:
            sizes = ", ".join(str(len(c)) for c in comps)
            raise StructuralError(f"graph has {len(comps)} connected components (sizes {sizes})", components=comps)

    def measurement(self, i, j):
        """g~_ij for either orientation of a stored edge."""
        a, b = min(i, j), max(i, j)
        hit = np.flatnonzero((self.edges[:, 0] == a) & (self.edges[:, 1] == b))
        if not len(hit):
            raise UsageError(f"no edge between {i} and {j}")
        m = self.measurements[hit[0]]
        return Rotation.from_matrix(m if i < j else m.T)


def attraction_weights(coefficients, kernel):
    """Map loss Fourier scalars to Laplacian edge weights.

    Dirichlet scalars of a loss that grows with the residual are negative at
    the orders that matter (the quadratic loss has K^1 < 0), so the weight is
    -K. Fejer scalars come out nonnegative and are used as they are.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    return coefficients if Kernel(kernel) is Kernel.FEJER else -coefficients


@dataclass
class RhoLaplacian:
    """Block Laplacian stored as per-edge off-diagonal blocks plus degrees."""

    irrep: IrrepIndex
    n: int
    edges: np.ndarray
    blocks: np.ndarray  # (E, d, d): the (i, j) block, i.e. -w_ij rho(g~_ij)
    degrees: np.ndarray

    @property
    def dim(self):
        return self.irrep.dim

    @property
    def size(self):
        return self.n * self.dim

    def to_sparse(self):
        d = self.dim
        rows, cols, vals = [], [], []
        base = np.arange(d)
        r_off = (self.edges[:, 0, None, None] * d + base[None, :, None]) * np.ones((1, 1, d), dtype=np.int64)
        c_off = (self.edges[:, 1, None, None] * d + base[None, None, :]) * np.ones((1, d, 1), dtype=np.int64)
        rows += [r_off.ravel(), c_off.ravel()]
        cols += [c_off.ravel(), r_off.ravel()]
        vals += [self.blocks.ravel(), self.blocks.ravel()]
        diag = np.arange(self.size)
        rows.append(diag)
        cols.append(diag)
        vals.append(np.repeat(self.degrees, d))
        m = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.size, self.size)
        )
        return m.tocsr()

    def to_dense(self):
        d = self.dim
        out = np.zeros((self.size, self.size))
        for (i, j), b in zip(self.edges, self.blocks):
            out[i * d : (i + 1) * d, j * d : (j + 1) * d] = b
            out[j * d : (j + 1) * d, i * d : (i + 1) * d] = b.T
        out[np.diag_indices(self.size)] = np.repeat(self.degrees, d)
        return out

    def matrix(self):
        """Dense below the size threshold, CSR above it."""
        return self.to_dense() if self.size <= DENSE_LIMIT else self.to_sparse()

    def norm_bound(self):
        """Max absolute row sum, an upper bound on the spectral norm."""
        m = self.to_sparse()
        return float(np.max(np.asarray(abs(m).sum(axis=1)).ravel())) if self.size else 0.0

    def dump_triplets(self, path):
        m = self.to_sparse().tocoo()
        order = np.lexsort((m.col, m.row))
        with open(path, "w") as fh:
            fh.write(f"# {self.irrep.group.value} order={self.irrep.index} size={self.size}\n")
            for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def _edge_weight_vector(graph, weights):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != graph.n_edges:
        raise UsageError(f"expected {graph.n_edges} edge weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise UsageError("edge weights must be finite")
    return w


def _resolve_negative(w, clamp):
    if np.any(w < 0):
        if clamp:
            return np.maximum(w, 0.0)
        warnings.warn(
            f"{int(np.sum(w < 0))} negative edge weights; Laplacian may be indefinite",
            NegativeWeightWarning,
            stacklevel=3,
        )
    return w


def build_rho_laplacian(graph, weights, irrep, clamp_negative=False, check=True):
    """Block Laplacian: diagonal D_i I, block (i, j) = -w_ij rho(g~_ij).

    ``weights`` holds one attraction weight per edge for this irrep.
    """
    if not isinstance(irrep, IrrepIndex):
        irrep = IrrepIndex(graph.group, int(irrep))
    if irrep.group is not graph.group:
        raise UsageError("irrep and graph belong to different groups")
    if check:
        graph.check_connected()
    w = _resolve_negative(_edge_weight_vector(graph, weights), clamp_negative)
    if graph.n_edges:
        rho = irrep_blocks(graph.group, irrep.index, graph.measurements, lmin=irrep.index)[0]
    else:
        rho = np.zeros((0, irrep.dim, irrep.dim))
    deg = np.zeros(graph.n)
    np.add.at(deg, graph.edges[:, 0], w)
    np.add.at(deg, graph.edges[:, 1], w)
    return RhoLaplacian(irrep, graph.n, graph.edges.copy(), -w[:, None, None] * rho, deg)


def build_weight_laplacian(graph, weights, clamp_negative=False):
    """Scalar N x N graph Laplacian of the edge weights."""
    w = _resolve_negative(_edge_weight_vector(graph, weights), clamp_negative)
    i, j = graph.edges.T
    out = np.zeros((graph.n, graph.n))
    np.add.at(out, (i, j), -w)
    np.add.at(out, (j, i), -w)
    out[np.diag_indices(graph.n)] = -out.sum(axis=1)
    return out


def block_diagonal_S(ground_truth, irrep):
    """Block-diagonal matrix of rho(g_i), one block per node."""
    mats = stack_matrices(ground_truth) if not isinstance(ground_truth, np.ndarray) else ground_truth
    if not isinstance(irrep, IrrepIndex):
        raise UsageError("irrep must be an IrrepIndex")
    blocks = irrep_blocks(irrep.group, irrep.index, mats, lmin=irrep.index)[0]
    d = irrep.dim
    out = np.zeros((len(blocks) * d, len(blocks) * d))
    for k, b in enumerate(blocks):
        out[k * d : (k + 1) * d, k * d : (k + 1) * d] = b
    return out
