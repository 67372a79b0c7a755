"""Bottom eigenspaces of the block Laplacians."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .errors import NumericError, UsageError
from .group import IrrepIndex
from .laplacian import DENSE_LIMIT

ITER_TOL = 1e-10
GAP_WARN = 1e-9


class SmallGapWarning(UserWarning):
    pass


def smallest_eigenpairs(L, m, method="auto", seed=0, maxiter=None):
    """The ``m`` algebraically smallest eigenpairs of a RhoLaplacian (or a matrix).

    Returns ``(values, vectors, info)`` with ascending values and orthonormal
    columns. ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"``.
    """
    mat = L.matrix() if hasattr(L, "matrix") else L
    size = mat.shape[0]
    if not 1 <= m <= size:
        raise UsageError(f"cannot take {m} eigenpairs of a {size}x{size} matrix")
    if method == "auto":
        method = "dense" if size <= DENSE_LIMIT else "iterative"
    if method == "dense" or m >= size - 1:
        dense = mat.toarray() if sparse.issparse(mat) else np.asarray(mat)
        vals, vecs = linalg.eigh(dense, subset_by_index=[0, m - 1])
        info = {"solver": "dense", "iterations": 0}
    elif method == "iterative":
        op = sparse.csr_matrix(mat)
        v0 = np.random.default_rng(seed).standard_normal(size)
        maxiter = maxiter or max(1000, 20 * size)
        try:
            vals, vecs = splinalg.eigsh(op, k=m, which="SA", tol=ITER_TOL, v0=v0, maxiter=maxiter)
        except splinalg.ArpackNoConvergence as exc:
            raise NumericError(
                "iterative eigensolver did not converge",
                diagnostics={"converged": len(exc.eigenvalues), "requested": m, "maxiter": maxiter},
            ) from None
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # Lanczos vectors of a near-degenerate cluster can drift from orthonormal
        vecs, _ = np.linalg.qr(vecs)
        info = {"solver": "iterative", "iterations": maxiter}
    else:
        raise UsageError(f"unknown eigensolver {method!r}")
    resid = np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)
    info["residuals"] = resid
    return vals, vecs, info


@dataclass
class SpectralBlock:
    """Relaxed solution for one irrep: ``phi`` is d x (d N), rows scaled by sqrt(N)."""

    irrep: IrrepIndex
    phi: np.ndarray
    eigenvalues: np.ndarray
    gap: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.phi.shape[1] // self.irrep.dim

    def node(self, i):
        d = self.irrep.dim
        return self.phi[:, i * d : (i + 1) * d]

    def node_blocks(self):
        """All column blocks as an (N, d, d) array."""
        d = self.irrep.dim
        return self.phi.reshape(d, self.n, d).transpose(1, 0, 2)


def extract_block(L, method="auto", seed=0):
    d = L.dim
    want = min(d + 1, L.size)
    vals, vecs, info = smallest_eigenpairs(L, want, method=method, seed=seed)
    scale = L.norm_bound()
    gap = float(vals[d] - vals[d - 1]) if want > d else np.inf
    if gap < GAP_WARN * max(scale, 1.0):
        warnings.warn(
            f"spectral gap {gap:.3g} at order {L.irrep.index} is too small to separate the bottom subspace",
            SmallGapWarning,
            stacklevel=2,
        )
    phi = np.sqrt(L.n) * vecs[:, :d].T
    info.update({"norm_bound": scale, "residual_max": float(np.max(info["residuals"][:d]))})
    return SpectralBlock(L.irrep, phi, vals[:d], gap, info)
