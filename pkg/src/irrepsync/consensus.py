"""Per-edge band-limited posteriors, their maximization over the group, and
absolute-rotation recovery from the denoised edges."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericError, UsageError
from .group import (
    Group,
    IrrepIndex,
    Rotation,
    as_group,
    euler_to_matrices,
    expmap,
    irrep_blocks,
    real_small_d,
    rotations_from_matrices,
    so2_matrices,
    z_rotation_pattern,
)
from .harmonic import plancherel_weight
from .laplacian import MeasurementGraph

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)
REFINE_STEPS = 40
REFINE_SWEEPS = 4
NEWTON_STEPS = 3
FD_STEP = 1e-4
GRID_CHUNK = 8


# ---------------------------------------------------------------------------
# posteriors


@dataclass
class EdgePosterior:
    """Coefficients D^l_ij = (Phi^l_i)^T Phi^l_j for l = 1..lmax."""

    group: Group
    i: int
    j: int
    coeffs: list

    def __post_init__(self):
        self.group = as_group(self.group)

    @property
    def lmax(self):
        return len(self.coeffs)

    def transpose(self):
        return EdgePosterior(self.group, self.j, self.i, [c.T for c in self.coeffs])

    def value(self, mats):
        return posterior_values(self.group, [c[None] for c in self.coeffs], np.asarray(mats)[None])[0]


def _check_blocks(blocks):
    if not blocks:
        raise UsageError("no spectral blocks given")
    orders = [b.irrep.index for b in blocks]
    if orders != list(range(1, len(blocks) + 1)):
        raise UsageError(f"spectral blocks must cover orders 1..lmax in sequence, got {orders}")
    return blocks[0].irrep.group


def posterior_coefficients(blocks, edges):
    """Stacked coefficients for many edges: list over l of (E, d_l, d_l)."""
    _check_blocks(blocks)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    out = []
    for b in blocks:
        nodes = b.node_blocks()
        out.append(np.einsum("eba,ebc->eac", nodes[edges[:, 0]], nodes[edges[:, 1]]))
    return out


def edge_posterior(blocks, i, j):
    group = _check_blocks(blocks)
    coeffs = [c[0] for c in posterior_coefficients(blocks, [(i, j)])]
    return EdgePosterior(group, int(i), int(j), coeffs)


def _weights(group, lmax):
    return [plancherel_weight(IrrepIndex(group, l)) for l in range(1, lmax + 1)]


def posterior_values(group, coeffs, mats):
    """f_e(R_e) = sum_l w_l Tr(rho_l(R_e)^T C_l[e]) for paired (E, d, d) inputs."""
    group = as_group(group)
    lmax = len(coeffs)
    mats = np.asarray(mats, dtype=float)
    blocks = irrep_blocks(group, lmax, mats, lmin=1)
    out = np.zeros(mats.shape[0])
    for w, b, c in zip(_weights(group, lmax), blocks, coeffs):
        out += w * np.einsum("eab,eab->e", b, c)
    return out


def peak_normalizer(group, lmax):
    """Largest attainable value: a delta posterior evaluated at its centre."""
    return float(sum(w * IrrepIndex(group, l).dim for l, w in zip(range(1, lmax + 1), _weights(group, lmax))))


# ---------------------------------------------------------------------------
# grids


def grid_step(group, lmax, grid_resolution=None):
    group = as_group(group)
    if group is Group.SO2:
        cap = 2.0 * np.pi / (8 * lmax)
    else:
        cap = np.pi / (2 * lmax + 1)
    if grid_resolution is None:
        return cap
    if grid_resolution <= 0:
        raise UsageError("grid resolution must be positive")
    if grid_resolution > np.pi / (2 * lmax + 1) + 1e-15:
        raise UsageError(f"grid resolution must not exceed pi/(2 lmax + 1) = {np.pi / (2 * lmax + 1):.4g}")
    return min(grid_resolution, cap)


def so2_grid(step):
    n = int(np.ceil(2.0 * np.pi / step))
    return 2.0 * np.pi * np.arange(n) / n


def so3_grid(step):
    """Euler grid axes: alpha, gamma on [0, 2pi), beta at cell midpoints of [0, pi]."""
    na = int(np.ceil(2.0 * np.pi / step))
    nb = int(np.ceil(np.pi / step))
    alpha = 2.0 * np.pi * np.arange(na) / na
    beta = np.pi * (np.arange(nb) + 0.5) / nb
    return alpha, beta, alpha.copy()


def _so2_grid_values(coeffs, angles):
    # Tr(rho_k^T C) = cos(k t)(C00 + C11) + sin(k t)(C01 - C10)
    k = np.arange(1, len(coeffs) + 1)
    a = np.stack([c[:, 0, 0] + c[:, 1, 1] for c in coeffs], 1)
    b = np.stack([c[:, 0, 1] - c[:, 1, 0] for c in coeffs], 1)
    kt = k[:, None] * angles[None, :]
    return a @ np.cos(kt) + b @ np.sin(kt)


def _so3_grid_values(coeffs, alpha, beta, gamma):
    """Posterior on the product Euler grid, shape (E, n_alpha, n_beta, n_gamma).

    With D = Z(a) d(b) Z(g), Tr(D^T C) = <d(b), Z(-a) C Z(-g)>, so the z
    rotations are applied to the coefficients once per (a, g) pair and the
    beta dependence reduces to one matrix product per order.
    """
    lmax = len(coeffs)
    n_e = coeffs[0].shape[0]
    na, nb, ng = len(alpha), len(beta), len(gamma)
    dr = real_small_d(lmax, beta, lmin=1)
    total = np.zeros((n_e, na, ng, nb))
    for l, w_l, c, d in zip(range(1, lmax + 1), _weights(Group.SO3, lmax), coeffs, dr):
        k, sigma = z_rotation_pattern(l)
        ca = np.cos(alpha[:, None] * k[None, :])
        sa = -np.sin(alpha[:, None] * k[None, :]) * sigma[None, :]
        x = ca[None, :, :, None] * c[:, None] + sa[None, :, :, None] * c[:, None, ::-1, :]
        cg = np.cos(gamma[:, None] * k[None, :])
        sg = -np.sin(gamma[:, None] * k[::-1][None, :]) * sigma[::-1][None, :]
        y = x[:, :, None] * cg[None, None, :, None, :] + x[:, :, None, :, ::-1] * sg[None, None, :, None, :]
        w = 2 * l + 1
        total += w_l * (y.reshape(-1, w * w) @ d.reshape(nb, w * w).T).reshape(n_e, na, ng, nb)
    return total.transpose(0, 1, 3, 2)


def _grid_argmax(group, coeffs, step):
    """Best grid point per edge (first index on ties) as matrices."""
    n_e = coeffs[0].shape[0]
    if group is Group.SO2:
        angles = so2_grid(step)
        vals = _so2_grid_values(coeffs, angles)
        return so2_matrices(angles[np.argmax(vals, axis=1)])
    alpha, beta, gamma = so3_grid(step)
    best = np.empty((n_e, 3))
    for start in range(0, n_e, GRID_CHUNK):
        sl = slice(start, start + GRID_CHUNK)
        vals = _so3_grid_values([c[sl] for c in coeffs], alpha, beta, gamma)
        flat = np.argmax(vals.reshape(vals.shape[0], -1), axis=1)
        ia, ib, ig = np.unravel_index(flat, vals.shape[1:])
        best[sl] = np.stack([alpha[ia], beta[ib], gamma[ig]], 1)
    return euler_to_matrices(best[:, 0], best[:, 1], best[:, 2])


# ---------------------------------------------------------------------------
# refinement


def _tangent_dim(group):
    return 1 if group is Group.SO2 else 3


def _moved(group, base, omega):
    return base @ expmap(group, omega)


def _golden_line(fn, group, base, axis, radius, steps, f_base):
    """Maximize fn(base exp(t axis)) over t in [-r, r] per edge; never worse than t = 0."""
    n_e = base.shape[0]
    a = -radius * np.ones(n_e)
    b = radius * np.ones(n_e)

    def at(t):
        return fn(_moved(group, base, t[:, None] * axis[None, :]))

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = at(c), at(d)
    for _ in range(steps):
        left = fc > fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
        fnew = at(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fnew, fd),
            np.where(left, fc, fnew),
        )
    t = 0.5 * (a + b)
    cand = _moved(group, base, t[:, None] * axis[None, :])
    f_cand = fn(cand)
    keep = f_cand > f_base
    return np.where(keep[:, None, None], cand, base), np.where(keep, f_cand, f_base)


def _newton_polish(fn, group, base, f_base, h=FD_STEP, steps=NEWTON_STEPS):
    """Finite-difference Newton steps in tangent coordinates, accepted only on ascent."""
    m = _tangent_dim(group)
    eye = np.eye(m)
    n_e = base.shape[0]
    for _ in range(steps):
        grad = np.empty((n_e, m))
        hess = np.empty((n_e, m, m))
        for k in range(m):
            fp = fn(_moved(group, base, np.broadcast_to(h * eye[k], (n_e, m))))
            fm = fn(_moved(group, base, np.broadcast_to(-h * eye[k], (n_e, m))))
            grad[:, k] = (fp - fm) / (2 * h)
            hess[:, k, k] = (fp - 2 * f_base + fm) / h**2
        for k in range(m):
            for q in range(k + 1, m):
                e1, e2 = eye[k], eye[q]
                fpp = fn(_moved(group, base, np.broadcast_to(h * (e1 + e2), (n_e, m))))
                fpm = fn(_moved(group, base, np.broadcast_to(h * (e1 - e2), (n_e, m))))
                fmp = fn(_moved(group, base, np.broadcast_to(h * (e2 - e1), (n_e, m))))
                fmm = fn(_moved(group, base, np.broadcast_to(-h * (e1 + e2), (n_e, m))))
                hess[:, k, q] = hess[:, q, k] = (fpp - fpm - fmp + fmm) / (4 * h**2)
        # ascent only where the Hessian is negative definite
        evals = np.linalg.eigvalsh(hess)
        ok = np.all(evals < 0, axis=1)
        safe = np.where(ok[:, None, None], hess, -np.eye(m)[None])
        step = -np.linalg.solve(safe, grad[:, :, None])[:, :, 0]
        step[~ok] = 0.0
        cand = _moved(group, base, step)
        f_cand = fn(cand)
        keep = ok & (f_cand >= f_base)
        base = np.where(keep[:, None, None], cand, base)
        f_base = np.where(keep, f_cand, f_base)
    return base, f_base


def maximize_posteriors(group, coeffs, grid_resolution=None, refine_steps=REFINE_STEPS):
    """Grid search then local refinement for a stack of posteriors.

    Returns ``(mats, values)``: the maximizers as (E, d, d) and the posterior
    values there. The signed posterior is maximized; see ``argmax_on_group``.
    """
    group = as_group(group)
    if not coeffs:
        raise UsageError("empty coefficient set")
    lmax = len(coeffs)
    step = grid_step(group, lmax, grid_resolution)
    coeffs = [np.asarray(c, dtype=float) for c in coeffs]

    def fn(mats):
        return posterior_values(group, coeffs, mats)

    base = _grid_argmax(group, coeffs, step)
    f_base = fn(base)
    axes = np.eye(_tangent_dim(group))
    radius = step
    if refine_steps > 0:
        for _ in range(REFINE_SWEEPS):
            for axis in axes:
                base, f_base = _golden_line(fn, group, base, axis, radius, refine_steps, f_base)
            radius *= 0.5
        base, f_base = _newton_polish(fn, group, base, f_base)
    return base, f_base


def argmax_on_group(p, grid_resolution=None, refine_steps=REFINE_STEPS):
    """Maximizer of an edge posterior and the peak value |D_ij(g)|^2 there.

    The signed posterior is maximized rather than its square: with a single
    order on SO(2) the square has a spurious twin peak half a turn away.
    """
    if not p.coeffs:
        raise UsageError("empty coefficient set")
    mats, vals = maximize_posteriors(p.group, [c[None] for c in p.coeffs], grid_resolution, refine_steps)
    return Rotation.from_matrix(mats[0]), float(vals[0] ** 2)


# ---------------------------------------------------------------------------
# denoising and recovery


@dataclass
class DenoisedGraph:
    group: Group
    n: int
    edges: np.ndarray
    estimates: np.ndarray  # (E, d, d): g^_ij for edges[e] = (i, j)
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def peaks(self):
        return self.values**2

    @property
    def sharpness(self):
        """Peak value relative to a perfect delta posterior (1 is ideal)."""
        return self.values / self.diagnostics.get("normalizer", 1.0)

    def estimate(self, i, j):
        hit = np.flatnonzero((self.edges[:, 0] == min(i, j)) & (self.edges[:, 1] == max(i, j)))
        if not len(hit):
            raise UsageError(f"no edge between {i} and {j}")
        m = self.estimates[hit[0]]
        return Rotation.from_matrix(m if i < j else m.T)

    def as_graph(self):
        return MeasurementGraph(self.group, self.n, self.edges, self.estimates, np.ones(len(self.edges)))


def denoise_graph(blocks, graph, grid_resolution=None, refine_steps=REFINE_STEPS, threads=1):
    """One posterior maximization per stored edge."""
    group = _check_blocks(blocks)
    if group is not graph.group:
        raise UsageError("spectral blocks and graph belong to different groups")
    coeffs = posterior_coefficients(blocks, graph.edges)
    n_e = graph.n_edges
    threads = max(1, int(threads))
    bounds = np.linspace(0, n_e, min(threads, max(n_e, 1)) + 1).astype(int)
    parts = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def run(sl):
        return maximize_posteriors(group, [c[sl] for c in coeffs], grid_resolution, refine_steps)

    if len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(parts[0])] if n_e else [(np.zeros((0, group.d, group.d)), np.zeros(0))]
    mats = np.concatenate([r[0] for r in results])
    vals = np.concatenate([r[1] for r in results])
    diag = {
        "lmax": len(blocks),
        "grid_step": grid_step(group, len(blocks), grid_resolution),
        "normalizer": peak_normalizer(group, len(blocks)),
    }
    return DenoisedGraph(group, graph.n, graph.edges.copy(), mats, vals, diag)


def project_to_so(m):
    """Nearest rotation matrix in Frobenius norm (batched over leading axes)."""
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m)
    if np.any(s[..., -1] <= 1e-12 * np.maximum(s[..., 0], 1e-300)):
        raise NumericError("cannot project a singular matrix onto the rotation group", diagnostics={"singular_values": s})
    det = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, -1] *= det[..., None]
    return u @ vt


def project_to_group(m):
    return Rotation.from_matrix(project_to_so(m))


def synchronize_l1(group, n, edges, mats, weights=None):
    """Spectral synchronization with the defining representation.

    Returns (N, d, d) rotations with the first fixed to the identity.
    """
    group = as_group(group)
    graph = MeasurementGraph(group, n, edges, mats, np.ones(len(edges)))
    graph.check_connected()
    d = group.d
    w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=float)
    big = np.zeros((n * d, n * d))
    deg = np.zeros(n)
    for (i, j), m, we in zip(graph.edges, graph.measurements, w):
        big[i * d : (i + 1) * d, j * d : (j + 1) * d] = -we * m
        big[j * d : (j + 1) * d, i * d : (i + 1) * d] = -we * m.T
        deg[i] += we
        deg[j] += we
    big[np.diag_indices(n * d)] = np.repeat(deg, d)
    _, vecs = linalg.eigh(big, subset_by_index=[0, d - 1])
    # node block of sqrt(N) V^T is Q^T R_i for some orthogonal Q
    blocks = np.sqrt(n) * vecs.T.reshape(d, n, d).transpose(1, 0, 2)
    if np.sum(np.linalg.det(blocks)) < 0:
        blocks[:, -1, :] *= -1.0
    rots = project_to_so(blocks)
    return np.einsum("ba,nbc->nac", rots[0], rots)


@dataclass
class RotationEstimate:
    group: Group
    matrices: np.ndarray

    @property
    def rotations(self):
        return rotations_from_matrices(self.matrices)

    def __len__(self):
        return len(self.matrices)


def recover_rotations(denoised):
    """Absolute rotations from denoised edges by unit-weight spectral sync."""
    mats = synchronize_l1(denoised.group, denoised.n, denoised.edges, denoised.estimates)
    return RotationEstimate(denoised.group, mats)


def write_posterior_csv(path, posterior, grid_resolution=None):
    """Sample |D_ij|^2 on the search grid for plotting."""
    group = posterior.group
    step = grid_step(group, posterior.lmax, grid_resolution)
    coeffs = [c[None] for c in posterior.coeffs]
    with open(path, "w") as fh:
        if group is Group.SO2:
            angles = so2_grid(step)
            vals = _so2_grid_values(coeffs, angles)[0]
            fh.write("angle,value,peak\n")
            for a, v in zip(angles, vals):
                fh.write(f"{a:.10g},{v:.10g},{v * v:.10g}\n")
            return
        alpha, beta, gamma = so3_grid(step)
        vals = _so3_grid_values(coeffs, alpha, beta, gamma)[0]
        fh.write("alpha,beta,gamma,value,peak\n")
        for ia, a in enumerate(alpha):
            for ib, b in enumerate(beta):
                for ig, g in enumerate(gamma):
                    v = vals[ia, ib, ig]
                    fh.write(f"{a:.10g},{b:.10g},{g:.10g},{v:.10g},{v * v:.10g}\n")
