"""End-to-end solver: loss weights, Laplacians, eigenspaces, consensus, recovery."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .consensus import REFINE_STEPS, denoise_graph, grid_step, project_to_so, recover_rotations
from .errors import IrrepSyncError, UsageError
from .evaluation import error_report
from .group import LMAX_CAP, IrrepIndex
from .harmonic import Kernel, LossKind, LossSpec, edge_weights, loss_fourier_coefficients
from .laplacian import attraction_weights, build_rho_laplacian
from .spectral import extract_block
from .synthesis import SynthesisConfig, generate_instance

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    lmax: int = 8
    loss: LossKind = LossKind.CAUCHY
    kernel: Kernel = Kernel.FEJER
    lam: Optional[float] = None
    grid_resolution: Optional[float] = None
    refine_steps: int = REFINE_STEPS
    seed: int = 0
    threads: int = 1
    baseline: bool = False
    clamp_negative: bool = False
    weighting: str = "kappa"  # kappa | uniform
    eig_method: str = "auto"

    def __post_init__(self):
        self.loss = LossKind(self.loss)
        self.kernel = Kernel(self.kernel)
        if self.baseline:
            self.lmax, self.loss = 1, LossKind.QUADRATIC
        if not 1 <= self.lmax <= LMAX_CAP:
            raise UsageError(f"lmax must lie in [1, {LMAX_CAP}]")
        if self.grid_resolution is not None and self.grid_resolution > np.pi / (2 * self.lmax + 1):
            raise UsageError("grid resolution must not exceed pi/(2 lmax + 1)")
        if self.refine_steps < 0:
            raise UsageError("refine_steps must be non-negative")
        if self.weighting not in ("kappa", "uniform"):
            raise UsageError("weighting must be 'kappa' or 'uniform'")
        if self.loss is LossKind.CUSTOM:
            raise UsageError("custom losses are only available through the library API")

    @property
    def loss_spec(self):
        return LossSpec(self.loss, self.lam)


@dataclass
class SolveResult:
    estimate: object
    denoised: object
    blocks: list
    weights: np.ndarray
    report: dict = field(default_factory=dict)


def _laplacian_block(graph, weights, l, config):
    L = build_rho_laplacian(
        graph, weights[:, l], IrrepIndex(graph.group, l), clamp_negative=config.clamp_negative, check=False
    )
    return extract_block(L, method=config.eig_method, seed=config.seed + l)


def solve(graph, config=None, truth=None):
    """Run the full pipeline on a measurement graph."""
    config = config or SolverConfig()
    timings = {}
    t0 = time.perf_counter()
    graph.check_connected()
    kappas = graph.kappa if config.weighting == "kappa" else np.ones(graph.n_edges)
    coeffs = edge_weights(config.loss_spec, graph.group, kappas, config.lmax, config.kernel)
    weights = attraction_weights(coeffs, config.kernel)
    timings["weights"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    orders = range(1, config.lmax + 1)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            blocks = list(pool.map(lambda l: _laplacian_block(graph, weights, l, config), orders))
    else:
        blocks = [_laplacian_block(graph, weights, l, config) for l in orders]
    timings["spectral"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    denoised = denoise_graph(blocks, graph, config.grid_resolution, config.refine_steps, config.threads)
    timings["consensus"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    estimate = recover_rotations(denoised)
    timings["recovery"] = time.perf_counter() - t0

    quad = {}
    for lam in sorted({config.loss_spec.edge_lambda(graph.group.d, k) for k in kappas}, key=lambda v: v or 0.0):
        fw = loss_fourier_coefficients(config.loss_spec, lam, config.lmax, config.kernel, graph.group)
        quad[str(lam)] = {"error": fw.error, "fallback_nodes": fw.nodes}
    report = {
        "backend": _kernels.BACKEND,
        "group": graph.group.value,
        "nodes": graph.n,
        "edges": graph.n_edges,
        "config": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(config).items()},
        "grid_step": grid_step(graph.group, config.lmax, config.grid_resolution),
        "timings": timings,
        "weights": {
            "negative_count": int(np.sum(weights[:, 1:] < 0)),
            "min": float(weights[:, 1:].min()) if graph.n_edges else 0.0,
            "max": float(weights[:, 1:].max()) if graph.n_edges else 0.0,
            "quadrature": quad,
        },
        "spectral": [
            {
                "order": b.irrep.index,
                "eigenvalues": [float(v) for v in b.eigenvalues],
                "gap": float(b.gap),
                "solver": b.diagnostics["solver"],
                "residual_max": b.diagnostics["residual_max"],
            }
            for b in blocks
        ],
        "edges_denoised": {
            "peak": [float(v) for v in denoised.peaks],
            "sharpness": [float(v) for v in denoised.sharpness],
        },
    }
    if truth is not None:
        report["metrics"] = error_report(truth, estimate.matrices).as_dict()
    return SolveResult(estimate, denoised, blocks, weights, report)


def baseline_edges(graph):
    """Edges of the plain eigenvector method in the defining representation:
    the projected Gram blocks of the bottom eigenvectors, kappa-weighted."""
    d = graph.group.d
    n = graph.n
    big = np.zeros((n * d, n * d))
    deg = np.zeros(n)
    for (i, j), m, k in zip(graph.edges, graph.measurements, graph.kappa):
        big[i * d : (i + 1) * d, j * d : (j + 1) * d] = -k * m
        big[j * d : (j + 1) * d, i * d : (i + 1) * d] = -k * m.T
        deg[i] += k
        deg[j] += k
    big[np.diag_indices(n * d)] = np.repeat(deg, d)
    _, vecs = np.linalg.eigh(big)
    nodes = np.sqrt(n) * vecs[:, :d].T.reshape(d, n, d).transpose(1, 0, 2)
    i, j = graph.edges.T
    return project_to_so(np.einsum("eba,ebc->eac", nodes[i], nodes[j]))


# ---------------------------------------------------------------------------
# sweeps


def parse_method(name, base=None):
    """``baseline`` or ``<loss>-l<order>``, e.g. ``cauchy-l8``."""
    base = base or SolverConfig()
    name = name.strip().lower()
    if name == "baseline":
        return replace(base, baseline=True, lmax=1, loss=LossKind.QUADRATIC)
    try:
        loss, order = name.rsplit("-l", 1)
        return replace(base, baseline=False, loss=LossKind(loss), lmax=int(order))
    except ValueError:
        raise UsageError(f"bad method name {name!r}; use 'baseline' or '<loss>-l<order>'") from None


@dataclass
class SweepConfig:
    synthesis: SynthesisConfig
    methods: list
    corruptions: list
    seeds: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)


def sweep(cfg, progress=None):
    """Mean metrics over seeds for every (method, corruption) cell.

    Each seed uses one instance shared by all methods so comparisons are paired.
    """
    rows = []
    per_seed = {}
    methods = {m: parse_method(m, cfg.solver) for m in cfg.methods}
    for corruption in cfg.corruptions:
        for s in range(cfg.seeds):
            syn = replace(cfg.synthesis, corruption=corruption, seed=cfg.synthesis.seed + s)
            inst = generate_instance(syn)
            for name, solver in methods.items():
                try:
                    res = solve(inst.graph, replace(solver, seed=solver.seed + s))
                    rep = error_report(inst.truth, res.estimate.matrices)
                    val = (rep.d_F, rep.d_inf)
                except IrrepSyncError as exc:
                    log.warning("cell %s corruption=%s seed=%d failed: %s", name, corruption, s, exc)
                    val = (np.nan, np.nan)
                per_seed.setdefault((name, corruption), []).append(val)
                if progress:
                    progress(name, corruption, s, val)
    for name in cfg.methods:
        for corruption in cfg.corruptions:
            vals = np.array(per_seed[(name, corruption)])
            ok = ~np.isnan(vals[:, 0])
            rows.append(
                {
                    "method": name,
                    "corruption": corruption,
                    "d_F_mean": float(np.mean(vals[ok, 0])) if ok.any() else np.nan,
                    "d_inf_mean": float(np.mean(vals[ok, 1])) if ok.any() else np.nan,
                    "d_F_std": float(np.std(vals[ok, 0])) if ok.any() else np.nan,
                    "runs": int(ok.sum()),
                    "failures": int((~ok).sum()),
                }
            )
    return rows, per_seed


def write_sweep_csv(path, rows, meta=None):
    cols = ["method", "corruption", "d_F_mean", "d_inf_mean", "d_F_std", "runs", "failures", "cell"]
    with open(path, "w") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        fh.write(",".join(cols) + "\n")
        for r in rows:
            cell = f"{r['d_F_mean']:.3f}({r['d_inf_mean']:.3f})"
            fh.write(",".join(str(r[c]) for c in cols[:-1]) + f",{cell}\n")
