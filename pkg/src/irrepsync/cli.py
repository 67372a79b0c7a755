"""Command line entry point: ``irrepsync generate|solve|eval|sweep``."""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import IrrepSyncError, ParseError, UsageError
from .evaluation import error_report
from .group import as_group
from .io import (
    parse_g2o_rotations,
    read_config,
    read_graph,
    read_rotations,
    write_graph,
    write_rotations,
)
from .pipeline import SolverConfig, SweepConfig, baseline_edges, solve, sweep, write_sweep_csv
from .synthesis import SynthesisConfig, generate_instance

log = logging.getLogger("irrepsync")

SYNTH_KEYS = {"group", "n", "topology", "k_loc", "p_rewire", "kappa", "corruption", "seed", "edges"}


def _synthesis_from(cfg, path):
    unknown = set(cfg) - SYNTH_KEYS - {"methods", "corruptions", "seeds", "lmax", "loss", "kernel"}
    if unknown:
        raise ParseError(f"{path}: unknown keys {sorted(unknown)}")
    kw = {k: cfg[k] for k in SYNTH_KEYS if k in cfg}
    if "edges" in kw:
        flat = kw.pop("edges")
        flat = flat if isinstance(flat, list) else [flat]
        try:
            kw["edges"] = [tuple(int(v) for v in str(e).split("-")) for e in flat]
        except ValueError:
            raise ParseError(f"{path}: edges must look like 0-1,1-2") from None
        kw.setdefault("topology", "custom")
    if "group" in kw:
        kw["group"] = as_group(kw["group"])
    return SynthesisConfig(**kw)


def _solver_from(args):
    return SolverConfig(
        lmax=args.lmax,
        loss=args.loss,
        kernel=args.kernel,
        lam=args.lam,
        grid_resolution=args.grid_res,
        refine_steps=args.refine_steps,
        seed=args.seed,
        threads=args.threads,
        baseline=args.baseline,
        clamp_negative=args.clamp,
        weighting=args.weighting,
    )


def _read_any_graph(path, weighting):
    if str(path).endswith(".g2o"):
        return parse_g2o_rotations(path, weighting="uniform" if weighting == "uniform" else "information")
    return read_graph(path)


def cmd_generate(args):
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    syn = _synthesis_from(cfg, args.config)
    inst = generate_instance(syn)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bad = np.flatnonzero(inst.corrupted)
    write_graph(out / "graph.txt", inst.graph, extra={int(e): "corrupted" for e in bad})
    write_rotations(out / "truth.txt", syn.group, inst.truth)
    with open(out / "manifest.txt", "w") as fh:
        fh.write(f"seed={syn.seed}\n")
        fh.write(f"group={syn.group.value}\n")
        fh.write(f"nodes={syn.n}\n")
        fh.write(f"edges={inst.graph.n_edges}\n")
        fh.write(f"corrupted={len(bad)}\n")
        fh.write(f"corrupted_edges={','.join(str(int(e)) for e in bad)}\n")
    print(f"wrote {inst.graph.n_edges} edges ({len(bad)} corrupted) to {out}")
    return 0


def cmd_solve(args):
    config = _solver_from(args)
    graph = _read_any_graph(args.graph, config.weighting)
    truth = None
    if args.truth:
        group, truth = read_rotations(args.truth)
        if group is not graph.group or len(truth) != graph.n:
            raise UsageError("truth file does not match the graph")
    t0 = time.perf_counter()
    result = solve(graph, config, truth=truth)
    report = result.report
    report["timings"]["total"] = time.perf_counter() - t0
    report["input"] = str(args.graph)
    if getattr(graph, "skipped", None):
        report["skipped_records"] = graph.skipped
    if config.baseline:
        ref = baseline_edges(graph)
        report["baseline_edge_deviation"] = float(np.max(np.linalg.norm(ref - result.denoised.estimates, axis=(1, 2))))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rotations(out / "estimate.txt", graph.group, result.estimate.matrices)
    write_graph(out / "denoised.txt", result.denoised.as_graph())
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    if args.posterior_csv is not None:
        from .consensus import edge_posterior, write_posterior_csv

        e = args.posterior_csv
        if not 0 <= e < graph.n_edges:
            raise UsageError(f"edge index {e} out of range")
        i, j = graph.edges[e]
        write_posterior_csv(out / f"posterior_edge{e}.csv", edge_posterior(result.blocks, i, j), config.grid_resolution)
    summary = {k: report["metrics"][k] for k in ("d_F", "d_inf")} if "metrics" in report else {}
    print(json.dumps({"out": str(out), **summary}))
    return 0


def cmd_eval(args):
    g1, truth = read_rotations(args.truth)
    g2, est = read_rotations(args.estimate)
    if g1 is not g2 or len(truth) != len(est):
        raise UsageError("truth and estimate differ in group or size")
    rep = error_report(truth, est).as_dict()
    if not args.per_node:
        rep.pop("angular_errors")
    text = json.dumps(rep, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(args):
    cfg = read_config(args.config)
    syn = _synthesis_from(cfg, args.config)
    methods = cfg.get("methods", ["baseline", "cauchy-l8"])
    methods = methods if isinstance(methods, list) else [methods]
    corruptions = cfg.get("corruptions", [0.0, 0.2])
    corruptions = [float(c) for c in (corruptions if isinstance(corruptions, list) else [corruptions])]
    seeds = int(cfg.get("seeds", 10))
    sweep_cfg = SweepConfig(syn, [str(m) for m in methods], corruptions, seeds, _solver_from(args))

    def progress(name, corruption, s, val):
        log.info("%s corruption=%.2f seed=%d d_F=%.4f d_inf=%.4f", name, corruption, s, *val)

    rows, _ = sweep(sweep_cfg, progress)
    meta = {
        "group": syn.group.value,
        "nodes": syn.n,
        "topology": syn.topology,
        "kappa": syn.kappa,
        "seeds": seeds,
        "seed": syn.seed,
    }
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "sweep.csv"
    write_sweep_csv(out, rows, meta)
    print(out.read_text(), end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="irrepsync", description="Multi-irrep spectral rotation synchronization")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--lmax", type=int, default=8)
        sp.add_argument("--loss", choices=["quadratic", "cauchy", "gmc"], default="cauchy")
        sp.add_argument("--kernel", choices=["dirichlet", "fejer"], default="fejer")
        sp.add_argument("--lam", type=float, default=None, help="fixed loss scale (default: from kappa)")
        sp.add_argument("--grid-res", type=float, default=None)
        sp.add_argument("--refine-steps", type=int, default=40)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--baseline", action="store_true", help="lmax=1 with the quadratic loss")
        sp.add_argument("--clamp", action="store_true", help="clamp negative edge weights to zero")
        sp.add_argument("--weighting", choices=["kappa", "uniform"], default="kappa")

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("config")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default="instance")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve a graph file (.txt or .g2o)")
    s.add_argument("graph")
    s.add_argument("--truth", default=None)
    s.add_argument("--out", default="solution")
    s.add_argument("--posterior-csv", type=int, default=None, metavar="EDGE")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="compare an estimate with ground truth")
    e.add_argument("truth")
    e.add_argument("estimate")
    e.add_argument("--out", default=None)
    e.add_argument("--per-node", action="store_true")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="method x corruption table")
    w.add_argument("config")
    w.add_argument("--out", default="sweep.csv")
    solver_flags(w)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IrrepSyncError, OSError) as exc:
        print(f"error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return 2


def _provenance(exc):
    """Module of the innermost package frame that raised ``exc``."""
    name = type(exc).__name__
    tb = exc.__traceback__
    where = None
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("irrepsync"):
            where = mod
        tb = tb.tb_next
    return f"{where}:{name}" if where else name


if __name__ == "__main__":
    sys.exit(main())
