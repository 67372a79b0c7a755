import json
import subprocess
import sys

import numpy as np
import pytest

from irrepsync.cli import main
from irrepsync.errors import ParseError
from irrepsync.group import haar_matrices
from irrepsync.io import (
    parse_config,
    parse_g2o_rotations,
    read_config,
    read_graph,
    read_rotations,
    write_config,
    write_g2o,
    write_graph,
    write_rotations,
)
from irrepsync.laplacian import MeasurementGraph

from .conftest import complete_edges, noiseless_graph, random_connected_edges, random_truth


def random_graph(group, n, rng):
    edges = random_connected_edges(n, 0.4, rng)
    return MeasurementGraph(group, n, edges, haar_matrices(group, len(edges), rng), rng.uniform(1, 50, len(edges)))


def same_graph(a, b, tol=1e-14):
    assert a.group is b.group and a.n == b.n
    assert np.array_equal(a.edges, b.edges)
    assert np.abs(a.measurements - b.measurements).max() <= tol
    assert np.allclose(a.kappa, b.kappa, rtol=1e-15)


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_graph_and_rotation_round_trip(tmp_path, rng, group):
    g = random_graph(group, 9, rng)
    write_graph(tmp_path / "g.txt", g, extra={0: "corrupted"})
    same_graph(g, read_graph(tmp_path / "g.txt"))
    r = haar_matrices(group, 7, rng)
    write_rotations(tmp_path / "r.txt", group, r)
    gr, back = read_rotations(tmp_path / "r.txt")
    assert gr.value == group and np.abs(back - r).max() < 1e-14


@pytest.mark.parametrize(
    "body,line",
    [
        ("SO3 2\nEDGE 0 1 1 0 0\n", 2),
        ("SO3 2\nEDGE 0 5 1 0 0 0 1\n", 2),
        ("SO3 2\n# note\nEDGE 0 1 1 0 0 0 -1\n", 3),
        ("SO4 2\n", 1),
        ("SO2 3\nEDGE 0 1 0.5 1\nFOO 1 2\n", 3),
        ("SO3 2\nEDGE 0 1 0 0 0 0 1\n", 2),
    ],
)
def test_graph_parse_errors(tmp_path, body, line):
    (tmp_path / "g.txt").write_text(body)
    with pytest.raises(ParseError) as info:
        read_graph(tmp_path / "g.txt")
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_config_parsing(tmp_path):
    cfg = parse_config("# comment\ngroup = SO3\nn=50\np_rewire=0.3\ncorruptions=0,0.2\nflag=yes\n")
    assert cfg == {"group": "SO3", "n": 50, "p_rewire": 0.3, "corruptions": [0, 0.2], "flag": True}
    with pytest.raises(ParseError, match="line 2"):
        parse_config("a=1\na=2\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_config("novalue\n")
    write_config(tmp_path / "c.txt", {"n": 4, "methods": ["baseline", "cauchy-l2"]})
    assert read_config(tmp_path / "c.txt") == {"n": 4, "methods": ["baseline", "cauchy-l2"]}


def test_g2o_single_identity_edge(tmp_path):
    info = " ".join(["1"] + ["0"] * 5 + ["1"] + ["0"] * 4 + ["1", "0", "0", "0"] + ["7", "0", "0", "7", "0", "7"])
    (tmp_path / "a.g2o").write_text(
        "VERTEX_SE3:QUAT 10 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 20 1 0 0 0 0 0 1\n"
        f"EDGE_SE3:QUAT 10 20 1 0 0 0 0 0 1 {info}\nFIX 10\n"
    )
    g = parse_g2o_rotations(tmp_path / "a.g2o")
    assert g.n == 2 and g.edges.tolist() == [[0, 1]]
    assert np.abs(g.measurements[0] - np.eye(3)).max() < 1e-15
    assert g.kappa[0] == 7.0
    assert g.skipped == {"FIX": 1}
    assert parse_g2o_rotations(tmp_path / "a.g2o", weighting="uniform").kappa[0] == 1.0


def test_g2o_se2_angle(tmp_path):
    (tmp_path / "b.g2o").write_text("EDGE_SE2 0 1 1.0 2.0 0.5 1 0 0 1 0 3\n")
    g = parse_g2o_rotations(tmp_path / "b.g2o")
    assert g.group.value == "SO2"
    assert np.arctan2(g.measurements[0, 1, 0], g.measurements[0, 0, 0]) == pytest.approx(0.5, abs=1e-15)
    assert g.kappa[0] == 3.0


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_g2o_round_trip(tmp_path, rng, group):
    g = random_graph(group, 8, rng)
    write_g2o(tmp_path / "g.g2o", g)
    same_graph(g, parse_g2o_rotations(tmp_path / "g.g2o"), tol=1e-13)


def test_g2o_errors(tmp_path):
    (tmp_path / "c.g2o").write_text("VERTEX_SE2 0 0 0 0\nEDGE_SE2 0 1 1.0 2.0\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_g2o_rotations(tmp_path / "c.g2o")
    (tmp_path / "d.g2o").write_text("VERTEX_SE2 0 0 0 0\n")
    with pytest.raises(ParseError):
        parse_g2o_rotations(tmp_path / "d.g2o")


# command line


SW_CONFIG = "group=SO3\nn=50\ntopology=small_world\nk_loc=8\np_rewire=0.3\ncorruption=0.2\nseed=3\n"


def run(*args):
    return main([str(a) for a in args])


def test_generate(tmp_path, capsys):
    (tmp_path / "sw.cfg").write_text(SW_CONFIG)
    assert run("generate", tmp_path / "sw.cfg", "--out", tmp_path / "a") == 0
    manifest = dict(line.split("=", 1) for line in (tmp_path / "a" / "manifest.txt").read_text().splitlines())
    assert manifest["edges"] == "200" and manifest["corrupted"] == "40"
    assert manifest["seed"] == "3"
    g = read_graph(tmp_path / "a" / "graph.txt")
    assert g.n_edges == 200
    assert (tmp_path / "a" / "graph.txt").read_text().count("# corrupted") == 40
    assert run("generate", tmp_path / "sw.cfg", "--out", tmp_path / "b") == 0
    for name in ("graph.txt", "truth.txt", "manifest.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_rejects_single_node(tmp_path, capsys):
    (tmp_path / "one.cfg").write_text("group=SO3\nn=1\n")
    assert run("generate", tmp_path / "one.cfg", "--out", tmp_path / "x") == 2
    err = capsys.readouterr().err
    assert "graph must have >= 2 nodes" in err and "synthesis" in err


def test_config_errors_report_lines(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("group=SO3\nn 5\n")
    assert run("generate", tmp_path / "bad.cfg") == 2
    assert "line 2" in capsys.readouterr().err


def write_noiseless(tmp_path, rng, group="SO3", n=10):
    truth = random_truth(group, n, rng)
    g = noiseless_graph(group, truth, random_connected_edges(n, 0.5, rng), kappa=25.0)
    write_graph(tmp_path / "g.txt", g)
    write_rotations(tmp_path / "t.txt", group, truth)
    return truth, g


def test_solve_noiseless_report(tmp_path, rng, capsys):
    write_noiseless(tmp_path, rng)
    assert run("solve", tmp_path / "g.txt", "--truth", tmp_path / "t.txt", "--lmax", 3, "--out", tmp_path / "o", "--threads", 1) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["metrics"]["d_inf"] <= 1e-3
    for key in ("backend", "config", "grid_step", "timings", "weights", "spectral", "edges_denoised"):
        assert key in rep
    assert len(rep["spectral"]) == 3 and {"gap", "eigenvalues", "residual_max"} <= set(rep["spectral"][0])
    assert {"peak", "sharpness"} <= set(rep["edges_denoised"])
    assert read_rotations(tmp_path / "o" / "estimate.txt")[1].shape == (10, 3, 3)
    assert read_graph(tmp_path / "o" / "denoised.txt").n_edges == read_graph(tmp_path / "g.txt").n_edges
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["d_inf"] == rep["metrics"]["d_inf"]


def test_solve_baseline_mode(tmp_path, rng):
    write_noiseless(tmp_path, rng)
    assert run("solve", tmp_path / "g.txt", "--baseline", "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["config"]["lmax"] == 1 and rep["config"]["loss"] == "quadratic"
    assert rep["baseline_edge_deviation"] <= 1e-6


def test_solve_thread_determinism(tmp_path):
    (tmp_path / "c.cfg").write_text("group=SO3\nn=16\nk_loc=4\ncorruption=0.1\nseed=1\n")
    assert run("generate", tmp_path / "c.cfg", "--out", tmp_path / "i") == 0
    for t in (1, 3):
        assert run("solve", tmp_path / "i" / "graph.txt", "--lmax", 2, "--threads", t, "--out", tmp_path / f"o{t}") == 0
    for name in ("estimate.txt", "denoised.txt"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o3" / name).read_bytes()


def test_solve_g2o_and_eval(tmp_path, rng, capsys):
    truth, g = write_noiseless(tmp_path, rng)
    write_g2o(tmp_path / "g.g2o", g)
    assert run("solve", tmp_path / "g.g2o", "--truth", tmp_path / "t.txt", "--lmax", 2, "--posterior-csv", 0, "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert {"d_F", "d_inf"} <= set(rep["metrics"])
    assert (tmp_path / "o" / "posterior_edge0.csv").exists()
    capsys.readouterr()
    assert run("eval", tmp_path / "t.txt", tmp_path / "o" / "estimate.txt", "--per-node") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["d_F"] < 1e-3 and len(rep["angular_errors"]) == len(truth)


def test_solve_disconnected_reports_provenance(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("SO2 4\nEDGE 0 1 0.1 1\nEDGE 2 3 0.2 1\n")
    assert run("solve", tmp_path / "g.txt", "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "StructuralError" in err and "laplacian" in err and "components" in err


def test_sweep_shape(tmp_path, capsys):
    (tmp_path / "s.cfg").write_text(
        "group=SO3\nn=12\nk_loc=4\nseed=0\nseeds=1\nmethods=baseline,cauchy-l8\ncorruptions=0,0.2\n"
    )
    assert run("sweep", tmp_path / "s.cfg", "--out", tmp_path / "sweep.csv", "--threads", 1) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert any("group=SO3" in m for m in meta) and any("seeds=1" in m for m in meta)
    assert body[0].startswith("method,corruption,d_F_mean")
    assert len(body) == 5
    cells = {(r.split(",")[0], float(r.split(",")[1])) for r in body[1:]}
    assert cells == {("baseline", 0.0), ("baseline", 0.2), ("cauchy-l8", 0.0), ("cauchy-l8", 0.2)}


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "irrepsync", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "solve" in out.stdout
