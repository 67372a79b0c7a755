"""Plain-text graph, rotation and config files, plus a g2o subset reader.

Graph files::

    SO3 <N>
    EDGE i j qw qx qy qz kappa      (SO2: EDGE i j theta kappa)

Rotation files use the same header with ``NODE i <theta | qw qx qy qz>`` lines.
"""

import logging

import numpy as np

from .errors import ParseError, UsageError
from .group import Group, as_group, matrices_from_quaternions, quaternions_from_matrices, so2_matrices
from .laplacian import MeasurementGraph

log = logging.getLogger(__name__)


def _fmt(x):
    return repr(float(x))


def _rotation_fields(group, mats):
    if group is Group.SO2:
        return [[_fmt(a)] for a in np.mod(np.arctan2(mats[:, 1, 0], mats[:, 0, 0]), 2 * np.pi)]
    return [[_fmt(v) for v in q] for q in quaternions_from_matrices(mats)]


def _parse_rotation(group, fields, lineno):
    try:
        vals = [float(v) for v in fields]
    except ValueError:
        raise ParseError(f"non-numeric rotation field in {fields}", lineno) from None
    want = 1 if group is Group.SO2 else 4
    if len(vals) != want:
        raise ParseError(f"expected {want} rotation fields, got {len(vals)}", lineno)
    if group is Group.SO2:
        return so2_matrices(vals[0])
    q = np.array(vals)
    if not np.isfinite(q).all() or np.linalg.norm(q) == 0:
        raise ParseError("quaternion must be finite and non-zero", lineno)
    return matrices_from_quaternions(q)


def _lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _header(tokens, lineno):
    if len(tokens) != 2:
        raise ParseError("header must be '<SO2|SO3> <N>'", lineno)
    try:
        group = as_group(tokens[0])
        n = int(tokens[1])
    except (UsageError, ValueError):
        raise ParseError(f"bad header {' '.join(tokens)!r}", lineno) from None
    return group, n


def write_graph(path, graph, extra=None):
    """Write a graph; ``extra`` maps edge index to a trailing comment."""
    fields = _rotation_fields(graph.group, graph.measurements)
    with open(path, "w") as fh:
        fh.write(f"{graph.group.value} {graph.n}\n")
        for e, ((i, j), rot, k) in enumerate(zip(graph.edges, fields, graph.kappa)):
            tail = f"  # {extra[e]}" if extra and e in extra else ""
            fh.write(f"EDGE {i} {j} {' '.join(rot)} {_fmt(k)}{tail}\n")


def read_graph(path):
    group = n = None
    edges, mats, kappas = [], [], []
    for lineno, tok in _lines(path):
        if group is None:
            group, n = _header(tok, lineno)
            continue
        if tok[0] != "EDGE":
            raise ParseError(f"unexpected record {tok[0]!r}", lineno)
        width = 1 if group is Group.SO2 else 4
        if len(tok) != 4 + width:
            raise ParseError(f"EDGE needs {4 + width} fields, got {len(tok)}", lineno)
        try:
            i, j = int(tok[1]), int(tok[2])
            kappa = float(tok[-1])
        except ValueError:
            raise ParseError("bad node index or kappa", lineno) from None
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ParseError(f"invalid edge ({i}, {j}) for {n} nodes", lineno)
        if not kappa > 0:
            raise ParseError("kappa must be positive", lineno)
        edges.append((i, j))
        mats.append(_parse_rotation(group, tok[3:-1], lineno))
        kappas.append(kappa)
    if group is None:
        raise ParseError("empty graph file")
    try:
        return MeasurementGraph(group, n, np.array(edges).reshape(-1, 2), np.array(mats).reshape(-1, group.d, group.d), kappas)
    except UsageError as exc:
        raise ParseError(str(exc)) from None


def write_rotations(path, group, mats):
    group = as_group(group)
    mats = np.asarray(mats, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{group.value} {len(mats)}\n")
        for i, rot in enumerate(_rotation_fields(group, mats)):
            fh.write(f"NODE {i} {' '.join(rot)}\n")


def read_rotations(path):
    """Returns ``(group, (N, d, d) matrices)``."""
    group = n = None
    out = {}
    for lineno, tok in _lines(path):
        if group is None:
            group, n = _header(tok, lineno)
            continue
        if tok[0] != "NODE":
            raise ParseError(f"unexpected record {tok[0]!r}", lineno)
        try:
            i = int(tok[1])
        except (ValueError, IndexError):
            raise ParseError("bad node index", lineno) from None
        if not 0 <= i < n or i in out:
            raise ParseError(f"invalid or repeated node {i}", lineno)
        out[i] = _parse_rotation(group, tok[2:], lineno)
    if group is None:
        raise ParseError("empty rotation file")
    if len(out) != n:
        raise ParseError(f"expected {n} nodes, found {len(out)}")
    return group, np.array([out[i] for i in range(n)])


# ---------------------------------------------------------------------------
# key=value configs


def _coerce(value):
    low = value.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in value:
        return [_coerce(v.strip()) for v in value.split(",") if v.strip()]
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def parse_config(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", lineno)
        out[key] = _coerce(value)
    return out


def read_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def write_config(path, values):
    with open(path, "w") as fh:
        for key, value in values.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            fh.write(f"{key}={value}\n")


# ---------------------------------------------------------------------------
# g2o


# upper-triangle positions of the rotational diagonal in the information block
_SE3_ROT_DIAG = (15, 18, 20)
_SE2_ROT_DIAG = (5,)


def parse_g2o_rotations(path, weighting="information"):
    """Rotation parts of EDGE_SE3:QUAT / EDGE_SE2 records.

    kappa is the mean of the rotational information diagonal, or 1 when
    ``weighting="uniform"``. Vertex ids are remapped to 0..N-1 in sorted order.
    """
    records = []
    vertices = set()
    skipped = {}
    group = None
    for lineno, tok in _lines(path):
        tag = tok[0]
        if tag in ("VERTEX_SE3:QUAT", "VERTEX_SE2"):
            try:
                vertices.add(int(tok[1]))
            except (IndexError, ValueError):
                raise ParseError(f"malformed {tag}", lineno) from None
            continue
        if tag not in ("EDGE_SE3:QUAT", "EDGE_SE2"):
            skipped[tag] = skipped.get(tag, 0) + 1
            continue
        kind = Group.SO3 if tag == "EDGE_SE3:QUAT" else Group.SO2
        if group is None:
            group = kind
        elif group is not kind:
            raise ParseError("file mixes SE2 and SE3 edges", lineno)
        need = 31 if kind is Group.SO3 else 12
        if len(tok) != need:
            raise ParseError(f"{tag} needs {need} fields, got {len(tok)}", lineno)
        try:
            vals = [float(v) for v in tok[3:]]
            i, j = int(tok[1]), int(tok[2])
        except ValueError:
            raise ParseError(f"non-numeric field in {tag}", lineno) from None
        if kind is Group.SO3:
            qx, qy, qz, qw = vals[3:7]
            rot = (qw, qx, qy, qz)
            info = vals[7:]
            diag = [info[k] for k in _SE3_ROT_DIAG]
        else:
            rot = (vals[2],)
            info = vals[3:]
            diag = [info[k] for k in _SE2_ROT_DIAG]
        if i == j:
            raise ParseError("self-loop edge", lineno)
        records.append((lineno, i, j, rot, float(np.mean(diag))))
    if skipped:
        log.info("skipped g2o records: %s", ", ".join(f"{k} x{v}" for k, v in sorted(skipped.items())))
    if group is None:
        raise ParseError("no EDGE_SE3:QUAT or EDGE_SE2 records found")
    ids = sorted(vertices | {r[1] for r in records} | {r[2] for r in records})
    index = {v: k for k, v in enumerate(ids)}
    edges, mats, kappas = [], [], []
    for lineno, i, j, rot, kappa in records:
        m = _parse_rotation(group, rot, lineno)
        if weighting == "uniform":
            kappa = 1.0
        elif not kappa > 0:
            raise ParseError("rotational information must be positive", lineno)
        edges.append((index[i], index[j]))
        mats.append(m)
        kappas.append(kappa)
    try:
        graph = MeasurementGraph(group, len(ids), edges, np.array(mats), kappas)
    except UsageError as exc:
        raise ParseError(str(exc)) from None
    graph.skipped = skipped
    return graph


def write_g2o(path, graph):
    """Rotation-only g2o: zero translations, diagonal information with kappa."""
    with open(path, "w") as fh:
        if graph.group is Group.SO3:
            for v in range(graph.n):
                fh.write(f"VERTEX_SE3:QUAT {v} 0 0 0 0 0 0 1\n")
            for (i, j), q, k in zip(graph.edges, quaternions_from_matrices(graph.measurements), graph.kappa):
                info = np.zeros(21)
                info[[0, 6, 11]] = 1.0
                info[list(_SE3_ROT_DIAG)] = k
                w, x, y, z = q
                fields = [0.0, 0.0, 0.0, x, y, z, w, *info]
                fh.write(f"EDGE_SE3:QUAT {i} {j} {' '.join(_fmt(v) for v in fields)}\n")
        else:
            for v in range(graph.n):
                fh.write(f"VERTEX_SE2 {v} 0 0 0\n")
            angles = np.arctan2(graph.measurements[:, 1, 0], graph.measurements[:, 0, 0])
            for (i, j), a, k in zip(graph.edges, angles, graph.kappa):
                info = [1.0, 0.0, 0.0, 1.0, 0.0, k]
                fields = [0.0, 0.0, a, *info]
                fh.write(f"EDGE_SE2 {i} {j} {' '.join(_fmt(v) for v in fields)}\n")
