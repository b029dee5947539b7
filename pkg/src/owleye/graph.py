"""Attributed graphs: data model, directory I/O, normalized adjacency,
anomaly injection and a small synthetic generator for desk-scale runs.

On-disk layout of a graph directory::

    edges.csv      "u,v" per line, 0-indexed, no header
    features.csv   one comma-separated row per node   (or features.fmat)
    labels.csv     "node_id,label" per line, omitted nodes are 0 (optional)
    meta.json      {"name": ..., "domain": ...} (optional)

``features.fmat`` is little-endian: ``b"FMAT"``, u32 version (1), u32 rows,
u32 cols, then rows*cols float64 values in row-major order.
"""

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, FormatError, InvalidArgumentError

log = logging.getLogger(__name__)

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1
_FMAT_HEADER = struct.Struct("<4sIII")


def canonical_edges(edges, n=None):
    """Sorted unique ``(u, v)`` rows with ``u < v``; self-loops dropped."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is not None and e.size and (e.min() < 0 or e.max() >= n):
        raise InvalidArgumentError(f"edge endpoint outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


@dataclass(frozen=True)
class GraphDataset:
    """One undirected attributed graph.

    ``edges`` is stored canonically (``u < v``, sorted, unique).  ``labels``
    is ``None`` for unlabeled graphs, else an int8 vector with 1 = anomaly.
    """

    name: str
    n: int
    edges: np.ndarray
    X_raw: np.ndarray
    labels: np.ndarray = None
    domain_tag: str = ""

    def __post_init__(self):
        X = np.asarray(self.X_raw, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.n:
            raise InvalidArgumentError(f"X_raw must be {self.n} x d, got {X.shape}")
        object.__setattr__(self, "X_raw", X)
        object.__setattr__(self, "edges", canonical_edges(self.edges, self.n))
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (self.n,) or not np.isin(y, (0, 1)).all():
                raise InvalidArgumentError("labels must be a length-n 0/1 vector")
            object.__setattr__(self, "labels", y.astype(np.int8))

    @property
    def d_raw(self):
        return self.X_raw.shape[1]

    def with_(self, **changes):
        kw = dict(name=self.name, n=self.n, edges=self.edges, X_raw=self.X_raw,
                  labels=self.labels, domain_tag=self.domain_tag)
        kw.update(changes)
        return GraphDataset(**kw)

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        if len(self.edges):
            A[self.edges[:, 0], self.edges[:, 1]] = 1.0
            A[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return A

    def permuted(self, perm):
        """Relabel nodes so that old node ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        labels = None if self.labels is None else self.labels[inv]
        return self.with_(edges=perm[self.edges], X_raw=self.X_raw[inv], labels=labels)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Dense ``D^-1/2 (A + I) D^-1/2`` (or the raw ``A`` when requested)."""

    n: int
    values: np.ndarray = field(repr=False)
    mode: str = "sym_norm"


def build_normalized_adjacency(g, mode="sym_norm"):
    """Symmetric normalization with self-loops.

    ``mode="raw"`` returns the plain binary adjacency instead.
    """
    if g.n < 1:
        raise InvalidArgumentError("graph has no nodes")
    A = g.adjacency()
    if mode == "raw":
        return NormalizedAdjacency(g.n, A, mode)
    if mode != "sym_norm":
        raise InvalidArgumentError(f"unknown adjacency mode {mode!r}")
    A = A + np.eye(g.n)
    deg = A.sum(axis=1)
    # one square root per entry keeps symmetric cases exact (e.g. 1/sqrt(2*2) = 0.5)
    return NormalizedAdjacency(g.n, A / np.sqrt(np.outer(deg, deg)), mode)


# ---------------------------------------------------------------------------
# file formats


def write_fmat(path, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_FMAT_HEADER.pack(FMAT_MAGIC, FMAT_VERSION, X.shape[0], X.shape[1]))
        fh.write(X.tobytes())


def read_fmat(path):
    data = Path(path).read_bytes()
    if len(data) < _FMAT_HEADER.size:
        raise FormatError("truncated header", path=path, offset=len(data))
    magic, version, rows, cols = _FMAT_HEADER.unpack_from(data)
    if magic != FMAT_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path=path, offset=0)
    if version != FMAT_VERSION:
        raise FormatError(f"unsupported version {version}", path=path, offset=4)
    need = _FMAT_HEADER.size + rows * cols * 8
    if len(data) != need:
        raise FormatError(f"expected {need} bytes, found {len(data)}", path=path,
                          offset=min(len(data), need))
    return np.frombuffer(data, dtype="<f8", offset=_FMAT_HEADER.size).reshape(rows, cols).astype(np.float64)


def _read_int_pairs(path, what):
    rows = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            parts = s.split(",")
            if len(parts) != 2:
                raise FormatError(f"expected 'a,b' in {what}", path=path, line=lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"non-integer value in {what}", path=path, line=lineno) from None
            if a < 0 or b < 0:
                raise FormatError(f"negative value in {what}", path=path, line=lineno)
            rows.append((a, b, lineno))
    return rows


def _read_features_csv(path):
    rows = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                rows.append([float(t) for t in s.split(",")])
            except ValueError:
                raise FormatError("non-numeric feature", path=path, line=lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError("ragged feature row", path=path, line=lineno)
    if not rows:
        raise FormatError("no feature rows", path=path)
    return np.array(rows, dtype=np.float64)


def load_graph_dir(path):
    """Read and validate a graph directory (see module docstring)."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError("not a directory", path=path)
    edge_file = path / "edges.csv"
    if not edge_file.exists():
        raise FormatError("missing edges.csv", path=path)
    if (path / "features.fmat").exists():
        X = read_fmat(path / "features.fmat")
    elif (path / "features.csv").exists():
        X = _read_features_csv(path / "features.csv")
    else:
        raise FormatError("missing features.csv / features.fmat", path=path)
    n = X.shape[0]

    pairs = _read_int_pairs(edge_file, "edges.csv")
    for u, v, lineno in pairs:
        if u >= n or v >= n:
            raise ConsistencyError(f"node index {max(u, v)} out of range for {n} feature rows",
                                   path=edge_file, line=lineno)
    directed = {(u, v) for u, v, _ in pairs if u != v}
    if directed:
        recip = sum((v, u) in directed for (u, v) in directed)
        if 0 < recip < len(directed):
            log.warning("%s: edge list looks directed; symmetrizing", edge_file)
    if any(u == v for u, v, _ in pairs):
        log.warning("%s: dropping self-loops", edge_file)
    edges = np.array([(u, v) for u, v, _ in pairs], dtype=np.int64).reshape(-1, 2)

    labels = None
    label_file = path / "labels.csv"
    if label_file.exists():
        labels = np.zeros(n, dtype=np.int8)
        for node, lab, lineno in _read_int_pairs(label_file, "labels.csv"):
            if node >= n:
                raise ConsistencyError(f"label for node {node} but only {n} feature rows",
                                       path=label_file, line=lineno)
            if lab not in (0, 1):
                raise FormatError(f"label must be 0 or 1, got {lab}", path=label_file, line=lineno)
            labels[node] = lab

    name, domain = path.name, ""
    if (path / "meta.json").exists():
        try:
            meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=path / "meta.json") from None
        name = str(meta.get("name", name))
        domain = str(meta.get("domain", ""))
    return GraphDataset(name=name, n=n, edges=edges, X_raw=X, labels=labels, domain_tag=domain)


def save_graph_dir(g, path, features="fmat"):
    """Write ``g`` to ``path``; ``features`` is ``"fmat"`` (bit-exact) or ``"csv"``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.csv", "w", encoding="ascii") as fh:
        for u, v in g.edges:
            fh.write(f"{u},{v}\n")
    for stale in ("features.fmat", "features.csv"):
        if (path / stale).exists():
            (path / stale).unlink()
    if features == "fmat":
        write_fmat(path / "features.fmat", g.X_raw)
    elif features == "csv":
        with open(path / "features.csv", "w", encoding="ascii") as fh:
            for row in g.X_raw:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    else:
        raise InvalidArgumentError(f"unknown feature format {features!r}")
    if g.labels is not None:
        with open(path / "labels.csv", "w", encoding="ascii") as fh:
            for i, lab in enumerate(g.labels):
                fh.write(f"{i},{int(lab)}\n")
    elif (path / "labels.csv").exists():
        (path / "labels.csv").unlink()
    with open(path / "meta.json", "w", encoding="utf-8") as fh:
        json.dump({"name": g.name, "domain": g.domain_tag}, fh)


def atomic_write_bytes(path, data):
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# anomaly injection


def inject_anomalies(g, n_cliques, clique_size, n_contextual, rng, n_candidates=50):
    """Inject structural (clique) and contextual (feature-swap) anomalies.

    Clique members are fully interconnected.  Each contextual node takes the
    feature row of the farthest of ``n_candidates`` random other nodes,
    measured on the original features.  Injected nodes get label 1 and every
    other node label 0.
    """
    n_struct = n_cliques * clique_size
    total = n_struct + n_contextual
    if min(n_cliques, clique_size, n_contextual) < 0:
        raise InvalidArgumentError("counts must be non-negative")
    if total > g.n:
        raise InvalidArgumentError(f"need {total} distinct nodes, graph has {g.n}")
    labels = np.zeros(g.n, dtype=np.int8)
    if total == 0:
        return g.with_(labels=labels)

    chosen = rng.choice(g.n, size=total, replace=False)
    new_edges = [g.edges]
    for c in range(n_cliques):
        members = chosen[c * clique_size:(c + 1) * clique_size]
        iu, ju = np.triu_indices(clique_size, k=1)
        new_edges.append(np.stack([members[iu], members[ju]], axis=1))

    X_orig = g.X_raw
    X = X_orig.copy()
    others_pool = np.arange(g.n)
    for node in chosen[n_struct:]:
        pool = others_pool[others_pool != node]
        cand = rng.choice(pool, size=min(n_candidates, pool.size), replace=False)
        far = cand[np.argmax(np.linalg.norm(X_orig[cand] - X_orig[node], axis=1))]
        X[node] = X_orig[far]

    labels[chosen] = 1
    return g.with_(edges=np.concatenate(new_edges), X_raw=X, labels=labels)


def make_synthetic_graph(name, n, n_features, rng, n_blocks=4, avg_degree=6.0,
                         p_within=0.85, feature_scale=1.0, noise=0.5, domain=""):
    """Stochastic-block-model graph with Gaussian block-centroid features.

    Different ``n_features`` / ``feature_scale`` / ``avg_degree`` settings
    emulate graphs from different domains.  No labels are attached.
    """
    blocks = rng.integers(0, n_blocks, size=n)
    same = blocks[:, None] == blocks[None, :]
    sizes = np.bincount(blocks, minlength=n_blocks)
    in_pairs = max(float((sizes * (sizes - 1)).sum()) / 2, 1.0)
    out_pairs = max(n * (n - 1) / 2 - in_pairs, 1.0)
    m = avg_degree * n / 2
    p_in = min(1.0, p_within * m / in_pairs)
    p_out = min(1.0, (1 - p_within) * m / out_pairs)
    P = np.where(same, p_in, p_out)
    draw = rng.random((n, n)) < P
    iu, ju = np.triu_indices(n, k=1)
    keep = draw[iu, ju]
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    centroids = rng.standard_normal((n_blocks, n_features)) * 2.0
    X = centroids[blocks] + noise * rng.standard_normal((n, n_features))
    X *= feature_scale
    return GraphDataset(name=name, n=n, edges=edges, X_raw=X, domain_tag=domain)
