"""Zero-shot scoring, ranking metrics and pairwise-distance diagnostics."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .dictionary import PatternDictionary, Source, extract_patterns, merge
from .encoders import Embeddings, encode
from .errors import InvalidArgumentError
from .graph import build_normalized_adjacency
from .numerics import make_rng, pca_fit_transform
from .reconstruction import reconstruct
from .training import align_against

log = logging.getLogger(__name__)


@dataclass
class ScoreVector:
    graph_id: str
    scores: np.ndarray = field(repr=False)
    attr_term: np.ndarray = field(repr=False)
    struct_term: np.ndarray = field(repr=False)
    beta: float = 0.01
    pseudo_anomalous: int = -1

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "score"])
            for i, s in enumerate(self.scores):
                w.writerow([i, repr(float(s))])


def anomaly_scores(emb, rec, beta=0.01, graph_id=""):
    """Squared reconstruction residuals, attribute term plus ``beta`` x structure term."""
    if beta < 0:
        raise InvalidArgumentError("beta must be non-negative")
    if emb.H.shape != rec.H_hat.shape or emb.R.shape != rec.R_hat.shape:
        raise InvalidArgumentError("embedding and reconstruction shapes differ")
    attr = ((rec.H_hat - emb.H) ** 2).sum(axis=1)
    struct = ((rec.R_hat - emb.R) ** 2).sum(axis=1)
    return ScoreVector(graph_id, attr + beta * struct, attr, struct, beta)


# ---------------------------------------------------------------------------
# zero-shot inference


def embed_graph(ck, g, seed):
    aligned = align_against(ck, g, seed)
    A = build_normalized_adjacency(g, ck.config.adjacency)
    return encode(aligned.X_tilde, A, ck.params)


def aux_entry(ck, g, seed, n_sup=None):
    """Pattern entry for an auxiliary graph, using the checkpoint's parameters."""
    emb = embed_graph(ck, g, seed)
    n_sup = ck.config.n_sup if n_sup is None else n_sup
    return extract_patterns(g.name, emb, g.labels, n_sup, make_rng(seed, "aux-entry", g.name),
                            source=Source.aux_normal)


def zero_shot_score(ck, test_graph, seed, n_sup=None, att_cfg=None, dictionary=None,
                    extra_entries=(), pseudo="sample", return_details=False):
    """Score every node of an unseen graph without using its labels.

    A pseudo-support entry of ``n_sup`` nodes (drawn from all nodes) is
    merged into the dictionary for this call only.  ``pseudo="oracle"``
    instead draws it from the true normal nodes (diagnostic use).
    """
    n_sup = ck.config.n_sup if n_sup is None else n_sup
    att_cfg = ck.config.attention_config() if att_cfg is None else att_cfg
    base = ck.dictionary if dictionary is None else dictionary
    emb = embed_graph(ck, test_graph, seed)
    rng = make_rng(seed, "pseudo", test_graph.name)
    if pseudo == "sample":
        entry = extract_patterns(test_graph.name, emb, None, n_sup, rng, source=Source.test_pseudo)
    elif pseudo == "oracle":
        if test_graph.labels is None:
            raise InvalidArgumentError("oracle pseudo-support needs labels")
        entry = extract_patterns(test_graph.name, emb, test_graph.labels, n_sup, rng, source=Source.test_pseudo)
    else:
        raise InvalidArgumentError(f"unknown pseudo mode {pseudo!r}")
    full = merge(base, list(extra_entries) + [entry])
    rec = reconstruct(emb, full, ck.params, att_cfg)
    sv = anomaly_scores(emb, rec, ck.config.beta, test_graph.name)
    if test_graph.labels is not None:
        sv.pseudo_anomalous = int(test_graph.labels[entry.idx].sum())
    if return_details:
        return sv, emb, rec, full
    return sv


# ---------------------------------------------------------------------------
# metrics


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InvalidArgumentError("scores and labels differ in length")
    if not np.isin(y, (0, 1)).all():
        raise InvalidArgumentError("labels must be 0/1")
    return s, y.astype(np.int64)


def auroc(scores, labels):
    """Mann-Whitney AUROC; tied positive/negative pairs count one half."""
    s, y = _check_binary(scores, labels)
    P = int(y.sum())
    N = y.size - P
    if P == 0 or N == 0:
        raise InvalidArgumentError("AUROC needs both classes")
    ranks = rankdata(s, method="average")
    return float((ranks[y == 1].sum() - P * (P + 1) / 2.0) / (P * N))


def auprc(scores, labels):
    """Average precision over descending score thresholds.

    Tied scores form a single threshold: the whole tie group enters at
    once, and the recall gained there is credited at the group's precision.
    """
    s, y = _check_binary(scores, labels)
    P = int(y.sum())
    if P == 0:
        raise InvalidArgumentError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    prev = np.r_[0, tp[:-1]]
    ap = 0.0
    for t, f, p0 in zip(tp, fp, prev):
        if t > p0:
            ap += ((t - p0) / P) * (t / (t + f))
    return float(ap)


@dataclass
class MetricsReport:
    auroc: float
    auprc: float
    positives: int
    negatives: int


def evaluate(scores, labels):
    s, y = _check_binary(scores, labels)
    if y.sum() in (0, y.size):
        raise InvalidArgumentError("degenerate label set: need both classes")
    return MetricsReport(auroc(s, y), auprc(s, y), int(y.sum()), int(y.size - y.sum()))


# ---------------------------------------------------------------------------
# pairwise-distance diagnostics

PAIR_CLASSES = ("NN", "NA", "AA")


def sample_class_pairs(labels, sample_pairs, rng):
    """Node pairs per class (normal-normal, normal-anomaly, anomaly-anomaly).

    All distinct unordered pairs are used when there are at most
    ``sample_pairs`` of them, else ``sample_pairs`` uniform draws.
    """
    labels = np.asarray(labels)
    normals = np.flatnonzero(labels == 0)
    anomalies = np.flatnonzero(labels == 1)
    out = {}
    for cls, (a, b, same) in {"NN": (normals, normals, True), "NA": (normals, anomalies, False),
                              "AA": (anomalies, anomalies, True)}.items():
        total = a.size * (a.size - 1) // 2 if same else a.size * b.size
        if total == 0:
            out[cls] = np.zeros((0, 2), dtype=np.int64)
        elif total <= sample_pairs:
            if same:
                iu, ju = np.triu_indices(a.size, k=1)
                out[cls] = np.stack([a[iu], a[ju]], axis=1)
            else:
                aa, bb = np.meshgrid(a, b, indexing="ij")
                out[cls] = np.stack([aa.ravel(), bb.ravel()], axis=1)
        else:
            i = rng.choice(a, size=sample_pairs)
            if same:
                # second endpoint drawn from the rest of the class
                pos = rng.integers(0, a.size - 1, size=sample_pairs)
                j = a[pos]
                j = np.where(j == i, a[-1], j)
            else:
                j = rng.choice(b, size=sample_pairs)
            out[cls] = np.stack([i, j], axis=1)
    return out


def distance_diagnostic(g, X_stage, sample_pairs, rng, stage="", bins=50, hist_max=None, pairs=None):
    """Per-class pairwise-distance summary rows for one pipeline stage.

    Returns a list of dicts with ``stage, class, count, mean, median`` and
    ``hist`` (``bins`` counts over ``[0, hist_max]``).  Pass the same
    ``pairs`` (from :func:`sample_class_pairs`) to compare stages on an
    identical sample.
    """
    if g.labels is None:
        raise InvalidArgumentError("distance diagnostic needs labels")
    X = np.asarray(X_stage, dtype=np.float64)
    if pairs is None:
        pairs = sample_class_pairs(g.labels, sample_pairs, rng)
    dists = {c: np.linalg.norm(X[p[:, 0]] - X[p[:, 1]], axis=1) for c, p in pairs.items()}
    if hist_max is None:
        hist_max = max((d.max() for d in dists.values() if d.size), default=1.0) or 1.0
    rows = []
    for c in PAIR_CLASSES:
        d = dists[c]
        if d.size == 0:
            rows.append(dict(stage=stage, cls=c, count=0, mean=None, median=None, hist=[0] * bins, hist_max=hist_max))
            continue
        hist, _ = np.histogram(d, bins=bins, range=(0.0, hist_max))
        rows.append(dict(stage=stage, cls=c, count=int(d.size), mean=float(d.mean()),
                         median=float(np.median(d)), hist=hist.tolist(), hist_max=float(hist_max)))
    return rows


def write_diagnostic_csv(rows, path):
    bins = len(rows[0]["hist"]) if rows else 0
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "class", "count", "mean", "median", "hist_max"] + [f"bin{i}" for i in range(bins)])
        for r in rows:
            fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
            w.writerow([r["stage"], r["cls"], r["count"], fmt(r["mean"]), fmt(r["median"]),
                        repr(r["hist_max"])] + r["hist"])


def write_scatter_csv(g, X_stage, path, rng):
    """2-component PCA coordinates per node (with its label) for plotting."""
    Z = pca_fit_transform(X_stage, 2, rng)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "pc1", "pc2", "label"])
        for i, (a, b) in enumerate(Z):
            w.writerow([i, repr(float(a)), repr(float(b)), "" if g.labels is None else int(g.labels[i])])
