"""Supervised training on labeled source graphs.

Objective per graph (summed over graphs)::

    L_recon   = sum_{v in A} cos(H_v, H_hat_v) - sum_{v in N} cos(H_v, H_hat_v)
    L_triplet = sum_{(u, w)} max(|H_hat_u - H_u|^2 - |H_hat_u - H_hat_w|^2 + lam, 0)
                + beta * (same on the structure channel)

``A``/``N`` are anomalous/normal nodes.  Pairs are stored as (anomaly,
normal); the anchor ``u`` is the normal node by default, so the hinge asks
normals to be reconstructed better than they resemble the anomaly's
reconstruction.  ``triplet_anchor="anomaly"`` anchors on the anomaly instead.
Gradients are exact reverse-mode derivatives of the whole pipeline
(encoders, similarity, truncated attention, reconstruction, losses) with the
truncation mask held fixed inside a step.  Dictionary pattern indices are
sampled once before the first epoch; the pattern *values* are re-read from
the current embeddings every step, so gradients also flow through them.
"""

import io
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .align import align_collection, align_new_graph
from .config import RunConfig
from .dictionary import (DictEntry, PatternDictionary, Source, dictionary_from_bytes,
                         dictionary_to_bytes)
from .encoders import EncoderParams, encode_attribute, encode_structure, gcn_backward, init_params
from .errors import FormatError, InvalidArgumentError, NumericalError
from .graph import atomic_write_bytes, build_normalized_adjacency
from .numerics import make_rng
from .reconstruction import reconstruct_backward, reconstruct_forward

log = logging.getLogger(__name__)

ANCHORS = ("normal", "anomaly")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-5
    epochs: int = 100
    lambda_: float = 0.2
    beta: float = 0.01
    pairs_per_graph: int = 512
    seed: int = 0
    triplet_anchor: str = "normal"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 0

    def __post_init__(self):
        if not self.lr >= 0 or self.lambda_ < 0 or self.beta < 0 or self.epochs < 0:
            raise InvalidArgumentError("need lr >= 0, lambda >= 0, beta >= 0, epochs >= 0")
        if self.triplet_anchor not in ANCHORS:
            raise InvalidArgumentError(f"triplet_anchor must be one of {ANCHORS}")

    @classmethod
    def from_run(cls, cfg, **overrides):
        kw = dict(lr=cfg.lr, epochs=cfg.epochs, lambda_=cfg.lambda_, beta=cfg.beta,
                  pairs_per_graph=cfg.pairs_per_graph, seed=cfg.seed, patience=cfg.patience,
                  triplet_anchor=cfg.triplet_anchor)
        kw.update(overrides)
        return cls(**kw)


# ---------------------------------------------------------------------------
# losses


def _cosines(H, H_hat, nodes):
    h, g = H[nodes], H_hat[nodes]
    nh = np.linalg.norm(h, axis=1)
    ng = np.linalg.norm(g, axis=1)
    ok = (nh > 0) & (ng > 0)
    if not ok.all():
        log.warning("excluding %d zero-norm rows from the cosine loss", int((~ok).sum()))
    return nodes[ok], h[ok], g[ok], nh[ok], ng[ok]


def _check_sets(n, normals, anomalies):
    normals = np.asarray(normals, dtype=np.int64).ravel()
    anomalies = np.asarray(anomalies, dtype=np.int64).ravel()
    if normals.size == 0 and anomalies.size == 0:
        raise InvalidArgumentError("both node sets are empty")
    if np.intersect1d(normals, anomalies).size:
        raise InvalidArgumentError("normal and anomaly sets overlap")
    allnodes = np.concatenate([normals, anomalies])
    if allnodes.size and (allnodes.min() < 0 or allnodes.max() >= n):
        raise InvalidArgumentError("node index out of range")
    return normals, anomalies


def recon_loss_and_grad(H, H_hat, normals, anomalies):
    """Returns ``(loss, dH, dH_hat)``."""
    normals, anomalies = _check_sets(H.shape[0], normals, anomalies)
    loss = 0.0
    dH = np.zeros_like(H)
    dHh = np.zeros_like(H_hat)
    for nodes, sign in ((anomalies, 1.0), (normals, -1.0)):
        idx, h, g, nh, ng = _cosines(H, H_hat, nodes)
        if idx.size == 0:
            continue
        c = (h * g).sum(axis=1) / (nh * ng)
        loss += sign * c.sum()
        dH[idx] += sign * (g / (nh * ng)[:, None] - (c / nh**2)[:, None] * h)
        dHh[idx] += sign * (h / (nh * ng)[:, None] - (c / ng**2)[:, None] * g)
    return float(loss), dH, dHh


def recon_loss(H, H_hat, normals, anomalies):
    """Cosine reconstruction loss: anomalies pushed away, normals pulled in."""
    return recon_loss_and_grad(H, H_hat, normals, anomalies)[0]


def _hinge_and_grad(X, X_hat, a, b, margin, weight):
    da = X_hat[a] - X[a]
    dab = X_hat[a] - X_hat[b]
    arg = (da**2).sum(axis=1) - (dab**2).sum(axis=1) + margin
    active = arg > 0
    loss = weight * arg[active].sum()
    dX = np.zeros_like(X)
    dXh = np.zeros_like(X_hat)
    w = (weight * active)[:, None]
    np.add.at(dXh, a, w * 2.0 * (da - dab))
    np.add.at(dX, a, -w * 2.0 * da)
    np.add.at(dXh, b, w * 2.0 * dab)
    return float(loss), dX, dXh


def triplet_loss_and_grad(H, H_hat, R, R_hat, pairs, lam, beta, anchor="normal"):
    """Returns ``(loss, dH, dH_hat, dR, dR_hat)``; ``pairs`` rows are (anomaly, normal)."""
    if anchor not in ANCHORS:
        raise InvalidArgumentError(f"anchor must be one of {ANCHORS}")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        log.warning("triplet loss called with no pairs")
        z = np.zeros_like
        return 0.0, z(H), z(H_hat), z(R), z(R_hat)
    a, b = (pairs[:, 1], pairs[:, 0]) if anchor == "normal" else (pairs[:, 0], pairs[:, 1])
    lh, dH, dHh = _hinge_and_grad(H, H_hat, a, b, lam, 1.0)
    lr_, dR, dRh = _hinge_and_grad(R, R_hat, a, b, lam, beta)
    return lh + lr_, dH, dHh, dR, dRh


def triplet_loss(H, H_hat, R, R_hat, pairs, lam=0.2, beta=0.01, anchor="normal"):
    """Hinge triplet loss over ``(anomaly, normal)`` pairs on both channels."""
    return triplet_loss_and_grad(H, H_hat, R, R_hat, pairs, lam, beta, anchor)[0]


def sample_pairs(anomalies, normals, count, rng):
    """``count`` uniform draws from anomalies x normals; ``count = 0`` means all pairs."""
    anomalies = np.asarray(anomalies, dtype=np.int64)
    normals = np.asarray(normals, dtype=np.int64)
    if anomalies.size == 0 or normals.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if count == 0:
        aa, nn = np.meshgrid(anomalies, normals, indexing="ij")
        return np.stack([aa.ravel(), nn.ravel()], axis=1)
    return np.stack([rng.choice(anomalies, size=count), rng.choice(normals, size=count)], axis=1)


# ---------------------------------------------------------------------------
# full-pipeline loss and gradient


@dataclass
class GraphTerm:
    """One graph taking part in a training step.

    ``normals``/``anomalies``/``pairs`` define its loss terms; a graph with
    empty sets only feeds live dictionary entries.
    """

    name: str
    X: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    normals: np.ndarray = None
    anomalies: np.ndarray = None
    pairs: np.ndarray = None

    @property
    def is_query(self):
        return self.normals is not None and (len(self.normals) + len(self.anomalies)) > 0


@dataclass
class EntrySpec:
    """Dictionary entry: ``live`` rows follow the current embeddings of
    ``graphs[graph]`` at ``idx``; otherwise ``Dict_H``/``Dict_R`` are constants."""

    graph: int = -1
    idx: np.ndarray = None
    Dict_H: np.ndarray = None
    Dict_R: np.ndarray = None

    @property
    def live(self):
        return self.graph >= 0


def loss_and_grad(params, graphs, entries, att_cfg, lam, beta, need_grad=True, on_graph=None,
                  anchor="normal"):
    """Total loss over every query graph and, optionally, its gradient.

    Returns ``(loss, grads, per_graph_losses)``; ``grads`` maps the names of
    :meth:`EncoderParams.named` to arrays.
    """
    emb = []
    for g in graphs:
        H, ch = encode_attribute(g.X, g.A, params, keep_cache=True)
        R, cr = encode_structure(g.X.shape[0], g.A, params, keep_cache=True)
        emb.append((H, R, ch, cr))
    pairs = []
    for e in entries:
        if e.live:
            H, R = emb[e.graph][0], emb[e.graph][1]
            pairs.append((H[e.idx], R[e.idx]))
        else:
            pairs.append((e.Dict_H, e.Dict_R))
    keys = list(range(len(entries)))

    total = 0.0
    per_graph = []
    dH = [np.zeros_like(x[0]) for x in emb]
    dR = [np.zeros_like(x[1]) for x in emb]
    named = params.named()
    grads = {k: np.zeros_like(v) for k, v in named.items()}
    for gi, g in enumerate(graphs):
        if not g.is_query:
            continue
        H, R = emb[gi][0], emb[gi][1]
        H_hat, R_hat, cache = reconstruct_forward(H, R, pairs, params, att_cfg, keys)
        l_rec, gH1, gHh1 = recon_loss_and_grad(H, H_hat, g.normals, g.anomalies)
        l_tri, gH2, gHh2, gR, gRh = triplet_loss_and_grad(H, H_hat, R, R_hat, g.pairs, lam, beta, anchor)
        loss_g = l_rec + l_tri
        if not np.isfinite(loss_g):
            raise NumericalError(f"non-finite loss on graph {g.name!r}")
        per_graph.append(loss_g)
        total += loss_g
        if on_graph is not None:
            on_graph(g.name, loss_g)
        if not need_grad:
            continue
        dHq, dRq, dpat, gp = reconstruct_backward(cache, params, gHh1 + gHh2, gRh)
        dH[gi] += gH1 + gH2 + dHq
        dR[gi] += gR + dRq
        for name, G in gp.items():
            grads[name] += G
        for e, (dPH, dPR) in zip(entries, dpat):
            if e.live:
                dH[e.graph][e.idx] += dPH
                dR[e.graph][e.idx] += dPR
    if need_grad:
        for gi in range(len(graphs)):
            if not (dH[gi].any() or dR[gi].any()):
                continue
            for t, G in enumerate(gcn_backward(emb[gi][2], params.W_attr, dH[gi])):
                grads[f"W_attr.{t}"] += G
            for t, G in enumerate(gcn_backward(emb[gi][3], params.W_struc, dR[gi])):
                grads[f"W_struc.{t}"] += G
    return total, (grads if need_grad else None), per_graph


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.named().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.named().items()}
        self.t = 0

    def step(self, params, grads):
        """Update ``params`` in place."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, W in params.named().items():
            g = grads[name]
            self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            W -= self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)


def optimize(params, graphs, entries, att_cfg, tcfg, rng_key, label_sets, history):
    """Run ``tcfg.epochs`` full-batch Adam steps; pairs are resampled each epoch."""
    opt = Adam(params, tcfg.lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
    best, stale = np.inf, 0
    for epoch in range(tcfg.epochs):
        for gi, (normals, anomalies) in label_sets.items():
            rng = make_rng(tcfg.seed, rng_key, "pairs", epoch, graphs[gi].name)
            graphs[gi].pairs = sample_pairs(anomalies, normals, tcfg.pairs_per_graph, rng)
        try:
            loss, grads, _ = loss_and_grad(params, graphs, entries, att_cfg, tcfg.lambda_, tcfg.beta,
                                          anchor=tcfg.triplet_anchor)
        except NumericalError as exc:
            raise NumericalError(f"epoch {epoch}: {exc}") from None
        history.append(float(loss))
        opt.step(params, grads)
        log.debug("epoch %d loss %.6f", epoch, loss)
        if tcfg.patience:
            if loss < best - 1e-12:
                best, stale = loss, 0
            else:
                stale += 1
                if stale >= tcfg.patience:
                    log.info("stopping at epoch %d: no improvement for %d epochs", epoch, stale)
                    break
    return params


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    params: EncoderParams
    config: RunConfig
    stats: object
    dictionary: PatternDictionary
    epoch: int = 0
    loss_history: list = field(default_factory=list)
    train_graphs: list = field(default_factory=list)

    def to_bytes(self):
        return checkpoint_to_bytes(self)


CKPT_MAGIC = b"OWLM"
CKPT_VERSION = 1


def checkpoint_to_bytes(ck):
    meta = {
        "config": ck.config.to_dict(),
        "stats": ck.stats.to_json(),
        "epoch": ck.epoch,
        "loss_history": [float(x) for x in ck.loss_history],
        "train_graphs": list(ck.train_graphs),
    }
    meta_b = json.dumps(meta, sort_keys=True).encode("utf-8")
    mats = ck.params.named()
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<II", CKPT_VERSION, len(meta_b)))
    buf.write(meta_b)
    buf.write(struct.pack("<I", len(mats)))
    for name, W in mats.items():
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)) + nb + struct.pack("<II", *W.shape))
    for W in mats.values():
        buf.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
    d = dictionary_to_bytes(ck.dictionary)
    buf.write(struct.pack("<Q", len(d)))
    buf.write(d)
    return buf.getvalue()


def checkpoint_from_bytes(data, path=None):
    from .align import AlignmentStats

    def need(pos, n, what):
        if pos + n > len(data):
            raise FormatError(f"truncated while reading {what}", path=path, offset=pos)

    need(0, 12, "header")
    if data[:4] != CKPT_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}", path=path, offset=0)
    version, mlen = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported version {version}", path=path, offset=4)
    pos = 12
    need(pos, mlen, "config block")
    try:
        meta = json.loads(data[pos:pos + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad config block: {exc}", path=path, offset=pos) from None
    pos += mlen
    need(pos, 4, "matrix count")
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    shapes = []
    for _ in range(count):
        need(pos, 2, "matrix directory")
        (nl,) = struct.unpack_from("<H", data, pos)
        pos += 2
        need(pos, nl + 8, "matrix directory")
        name = data[pos:pos + nl].decode("utf-8")
        pos += nl
        shapes.append((name, struct.unpack_from("<II", data, pos)))
        pos += 8
    mats = {}
    for name, (r, c) in shapes:
        need(pos, r * c * 8, f"matrix {name}")
        mats[name] = np.frombuffer(data, dtype="<f8", count=r * c, offset=pos).reshape(r, c).astype(np.float64)
        pos += r * c * 8
    need(pos, 8, "dictionary length")
    (dlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    need(pos, dlen, "dictionary block")
    dictionary = dictionary_from_bytes(data[pos:pos + dlen], path)
    pos += dlen
    if pos != len(data):
        raise FormatError("trailing bytes", path=path, offset=pos)
    try:
        cfg = RunConfig.from_dict(meta["config"])
        params = EncoderParams.from_named(mats)
    except (KeyError, InvalidArgumentError) as exc:
        raise FormatError(f"inconsistent checkpoint: {exc}", path=path) from None
    return Checkpoint(params=params, config=cfg, stats=AlignmentStats.from_json(meta["stats"]),
                      dictionary=dictionary, epoch=meta["epoch"], loss_history=meta["loss_history"],
                      train_graphs=meta.get("train_graphs", []))


def save_checkpoint(ck, path):
    atomic_write_bytes(path, checkpoint_to_bytes(ck))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read(), path)


# ---------------------------------------------------------------------------
# fit / finetune


def prepare_graph(aligned, g, adjacency):
    return GraphTerm(g.name, aligned.X_tilde, build_normalized_adjacency(g, adjacency).values)


def _split(labels, subset=None):
    labels = np.asarray(labels)
    nodes = np.arange(labels.size) if subset is None else np.asarray(subset, dtype=np.int64)
    return nodes[labels[nodes] == 0], nodes[labels[nodes] == 1]


def sample_entry_indices(labels, n, n_sup, rng):
    """Pattern node indices: label-0 nodes when labels are given, else any node."""
    cand = np.arange(n) if labels is None else np.flatnonzero(np.asarray(labels) == 0)
    if cand.size == 0:
        raise InvalidArgumentError("no candidate pattern nodes")
    return rng.choice(cand, size=min(n_sup, cand.size), replace=False)


def _materialize(params, graphs, specs, sources):
    out = []
    for g, spec, src in zip(graphs, specs, sources):
        H = encode_attribute(g.X, g.A, params)
        R = encode_structure(g.X.shape[0], g.A, params)
        out.append(DictEntry(g.name, spec, H[spec], R[spec], src))
    return out


def fit(graphs, cfg, on_epoch=None):
    """Train on labeled graphs; returns a :class:`Checkpoint`.

    ``graphs`` are :class:`~owleye.graph.GraphDataset` objects, each with at
    least one normal and one anomalous node.
    """
    graphs = list(graphs)
    if not graphs:
        raise InvalidArgumentError("need at least one training graph")
    names = [g.name for g in graphs]
    if len(set(names)) != len(names):
        raise InvalidArgumentError(f"training graph names must be unique: {names}")
    for g in graphs:
        if g.labels is None or g.labels.sum() == 0 or (g.labels == 0).sum() == 0:
            raise InvalidArgumentError(f"training graph {g.name!r} needs both normal and anomalous labels")
    aligned, stats = align_collection(graphs, cfg.d, cfg.tau, cfg.seed, cfg.aggregate)
    terms = [prepare_graph(a, g, cfg.adjacency) for a, g in zip(aligned, graphs)]
    params = init_params(cfg.layers, cfg.d, make_rng(cfg.seed, "init"),
                         per_channel_similarity=cfg.similarity_channel == "per_channel")
    entries, label_sets = [], {}
    for gi, (g, t) in enumerate(zip(graphs, terms)):
        idx = sample_entry_indices(g.labels, g.n, cfg.n_sup, make_rng(cfg.seed, "dict", g.name))
        entries.append(EntrySpec(graph=gi, idx=idx))
        t.normals, t.anomalies = _split(g.labels)
        label_sets[gi] = (t.normals, t.anomalies)
    tcfg = TrainConfig.from_run(cfg)
    history = []
    optimize(params, terms, entries, cfg.attention_config(), tcfg, "fit", label_sets, history)
    final = _materialize(params, terms, [e.idx for e in entries], [Source.train_normal] * len(terms))
    dictionary = PatternDictionary(final, params.D_emb)
    return Checkpoint(params, cfg, stats, dictionary, epoch=len(history), loss_history=history,
                      train_graphs=names)


def align_against(ck, g, seed):
    include = ck.config.test_median == "include_test"
    aligned, _ = align_new_graph(g, ck.config.d, ck.stats, seed, include_self=include)
    return aligned


def continue_training(ck, graphs, label_subsets, entry_labels, sources, epochs, seed, rng_key):
    """Finetune ``ck`` on extra graphs.

    Stored dictionary entries are held constant; each extra graph adds one
    live entry (sampled from ``entry_labels[i]``'s normal nodes, or from all
    nodes when ``None``).  Graphs with a ``None`` label subset only
    contribute patterns.
    """
    cfg = ck.config
    params = ck.params.copy()
    terms = [prepare_graph(align_against(ck, g, seed), g, cfg.adjacency) for g in graphs]
    entries = [EntrySpec(Dict_H=e.Dict_H, Dict_R=e.Dict_R) for e in ck.dictionary.entries]
    idxs, label_sets = [], {}
    for gi, (g, t) in enumerate(zip(graphs, terms)):
        idx = sample_entry_indices(entry_labels[gi], g.n, cfg.n_sup, make_rng(seed, rng_key, "dict", g.name))
        idxs.append(idx)
        entries.append(EntrySpec(graph=gi, idx=idx))
        if label_subsets[gi] is not None:
            t.normals, t.anomalies = _split(g.labels, label_subsets[gi])
            if t.normals.size == 0 or t.anomalies.size == 0:
                raise InvalidArgumentError(f"graph {g.name!r}: labeled set needs >= 1 normal and >= 1 anomaly")
            label_sets[gi] = (t.normals, t.anomalies)
    tcfg = TrainConfig.from_run(cfg, epochs=epochs, seed=seed)
    history = list(ck.loss_history)
    n_before = len(history)
    if epochs and label_sets:
        optimize(params, terms, entries, cfg.attention_config(), tcfg, rng_key, label_sets, history)
    new_entries = _materialize(params, terms, idxs, sources)
    dictionary = PatternDictionary(ck.dictionary.entries + tuple(new_entries), ck.dictionary.D_emb)
    return Checkpoint(params, cfg, ck.stats, dictionary, epoch=ck.epoch + len(history) - n_before,
                      loss_history=history, train_graphs=list(ck.train_graphs))


def finetune(ck, test_graph, labeled_nodes, labels=None, epochs=None, seed=0):
    """Few-shot finetune on labeled nodes of a test graph.

    ``labeled_nodes`` are node ids whose labels come from ``labels`` (or the
    graph's own labels).  A pseudo-support entry sampled from all nodes of
    the test graph is added to the dictionary first.
    """
    y = np.asarray(test_graph.labels if labels is None else labels)
    if y is None or y.ndim != 1 or y.size != test_graph.n:
        raise InvalidArgumentError("finetune needs a label vector covering the test graph")
    nodes = np.unique(np.asarray(labeled_nodes, dtype=np.int64))
    if (y[nodes] == 0).sum() == 0 or (y[nodes] == 1).sum() == 0:
        raise InvalidArgumentError("labeled set needs at least one normal and one anomaly")
    g = test_graph.with_(labels=y.astype(np.int8))
    epochs = ck.config.finetune_epochs if epochs is None else epochs
    return continue_training(ck, [g], [nodes], [None], [Source.test_pseudo], epochs, seed, "finetune")


def sample_shots(labels, n_normal, n_anomaly, rng):
    """Draw ``n_normal`` normal and ``n_anomaly`` anomalous node ids."""
    labels = np.asarray(labels)
    normals = np.flatnonzero(labels == 0)
    anomalies = np.flatnonzero(labels == 1)
    if normals.size < n_normal or anomalies.size < n_anomaly:
        raise InvalidArgumentError("not enough labeled nodes for the requested shots")
    return np.concatenate([rng.choice(normals, n_normal, replace=False),
                           rng.choice(anomalies, n_anomaly, replace=False)])


def finetune_on_graphs(ck, aux_graphs, epochs=None, seed=0):
    """Continue training on labeled auxiliary graphs and add their patterns."""
    aux_graphs = list(aux_graphs)
    for g in aux_graphs:
        if g.labels is None:
            raise InvalidArgumentError(f"auxiliary graph {g.name!r} needs labels for finetuning")
    epochs = ck.config.finetune_epochs if epochs is None else epochs
    return continue_training(ck, aux_graphs, [np.arange(g.n) for g in aux_graphs],
                             [g.labels for g in aux_graphs], [Source.aux_normal] * len(aux_graphs),
                             epochs, seed, "aux-finetune")
