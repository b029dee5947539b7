"""Truncated cross-attention onto dictionary entries and the averaged,
similarity-weighted reconstruction of both channels.

For a query graph with embeddings ``H, R`` and entries ``j = 1..M``::

    H_hat = 1/M * sum_j sim_j * (alpha_H^j @ Dict_H^j)
    R_hat = 1/M * sum_j sim_j * (alpha_R^j @ Dict_R^j)

where ``alpha`` is a per-row softmax over the patterns with the ``k``
lowest-scoring patterns removed, and ``sim_j`` comes from the structure
channel (see :mod:`owleye.dictionary`).

Identical entries are evaluated once and weighted by their multiplicity, so
a dictionary that lists every entry twice gives bit-identical output.
"""

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dictionary import similarity_backward, similarity_forward
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class AttentionConfig:
    """Attention and similarity options.

    ``k`` is either an absolute count of truncated patterns (int) or a
    fraction of each entry's pattern count (float, rounded up and capped
    at ``n_sup - 1``).
    """

    k: object = 0.5
    tau_a: float = 0.001
    drop_outer_sqrt: bool = True
    similarity_channel: str = "structure"
    tie_attention: bool = False

    def __post_init__(self):
        if not self.tau_a > 0:
            raise InvalidArgumentError("tau_a must be positive")
        if self.similarity_channel not in ("structure", "per_channel"):
            raise InvalidArgumentError(f"unknown similarity_channel {self.similarity_channel!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, (int, float, np.integer, np.floating)):
            raise InvalidArgumentError(f"k must be an int or a fraction, got {self.k!r}")
        if self.k < 0 or (isinstance(self.k, (float, np.floating)) and self.k >= 1):
            raise InvalidArgumentError(f"k out of range: {self.k!r}")

    def resolve_k(self, n_sup):
        if isinstance(self.k, (float, np.floating)):
            return min(math.ceil(self.k * n_sup), n_sup - 1)
        return int(self.k)


def truncation_mask(T, k):
    """Boolean mask of the ``k`` smallest entries per row; ties mask lower indices first."""
    M = np.zeros(T.shape, dtype=bool)
    if k:
        order = np.argsort(T, axis=1, kind="stable")[:, :k]
        np.put_along_axis(M, order, True, axis=1)
    return M


def attention_forward(query, patterns, WQ, WK, k, tau_a, drop_outer_sqrt=True):
    """Returns ``(alpha, cache)``."""
    s = patterns.shape[0]
    if not 0 <= k < s:
        raise InvalidArgumentError(f"truncation k={k} must satisfy 0 <= k < n_sup={s}")
    if query.shape[1] != WQ.shape[0] or patterns.shape[1] != WK.shape[0]:
        raise InvalidArgumentError("attention weight shapes do not match the embeddings")
    D = WQ.shape[1]
    Q = query @ WQ
    K = patterns @ WK
    S = (Q @ K.T) / np.sqrt(D)
    T = S if drop_outer_sqrt else np.sign(S) * np.sqrt(np.abs(S))
    M = truncation_mask(T, k)
    U = np.where(M, -np.inf, T / tau_a)
    U = U - U.max(axis=1, keepdims=True)
    alpha = np.exp(U)
    alpha[M] = 0.0
    alpha /= alpha.sum(axis=1, keepdims=True)
    return alpha, (query, patterns, Q, K, S, alpha, tau_a, drop_outer_sqrt, D)


def attention_backward(cache, WQ, WK, dalpha):
    """Returns ``(d_query, d_patterns, d_WQ, d_WK)``; the mask is held fixed."""
    query, patterns, Q, K, S, alpha, tau_a, drop_outer_sqrt, D = cache
    dU = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
    dT = dU / tau_a
    if drop_outer_sqrt:
        dS = dT
    else:
        absS = np.abs(S)
        with np.errstate(divide="ignore"):
            dS = np.where(absS > 0, dT / (2.0 * np.sqrt(absS)), 0.0)
    dS = dS / np.sqrt(D)
    dQ = dS @ K
    dK = dS.T @ Q
    return dQ @ WQ.T, dK @ WK.T, query.T @ dQ, patterns.T @ dK


def truncated_attention(query, patterns, WQ, WK, cfg):
    """Truncated scaled-dot-product attention (n x n_sup) for one entry."""
    k = cfg.resolve_k(patterns.shape[0])
    alpha, _ = attention_forward(query, patterns, WQ, WK, k, cfg.tau_a, cfg.drop_outer_sqrt)
    return alpha


def attention_weights(params, cfg):
    """``(WQ_H, WK_H, WQ_R, WK_R, W1_R, W1_H)`` honouring tying options."""
    if cfg.tie_attention:
        WQ_R, WK_R = params.WQ_H, params.WK_H
    else:
        WQ_R, WK_R = params.WQ_R, params.WK_R
    W1_H = None
    if cfg.similarity_channel == "per_channel":
        if params.W1_H is None:
            raise InvalidArgumentError("per_channel similarity needs W1_H in the parameters")
        W1_H = params.W1_H
    return params.WQ_H, params.WK_H, WQ_R, WK_R, params.W1, W1_H


def _entry_key(P_H, P_R, extra=b""):
    h = hashlib.blake2b(digest_size=16)
    for arr in (P_H, P_R):
        a = np.ascontiguousarray(arr, dtype=np.float64)
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    h.update(extra)
    return h.digest()


def group_entries(pattern_pairs, keys=None):
    """Group identical pattern pairs; returns ``(unique_positions, counts, slot_of)``."""
    first, counts, slot_of = {}, [], []
    for j, (P_H, P_R) in enumerate(pattern_pairs):
        key = keys[j] if keys is not None else _entry_key(P_H, P_R)
        if key not in first:
            first[key] = len(counts)
            counts.append(0)
        g = first[key]
        counts[g] += 1
        slot_of.append(g)
    unique = [slot_of.index(g) for g in range(len(counts))]
    return unique, counts, slot_of


def reconstruct_forward(Hq, Rq, pattern_pairs, params, cfg, keys=None):
    """Core reconstruction over a list of ``(Dict_H, Dict_R)`` pairs.

    Returns ``(H_hat, R_hat, cache)``; the cache also carries per-entry
    attention maps and similarity vectors.
    """
    M = len(pattern_pairs)
    if M == 0:
        raise InvalidArgumentError("dictionary is empty")
    WQ_H, WK_H, WQ_R, WK_R, W1_R, W1_H = attention_weights(params, cfg)
    unique, counts, slot_of = group_entries(pattern_pairs, keys)
    H_hat = np.zeros_like(Hq, dtype=np.float64)
    R_hat = np.zeros_like(Rq, dtype=np.float64)
    slots = []
    for j, c in zip(unique, counts):
        P_H, P_R = pattern_pairs[j]
        if P_H.shape[1] != Hq.shape[1]:
            raise InvalidArgumentError(f"entry width {P_H.shape[1]} != query width {Hq.shape[1]}")
        k = cfg.resolve_k(P_H.shape[0])
        sim_R, sc_R = similarity_forward(Rq, P_R, W1_R)
        if W1_H is not None:
            sim_H, sc_H = similarity_forward(Hq, P_H, W1_H)
        else:
            sim_H, sc_H = sim_R, None
        a_H, ac_H = attention_forward(Hq, P_H, WQ_H, WK_H, k, cfg.tau_a, cfg.drop_outer_sqrt)
        a_R, ac_R = attention_forward(Rq, P_R, WQ_R, WK_R, k, cfg.tau_a, cfg.drop_outer_sqrt)
        C_H = a_H @ P_H
        C_R = a_R @ P_R
        H_hat += c * (sim_H[:, None] * C_H)
        R_hat += c * (sim_R[:, None] * C_R)
        slots.append(dict(count=c, P_H=P_H, P_R=P_R, sim_R=sim_R, sim_H=sim_H, sc_R=sc_R, sc_H=sc_H,
                          a_H=a_H, a_R=a_R, ac_H=ac_H, ac_R=ac_R, C_H=C_H, C_R=C_R))
    H_hat /= M
    R_hat /= M
    return H_hat, R_hat, dict(M=M, slots=slots, slot_of=slot_of, cfg=cfg)


def reconstruct_backward(cache, params, dH_hat, dR_hat):
    """Back-propagate through :func:`reconstruct_forward`.

    Returns ``(dHq, dRq, d_patterns, grads)`` where ``d_patterns[j]`` is a
    ``(dDict_H, dDict_R)`` pair for input position ``j`` (duplicates share the
    gradient of their group, split evenly) and ``grads`` maps parameter
    names to arrays.
    """
    cfg, M = cache["cfg"], cache["M"]
    WQ_H, WK_H, WQ_R, WK_R, W1_R, W1_H = attention_weights(params, cfg)
    dHq = np.zeros_like(dH_hat)
    dRq = np.zeros_like(dR_hat)
    g = {name: np.zeros_like(W) for name, W in
         (("W1", W1_R), ("WQ_H", WQ_H), ("WK_H", WK_H), ("WQ_R", params.WQ_R), ("WK_R", params.WK_R))}
    if W1_H is not None:
        g["W1_H"] = np.zeros_like(W1_H)
    slot_grads = []
    for sl in cache["slots"]:
        w = sl["count"] / M
        dC_H = w * sl["sim_H"][:, None] * dH_hat
        dC_R = w * sl["sim_R"][:, None] * dR_hat
        dsim_H = w * (dH_hat * sl["C_H"]).sum(axis=1)
        dsim_R = w * (dR_hat * sl["C_R"]).sum(axis=1)
        dP_H = sl["a_H"].T @ dC_H
        dP_R = sl["a_R"].T @ dC_R

        dq, dp, dWQ, dWK = attention_backward(sl["ac_H"], WQ_H, WK_H, dC_H @ sl["P_H"].T)
        dHq += dq
        dP_H += dp
        g["WQ_H"] += dWQ
        g["WK_H"] += dWK
        dq, dp, dWQ, dWK = attention_backward(sl["ac_R"], WQ_R, WK_R, dC_R @ sl["P_R"].T)
        dRq += dq
        dP_R += dp
        if cfg.tie_attention:
            g["WQ_H"] += dWQ
            g["WK_H"] += dWK
        else:
            g["WQ_R"] += dWQ
            g["WK_R"] += dWK

        if sl["sc_H"] is None:
            dsim_R = dsim_R + dsim_H
        else:
            dq, dp, dW = similarity_backward(sl["sc_H"], W1_H, dsim_H)
            dHq += dq
            dP_H += dp
            g["W1_H"] += dW
        dq, dp, dW = similarity_backward(sl["sc_R"], W1_R, dsim_R)
        dRq += dq
        dP_R += dp
        g["W1"] += dW
        slot_grads.append((dP_H / sl["count"], dP_R / sl["count"]))
    d_patterns = [slot_grads[s] for s in cache["slot_of"]]
    return dHq, dRq, d_patterns, g


@dataclass
class Reconstruction:
    H_hat: np.ndarray = field(repr=False)
    R_hat: np.ndarray = field(repr=False)
    attention_H: list = field(repr=False)
    attention_R: list = field(repr=False)
    similarity: list = field(repr=False)
    entry_ids: list = field(default_factory=list)

    @property
    def M(self):
        return len(self.attention_H)


def reconstruct(emb, dictionary, params, cfg):
    """Reconstruct both channels of one graph from every dictionary entry."""
    if len(dictionary) == 0:
        raise InvalidArgumentError("dictionary is empty")
    if dictionary.D_emb != emb.H.shape[1]:
        raise InvalidArgumentError(f"dictionary D_emb {dictionary.D_emb} != embedding width {emb.H.shape[1]}")
    pairs = [(e.Dict_H, e.Dict_R) for e in dictionary.entries]
    H_hat, R_hat, cache = reconstruct_forward(emb.H, emb.R, pairs, params, cfg)
    slots = [cache["slots"][s] for s in cache["slot_of"]]
    return Reconstruction(
        H_hat=H_hat, R_hat=R_hat,
        attention_H=[s["a_H"] for s in slots],
        attention_R=[s["a_R"] for s in slots],
        similarity=[s["sim_R"] for s in slots],
        entry_ids=[e.graph_id for e in dictionary.entries],
    )


def export_attention_maps(rec, node_ids, path):
    """Write ``node<id>_<channel>.csv`` per node: one row per entry, one column per pattern.

    Entries with fewer patterns than the widest one are right-padded with
    empty cells.  Returns the written paths.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = rec.H_hat.shape[0]
    written = []
    for v in node_ids:
        if not 0 <= int(v) < n:
            raise InvalidArgumentError(f"node id {v} outside [0, {n})")
        for channel, maps in (("attr", rec.attention_H), ("struct", rec.attention_R)):
            out = path / f"node{int(v)}_{channel}.csv"
            width = max(m.shape[1] for m in maps)
            try:
                with open(out, "w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh)
                    w.writerow(["entry", "graph_id"] + [f"p{i}" for i in range(width)])
                    for j, (gid, m) in enumerate(zip(rec.entry_ids, maps)):
                        vals = [repr(float(x)) for x in m[int(v)]]
                        w.writerow([j, gid] + vals + [""] * (width - len(vals)))
            except OSError as exc:
                raise OSError(f"{out}: {exc}") from exc
            written.append(out)
    return written
