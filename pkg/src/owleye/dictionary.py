"""Persistent multi-graph pattern dictionary.

Each entry stores embedding rows of nodes sampled from one graph, for both
channels.  Entries are only ever appended; adding a new graph's patterns
needs no parameter update.

Binary layout (little-endian)::

    b"OWLD" | u32 version=1 | u32 D_emb | u32 entry_count
    per entry:
        u16 len | graph_id utf-8 | u8 source | u32 n_sup | n_sup x u32 idx
        Dict_H (n_sup x D_emb f64) | Dict_R (n_sup x D_emb f64)
"""

import enum
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .graph import atomic_write_bytes
from .numerics import as_matrix

MAGIC = b"OWLD"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class Source(enum.IntEnum):
    train_normal = 0
    test_pseudo = 1
    aux_normal = 2


@dataclass(frozen=True)
class DictEntry:
    graph_id: str
    idx: np.ndarray
    Dict_H: np.ndarray = field(repr=False)
    Dict_R: np.ndarray = field(repr=False)
    source: Source = Source.train_normal

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=np.int64)
        if idx.ndim != 1 or len(np.unique(idx)) != idx.size:
            raise InvalidArgumentError("pattern indices must be a duplicate-free vector")
        H, R = as_matrix(self.Dict_H, "Dict_H"), as_matrix(self.Dict_R, "Dict_R")
        if H.shape != R.shape or H.shape[0] != idx.size:
            raise InvalidArgumentError(f"pattern shapes {H.shape}/{R.shape} do not match {idx.size} indices")
        object.__setattr__(self, "idx", idx)
        object.__setattr__(self, "Dict_H", H)
        object.__setattr__(self, "Dict_R", R)
        object.__setattr__(self, "source", Source(self.source))

    @property
    def n_sup(self):
        return self.idx.size

    @property
    def D_emb(self):
        return self.Dict_H.shape[1]


@dataclass(frozen=True)
class PatternDictionary:
    entries: tuple
    D_emb: int
    version: int = VERSION

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if e.D_emb != self.D_emb:
                raise InvalidArgumentError(f"entry {e.graph_id!r} has D_emb {e.D_emb}, expected {self.D_emb}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def extract_patterns(graph_id, emb, labels, n_sup, rng, source=None):
    """Sample up to ``n_sup`` nodes and copy their embedding rows.

    With labels, only label-0 nodes are candidates; without, every node is.
    """
    if labels is not None:
        candidates = np.flatnonzero(np.asarray(labels) == 0)
    else:
        candidates = np.arange(emb.H.shape[0])
    if candidates.size == 0:
        raise InvalidArgumentError(f"graph {graph_id!r} has no candidate pattern nodes")
    if n_sup < 1:
        raise InvalidArgumentError("n_sup must be >= 1")
    idx = rng.choice(candidates, size=min(n_sup, candidates.size), replace=False)
    if source is None:
        source = Source.train_normal if labels is not None else Source.test_pseudo
    return DictEntry(graph_id, idx, emb.H[idx], emb.R[idx], source)


def similarity_forward(query, patterns, W1):
    """Per-node max of the softmax over patterns; returns ``(sim, cache)``."""
    if patterns.shape[0] == 0:
        raise InvalidArgumentError("entry has no patterns")
    QW = query @ W1
    G = QW @ patterns.T
    G = G - G.max(axis=1, keepdims=True)
    S = np.exp(G)
    S /= S.sum(axis=1, keepdims=True)
    arg = np.argmax(S, axis=1)
    sim = S[np.arange(S.shape[0]), arg]
    return sim, (query, patterns, QW, S, arg)


def similarity_backward(cache, W1, dsim):
    """Returns ``(d_query, d_patterns, d_W1)``."""
    query, patterns, QW, S, arg = cache
    rows = np.arange(S.shape[0])
    # d/dG_ic of S[i, a_i] = S_ia (delta_ac - S_ic)
    dG = -S * (dsim * S[rows, arg])[:, None]
    dG[rows, arg] += dsim * S[rows, arg]
    dQW = dG @ patterns
    d_query = dQW @ W1.T
    d_W1 = query.T @ dQW
    d_patterns = dG.T @ QW
    return d_query, d_patterns, d_W1


def similarity(emb_R_query, entry, W1):
    """Structure-based node-to-entry similarity broadcast to ``n x D_emb``."""
    sim, _ = similarity_forward(emb_R_query, entry.Dict_R, W1)
    return np.repeat(sim[:, None], entry.D_emb, axis=1)


def merge(dictionary, new_entries):
    """New dictionary with ``new_entries`` appended in order."""
    new_entries = list(new_entries)
    for e in new_entries:
        if e.D_emb != dictionary.D_emb:
            raise InvalidArgumentError(f"entry {e.graph_id!r} has D_emb {e.D_emb}, dictionary has {dictionary.D_emb}")
    return PatternDictionary(dictionary.entries + tuple(new_entries), dictionary.D_emb, dictionary.version)


def dictionary_to_bytes(dictionary):
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, dictionary.D_emb, len(dictionary.entries)))
    for e in dictionary.entries:
        name = e.graph_id.encode("utf-8")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        buf.write(struct.pack("<BI", int(e.source), e.n_sup))
        buf.write(np.asarray(e.idx, dtype="<u4").tobytes())
        buf.write(np.ascontiguousarray(e.Dict_H, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(e.Dict_R, dtype="<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, nbytes, what):
        if self.pos + nbytes > len(self.data):
            raise FormatError(f"truncated while reading {what}", path=self.path, offset=self.pos)
        chunk = self.data[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return chunk

    def unpack(self, fmt, what):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))


def dictionary_from_bytes(data, path=None):
    r = _Reader(data, path)
    magic, version, D, count = r.unpack(_HEADER.format, "header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", path=path, offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", path=path, offset=4)
    entries = []
    for i in range(count):
        (nlen,) = r.unpack("<H", f"entry {i} name length")
        at = r.pos
        try:
            name = r.take(nlen, f"entry {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"entry {i} name is not UTF-8", path=path, offset=at) from None
        at = r.pos
        code, n_sup = r.unpack("<BI", f"entry {i} header")
        if code not in Source._value2member_map_:
            raise FormatError(f"unknown source code {code}", path=path, offset=at)
        idx = np.frombuffer(r.take(4 * n_sup, f"entry {i} indices"), dtype="<u4").astype(np.int64)
        blk = n_sup * D * 8
        H = np.frombuffer(r.take(blk, f"entry {i} Dict_H"), dtype="<f8").reshape(n_sup, D).astype(np.float64)
        R = np.frombuffer(r.take(blk, f"entry {i} Dict_R"), dtype="<f8").reshape(n_sup, D).astype(np.float64)
        try:
            entries.append(DictEntry(name, idx, H, R, Source(code)))
        except InvalidArgumentError as exc:
            raise FormatError(str(exc), path=path, offset=at) from None
    if r.pos != len(data):
        raise FormatError("trailing bytes after last entry", path=path, offset=r.pos)
    return PatternDictionary(entries, D, version)


def save_dictionary(dictionary, path):
    atomic_write_bytes(path, dictionary_to_bytes(dictionary))


def load_dictionary(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return dictionary_from_bytes(data, path)
