"""Cross-domain feature alignment.

Every graph is projected to a common width with PCA, then rescaled by one
positive scalar chosen from its mean row norm and pairwise-distance
statistics relative to the whole collection::

    X <- X / N_i * max(f_i, tau)
    f_i = sqrt(dist_med * dist_N_i / (dist_i * dist_med_N))

``dist`` averages the Euclidean distance over all n^2 ordered node pairs
(diagonal included); ``dist_N`` is the same quantity after dividing the rows
by ``N_i``.  The collection statistic is a median by default.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError
from .numerics import make_rng, pca_fit_transform

log = logging.getLogger(__name__)

EXACT_PAIR_LIMIT = 20_000
SAMPLED_PAIRS = 10_000_000
_BLOCK_ELEMS = 4_000_000


@dataclass(frozen=True)
class GraphStats:
    name: str
    N: float
    dist: float
    dist_N: float
    degenerate: bool = False
    approximate: bool = False


@dataclass(frozen=True)
class AlignmentStats:
    """Per-graph statistics plus the collection-level aggregates."""

    graphs: tuple
    dist_med: float
    dist_med_N: float
    tau: float = 1.0
    aggregate: str = "median"
    factors: tuple = ()

    def get(self, name):
        for g in self.graphs:
            if g.name == name:
                return g
        raise KeyError(name)

    def to_json(self):
        return {
            "graphs": [vars(g).copy() for g in self.graphs],
            "dist_med": self.dist_med, "dist_med_N": self.dist_med_N,
            "tau": self.tau, "aggregate": self.aggregate, "factors": list(self.factors),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(graphs=tuple(GraphStats(**g) for g in obj["graphs"]),
                   dist_med=obj["dist_med"], dist_med_N=obj["dist_med_N"],
                   tau=obj["tau"], aggregate=obj["aggregate"], factors=tuple(obj["factors"]))


@dataclass(frozen=True)
class AlignedGraph:
    graph_id: str
    X_tilde: np.ndarray = field(repr=False)
    factor: float = 1.0

    @property
    def d(self):
        return self.X_tilde.shape[1]


def project_features(g, d, rng):
    """PCA of the raw features to width ``d``."""
    return pca_fit_transform(g.X_raw, d, rng)


def mean_pairwise_distance(X, rng=None):
    """Mean Euclidean distance over all n^2 ordered pairs.

    Returns ``(value, approximate)``; above ``EXACT_PAIR_LIMIT`` rows the mean
    is estimated from ``SAMPLED_PAIRS`` uniformly drawn ordered pairs.
    """
    n = X.shape[0]
    if n <= EXACT_PAIR_LIMIT:
        block = max(1, _BLOCK_ELEMS // max(n, 1))
        total = 0.0
        for s in range(0, n, block):
            total += cdist(X[s:s + block], X).sum()
        return total / (n * n), False
    if rng is None:
        raise InvalidArgumentError(f"an rng is required for sampled distances (n={n})")
    total = 0.0
    for s in range(0, SAMPLED_PAIRS, 1_000_000):
        m = min(1_000_000, SAMPLED_PAIRS - s)
        a = rng.integers(0, n, m)
        b = rng.integers(0, n, m)
        total += np.linalg.norm(X[a] - X[b], axis=1).sum()
    return total / SAMPLED_PAIRS, True


def graph_norm_stats(X_tilde, name="", rng=None):
    """Mean row norm ``N``, mean pairwise distance and its norm-scaled version."""
    X = np.asarray(X_tilde, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError("need at least one row")
    N = float(np.linalg.norm(X, axis=1).mean())
    dist, approx = mean_pairwise_distance(X, rng)
    if N == 0.0:
        log.warning("graph %r has all-zero features; dist_N set to 0", name)
        return GraphStats(name, N, dist, 0.0, degenerate=True, approximate=approx)
    dist_N, _ = mean_pairwise_distance(X / N, rng)
    return GraphStats(name, N, dist, dist_N, approximate=approx)


def aggregate_stats(values, how="median"):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgumentError("cannot aggregate an empty list")
    if how == "median":
        # even counts: mean of the two middle values
        return float(np.median(values))
    if how == "mean":
        return float(values.mean())
    raise InvalidArgumentError(f"unknown aggregate {how!r}")


def median_stats(per_graph, how="median"):
    """Componentwise median (or mean) of ``(dist, dist_N)`` tuples."""
    per_graph = list(per_graph)
    if not per_graph:
        raise InvalidArgumentError("need at least one graph")
    dists = [p[0] for p in per_graph]
    dists_N = [p[1] for p in per_graph]
    return aggregate_stats(dists, how), aggregate_stats(dists_N, how)


def scaling_factor(stats, dist_med, dist_med_N):
    """Returns ``(f, degenerate)``; falls back to ``f = 1`` on zero statistics."""
    if stats.dist == 0 or dist_med == 0 or dist_med_N == 0:
        return 1.0, True
    return float(np.sqrt((dist_med * stats.dist_N) / (stats.dist * dist_med_N))), False


def apply_normalization(X_tilde, stats, dist_med, dist_med_N, tau=1.0):
    """Scale ``X_tilde`` by ``max(f, tau) / N``; returns ``(X, f)``."""
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    if stats.N == 0:
        raise InvalidArgumentError(f"graph {stats.name!r} has zero mean norm; cannot normalize")
    f, degenerate = scaling_factor(stats, dist_med, dist_med_N)
    if degenerate:
        log.warning("degenerate distance statistics for %r; using f = 1", stats.name)
    return np.asarray(X_tilde) / stats.N * max(f, tau), f


def collection_stats(graph_stats, tau=1.0, how="median"):
    dist_med, dist_med_N = median_stats([(s.dist, s.dist_N) for s in graph_stats], how)
    factors = tuple(scaling_factor(s, dist_med, dist_med_N)[0] for s in graph_stats)
    return AlignmentStats(tuple(graph_stats), dist_med, dist_med_N, tau, how, factors)


def graph_rng(seed, g):
    """Per-graph stream, keyed by name so results do not depend on list order."""
    return make_rng(seed, "align", g.name)


def align_collection(graphs, d, tau, seed, how="median"):
    """Project, measure and normalize a collection of graphs jointly.

    Returns ``(aligned, stats)`` with ``aligned`` in input order.
    """
    graphs = list(graphs)
    if not graphs:
        raise InvalidArgumentError("need at least one graph")
    projected, per_graph = [], []
    for g in graphs:
        rng = graph_rng(seed, g)
        X = project_features(g, d, rng)
        projected.append(X)
        per_graph.append(graph_norm_stats(X, g.name, rng))
    stats = collection_stats(per_graph, tau, how)
    aligned = []
    for g, X, s in zip(graphs, projected, per_graph):
        Xn, f = apply_normalization(X, s, stats.dist_med, stats.dist_med_N, tau)
        aligned.append(AlignedGraph(g.name, Xn, f))
    return aligned, stats


def align_new_graph(g, d, reference, seed, include_self=True):
    """Align an unseen graph against stored training statistics.

    With ``include_self`` the aggregates are recomputed over the reference
    graphs plus this one; otherwise the reference aggregates are used as-is.
    """
    rng = graph_rng(seed, g)
    X = project_features(g, d, rng)
    s = graph_norm_stats(X, g.name, rng)
    if include_self:
        coll = collection_stats(list(reference.graphs) + [s], reference.tau, reference.aggregate)
    else:
        coll = reference
    Xn, f = apply_normalization(X, s, coll.dist_med, coll.dist_med_N, reference.tau)
    return AlignedGraph(g.name, Xn, f), s
