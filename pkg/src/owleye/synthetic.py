"""Synthetic multi-domain graph suites for desk-scale experiments."""

from pathlib import Path

from .graph import inject_anomalies, make_synthetic_graph, save_graph_dir
from .numerics import make_rng

# (feature dim, feature scale, average degree, blocks) per emulated domain
DOMAINS = (
    (48, 1.0, 3.0, 4),
    (96, 0.05, 4.0, 5),
    (24, 20.0, 2.5, 3),
    (64, 3.0, 5.0, 6),
    (40, 0.5, 3.5, 4),
    (80, 8.0, 3.0, 5),
    (32, 0.2, 4.5, 3),
    (56, 2.0, 2.5, 6),
)


def make_labeled_graph(name, seed, domain_index, n=300, anomaly_rate=0.05, clique_size=None):
    """One SBM graph with roughly ``anomaly_rate * n`` injected anomalies,
    split about evenly between clique members and contextual swaps.

    By default a single clique takes the larger half of the anomalies.
    """
    p, scale, deg, blocks = DOMAINS[domain_index % len(DOMAINS)]
    rng = make_rng(seed, "synthetic", name)
    g = make_synthetic_graph(name, n, p, rng, n_blocks=blocks, avg_degree=deg,
                             feature_scale=scale, domain=f"domain{domain_index}")
    total = max(2, round(anomaly_rate * n))
    if clique_size is None:
        clique_size = (total + 1) // 2
    n_cliques = max(1, (total // 2) // clique_size)
    n_context = total - n_cliques * clique_size
    return inject_anomalies(g, n_cliques, clique_size, n_context, rng)


def make_suite(seed, n=300, n_train=4, n_test=1, n_aux=0, anomaly_rate=0.05, clique_size=None):
    """Returns ``(train, test, aux)`` lists of labeled graphs from distinct domains."""
    names = ([f"train{i}" for i in range(n_train)] + [f"test{i}" for i in range(n_test)]
             + [f"aux{i}" for i in range(n_aux)])
    graphs = [make_labeled_graph(nm, seed, i, n, anomaly_rate, clique_size) for i, nm in enumerate(names)]
    return graphs[:n_train], graphs[n_train:n_train + n_test], graphs[n_train + n_test:]


def write_suite(root, seed, **kw):
    """Write a suite under ``root/<name>/`` and return the three path lists."""
    root = Path(root)
    train, test, aux = make_suite(seed, **kw)
    out = []
    for group in (train, test, aux):
        paths = []
        for g in group:
            save_graph_dir(g, root / g.name)
            paths.append(str(root / g.name))
        out.append(paths)
    return tuple(out)
