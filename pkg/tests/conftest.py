import numpy as np
import pytest

from owleye.config import RunConfig
from owleye.encoders import init_params
from owleye.graph import GraphDataset, build_normalized_adjacency
from owleye.numerics import finite_diff_grad, make_rng
from owleye.reconstruction import AttentionConfig
from owleye.synthetic import make_suite
from owleye.training import EntrySpec, GraphTerm, fit, loss_and_grad, sample_pairs

TINY = RunConfig(d=8, n_sup=8, epochs=3, lr=1e-2, pairs_per_graph=32, trials=2, finetune_epochs=2)


def random_labeled_graph(name, n, p, rng, n_anomalies=3, density=0.3):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    labels = np.zeros(n, dtype=np.int8)
    labels[rng.choice(n, n_anomalies, replace=False)] = 1
    return GraphDataset(name, n, np.stack([iu[keep], ju[keep]], 1), rng.standard_normal((n, p)), labels)


def gradient_problem(seed, n=12, m=2, n_sup=4, layers=3, d=5, tau_a=0.001):
    """Small full-pipeline training instance; returns ``(params, terms, entries, att_cfg)``."""
    rng = make_rng(seed, "gradcheck")
    terms, entries = [], []
    for gi in range(m):
        g = random_labeled_graph(f"g{gi}", n, d, rng)
        t = GraphTerm(g.name, g.X_raw, build_normalized_adjacency(g).values)
        t.normals = np.flatnonzero(g.labels == 0)
        t.anomalies = np.flatnonzero(g.labels == 1)
        t.pairs = sample_pairs(t.anomalies, t.normals, 0, rng)
        terms.append(t)
        entries.append(EntrySpec(graph=gi, idx=rng.choice(t.normals, n_sup, replace=False)))
    params = init_params(layers, d, make_rng(seed, "init"))
    return params, terms, entries, AttentionConfig(k=0, tau_a=tau_a)


def gradient_errors(seed, h=1e-4, **kw):
    """Normwise relative error of the analytic gradient for every parameter matrix."""
    params, terms, entries, att = gradient_problem(seed, **kw)
    _, grads, _ = loss_and_grad(params, terms, entries, att, 0.2, 0.01)
    errors = {}
    for name, W in params.named().items():
        def f(theta, name=name):
            p = params.copy()
            p.named()[name][:] = theta.reshape(W.shape)
            return loss_and_grad(p, terms, entries, att, 0.2, 0.01, need_grad=False)[0]
        fd = finite_diff_grad(f, W.ravel(), h)
        errors[name] = np.linalg.norm(fd - grads[name].ravel()) / max(np.linalg.norm(fd), 1e-12)
    return errors


@pytest.fixture(scope="session")
def tiny_suite():
    return make_suite(0, n=60, n_train=2, n_test=1, n_aux=2)


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_suite):
    train, _, _ = tiny_suite
    return fit(train, TINY)
