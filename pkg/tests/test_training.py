import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import TINY, gradient_errors, gradient_problem
from owleye.config import RunConfig
from owleye.errors import FormatError, InvalidArgumentError
from owleye.evaluation import zero_shot_score
from owleye.numerics import finite_diff_grad, make_rng
from owleye.reconstruction import AttentionConfig
from owleye.synthetic import make_suite
from owleye.training import (EntrySpec, GraphTerm, TrainConfig, checkpoint_from_bytes, finetune, fit,
                             load_checkpoint, loss_and_grad, recon_loss, sample_pairs, sample_shots,
                             save_checkpoint, triplet_loss)


def cos(a, b):
    return a @ b / (np.linalg.norm(a) * np.linalg.norm(b))


# reconstruction loss


def test_recon_minimum():
    H = make_rng(0).standard_normal((5, 3))
    H_hat = H.copy()
    H_hat[[1, 3]] *= -1
    assert recon_loss(H, H_hat, [0, 2, 4], [1, 3]) == pytest.approx(-5.0, abs=1e-12)


def test_recon_orthogonal_is_zero():
    H = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
    H_hat = np.array([[0.0, 1.0], [5.0, 0.0], [0.0, -1.0]])
    assert recon_loss(H, H_hat, [0, 1], [2]) == 0.0


def test_recon_matches_hand_sum():
    rng = make_rng(1)
    H, H_hat = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    normals, anomalies = [0, 1, 3, 5], [2, 4]
    expected = sum(cos(H[v], H_hat[v]) for v in anomalies) - sum(cos(H[v], H_hat[v]) for v in normals)
    assert recon_loss(H, H_hat, normals, anomalies) == pytest.approx(expected, abs=1e-12)


def test_recon_skips_zero_rows(caplog):
    H = np.array([[1.0, 0.0], [0.0, 0.0]])
    with caplog.at_level(logging.WARNING):
        assert recon_loss(H, H.copy(), [0, 1], []) == -1.0
    assert "zero-norm" in caplog.text


@pytest.mark.parametrize("normals,anomalies", [([], []), ([0, 1], [1]), ([0, 9], [1])])
def test_recon_rejects_bad_sets(normals, anomalies):
    with pytest.raises(InvalidArgumentError):
        recon_loss(np.ones((3, 2)), np.ones((3, 2)), normals, anomalies)


# triplet loss


def triplet_oracle(H, H_hat, R, R_hat, pairs, lam, beta, anchor):
    total = 0.0
    for a, nrm in pairs:
        u, w = (nrm, a) if anchor == "normal" else (a, nrm)
        for X, Xh, wt in ((H, H_hat, 1.0), (R, R_hat, beta)):
            arg = np.sum((Xh[u] - X[u]) ** 2) - np.sum((Xh[u] - Xh[w]) ** 2) + lam
            total += wt * max(arg, 0.0)
    return total


@pytest.mark.parametrize("anchor", ["normal", "anomaly"])
def test_triplet_matches_oracle(anchor):
    rng = make_rng(2)
    H, H_hat, R, R_hat = (rng.standard_normal((7, 3)) for _ in range(4))
    pairs = [(0, 3), (1, 3), (0, 5), (2, 6)]
    got = triplet_loss(H, H_hat, R, R_hat, pairs, 0.2, 0.01, anchor)
    assert got == pytest.approx(triplet_oracle(H, H_hat, R, R_hat, pairs, 0.2, 0.01, anchor), abs=1e-12)


@pytest.mark.parametrize("anchor", ["normal", "anomaly"])
def test_triplet_all_distances_zero(anchor):
    H = np.ones((2, 3))
    R = np.full((2, 3), 2.0)
    assert triplet_loss(H, H.copy(), R, R.copy(), [(0, 1)], 0.2, 0.01, anchor) == pytest.approx(0.2 * 1.01, abs=1e-15)


def test_triplet_inactive_hinge():
    H = np.zeros((2, 1))
    H_hat = np.array([[0.0], [10.0]])
    assert triplet_loss(H, H_hat, H, H_hat, [(0, 1)], 0.2, 0.5, "anomaly") == 0.0
    assert triplet_loss(H, H_hat, H, H_hat, [(1, 0)], 0.2, 0.5, "normal") == 0.0


def test_triplet_empty_pairs_warns(caplog):
    with caplog.at_level(logging.WARNING):
        assert triplet_loss(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)), []) == 0.0
    assert "no pairs" in caplog.text


def test_sample_pairs_full_and_sampled():
    full = sample_pairs([7, 8], [1, 2, 3], 0, make_rng(0))
    assert sorted(map(tuple, full.tolist())) == [(a, b) for a in (7, 8) for b in (1, 2, 3)]
    drawn = sample_pairs([7, 8], [1, 2, 3], 50, make_rng(0))
    assert drawn.shape == (50, 2) and set(drawn[:, 0]) <= {7, 8} and set(drawn[:, 1]) <= {1, 2, 3}


def test_train_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(lambda_=-1)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(triplet_anchor="both")
    assert TrainConfig().lr == 3e-5 and TrainConfig().pairs_per_graph == 512


# gradients


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("tau_a", [0.001, 1.0])
def test_full_pipeline_gradient(seed, tau_a):
    errors = gradient_errors(seed, tau_a=tau_a)
    assert len(errors) == 11
    assert max(errors.values()) < 1e-4, errors


def test_gradient_with_truncation_away_from_ties():
    # random logits, so no query row sits on a tie at the truncation boundary
    params, terms, entries, _ = gradient_problem(4, n_sup=6)
    att = AttentionConfig(k=2, tau_a=1.0)
    _, grads, _ = loss_and_grad(params, terms, entries, att, 0.2, 0.01)
    for name in ("WQ_H", "W1", "W_attr.2"):
        W = params.named()[name]

        def f(theta, name=name, W=W):
            p = params.copy()
            p.named()[name][:] = theta.reshape(W.shape)
            return loss_and_grad(p, terms, entries, att, 0.2, 0.01, need_grad=False)[0]
        fd = finite_diff_grad(f, W.ravel(), 1e-6)
        assert np.linalg.norm(fd - grads[name].ravel()) <= 1e-4 * np.linalg.norm(fd)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_loss_is_permutation_invariant(seed):
    params, terms, entries, att = gradient_problem(seed % 1000, tau_a=1.0)
    base = loss_and_grad(params, terms, entries, att, 0.2, 0.01, need_grad=False)[0]
    new_terms, new_entries = [], []
    for t, e in zip(terms, entries):
        n = t.X.shape[0]
        perm = make_rng(seed, t.name).permutation(n)
        inv = np.argsort(perm)
        nt = GraphTerm(t.name, t.X[perm], t.A[np.ix_(perm, perm)], inv[t.normals], inv[t.anomalies], inv[t.pairs])
        new_terms.append(nt)
        new_entries.append(EntrySpec(graph=e.graph, idx=inv[e.idx]))
    moved = loss_and_grad(params, new_terms, new_entries, att, 0.2, 0.01, need_grad=False)[0]
    assert moved == pytest.approx(base, rel=1e-10, abs=1e-10)


# fit and checkpoints


def test_zero_lr_keeps_parameters(tiny_suite):
    train, _, _ = tiny_suite
    cfg = TINY.replace(lr=0.0, epochs=4)
    ck = fit(train, cfg)
    ref = fit(train, cfg.replace(epochs=0))
    assert ck.params.flat().tobytes() == ref.params.flat().tobytes()
    assert len(ck.loss_history) == 4


def test_fit_is_deterministic(tiny_suite, tiny_checkpoint):
    train, _, _ = tiny_suite
    assert fit(train, TINY).to_bytes() == tiny_checkpoint.to_bytes()


def test_fit_needs_both_classes(tiny_suite):
    g = tiny_suite[0][0]
    with pytest.raises(InvalidArgumentError):
        fit([g.with_(labels=np.zeros(g.n, dtype=np.int8))], TINY)
    with pytest.raises(InvalidArgumentError):
        fit([g, g], TINY)


def test_checkpoint_round_trip(tmp_path, tiny_suite, tiny_checkpoint):
    save_checkpoint(tiny_checkpoint, tmp_path / "m.owlm")
    back = load_checkpoint(tmp_path / "m.owlm")
    assert back.to_bytes() == tiny_checkpoint.to_bytes()
    g = tiny_suite[1][0]
    a = zero_shot_score(tiny_checkpoint, g, 3).scores
    b = zero_shot_score(back, g, 3).scores
    assert a.tobytes() == b.tobytes()


def test_checkpoint_bad_magic(tiny_checkpoint):
    data = b"XXXX" + tiny_checkpoint.to_bytes()[4:]
    with pytest.raises(FormatError) as exc:
        checkpoint_from_bytes(data)
    assert exc.value.offset == 0


@pytest.mark.parametrize("cut", [5, 40, -10])
def test_checkpoint_truncated(tiny_checkpoint, cut):
    with pytest.raises(FormatError):
        checkpoint_from_bytes(tiny_checkpoint.to_bytes()[:cut])


def test_default_lr_loss_decreases():
    decreased = 0
    for seed in range(5):
        train, _, _ = make_suite(seed)
        h = fit(train, RunConfig(d=32, n_sup=64, epochs=20, seed=seed)).loss_history
        assert np.all(np.isfinite(h))
        decreased += h[-1] < h[0]
    assert decreased >= 4


# finetune


def test_finetune_needs_an_anomaly(tiny_suite, tiny_checkpoint):
    g = tiny_suite[1][0]
    normals = np.flatnonzero(g.labels == 0)[:10]
    with pytest.raises(InvalidArgumentError):
        finetune(tiny_checkpoint, g, normals)


def test_finetune_zero_epochs_only_adds_entry(tiny_suite, tiny_checkpoint):
    g = tiny_suite[1][0]
    shots = sample_shots(g.labels, 5, 2, make_rng(0))
    out = finetune(tiny_checkpoint, g, shots, epochs=0)
    assert out.params.flat().tobytes() == tiny_checkpoint.params.flat().tobytes()
    assert len(out.dictionary) == len(tiny_checkpoint.dictionary) + 1
    assert out.dictionary.entries[-1].graph_id == g.name


def test_finetune_is_deterministic_and_changes_scores(tiny_suite, tiny_checkpoint):
    g = tiny_suite[1][0]
    shots = sample_shots(g.labels, 5, 2, make_rng(1))
    a = finetune(tiny_checkpoint, g, shots, epochs=2, seed=4)
    b = finetune(tiny_checkpoint, g, shots, epochs=2, seed=4)
    assert a.to_bytes() == b.to_bytes()
    before = zero_shot_score(tiny_checkpoint, g, 0).scores
    after = zero_shot_score(a, g, 0).scores
    assert not np.array_equal(before, after)


def test_sample_shots_errors():
    with pytest.raises(InvalidArgumentError):
        sample_shots(np.array([0, 0, 1]), 1, 2, make_rng(0))
