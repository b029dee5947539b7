import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from owleye.errors import InvalidArgumentError, NumericalError
from owleye.numerics import (finite_diff_grad, gaussian_random_projection, make_rng, masked_softmax,
                             pca_fit_transform)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_rng_streams_are_reproducible_and_independent():
    a = make_rng(3, "x", 1).random(5)
    assert np.array_equal(a, make_rng(3, "x", 1).random(5))
    assert not np.array_equal(a, make_rng(3, "x", 2).random(5))
    assert not np.array_equal(a, make_rng(4, "x", 1).random(5))


@pytest.mark.parametrize("seed", [-1, None])
def test_rng_rejects_bad_seed(seed):
    with pytest.raises(InvalidArgumentError):
        make_rng(seed)


# PCA


def test_pca_identical_rows_give_zeros():
    Z = pca_fit_transform(np.tile([7.0, -1.0], (3, 1)), 1)
    assert np.array_equal(Z, np.zeros((3, 1)))


def test_pca_collinear_points():
    Z = pca_fit_transform([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], 1)
    # largest-magnitude loading non-negative fixes the sign: (1,1)/sqrt2
    np.testing.assert_allclose(Z[:, 0], [-np.sqrt(2), 0.0, np.sqrt(2)], atol=1e-12)


def _svd_oracle(X, d):
    Xc = X - X.mean(axis=0)
    _, s, _ = np.linalg.svd(Xc, full_matrices=False)
    return (s**2 / (X.shape[0] - 1))[:d]


@pytest.mark.parametrize("seed", range(5))
def test_pca_variances_match_eigen_oracle(seed):
    X = make_rng(seed, "t").standard_normal((5, 4))
    Z = pca_fit_transform(X, 2)
    np.testing.assert_allclose(Z.var(axis=0, ddof=1), _svd_oracle(X, 2), rtol=1e-10)


@pytest.mark.parametrize("n,p,d", [(20, 6, 6), (6, 20, 4), (30, 5, 3)])
def test_pca_full_rank_preserves_distances_when_square(n, p, d):
    X = make_rng(n * p, "t").standard_normal((n, p))
    Z = pca_fit_transform(X, d)
    np.testing.assert_allclose(Z.var(axis=0, ddof=1), _svd_oracle(X, d), rtol=1e-9)
    if d == p:
        dx = np.linalg.norm(X[:, None] - X[None], axis=-1)
        dz = np.linalg.norm(Z[:, None] - Z[None], axis=-1)
        np.testing.assert_allclose(dz, dx, atol=1e-9)


def test_pca_pads_missing_directions_with_zeros():
    X = make_rng(0, "t").standard_normal((4, 10))
    Z = pca_fit_transform(X, 6)
    # 4 centred rows span at most 3 directions
    assert np.array_equal(Z[:, 3:], np.zeros((4, 3)))


def test_pca_low_dimensional_input_uses_random_projection():
    X = make_rng(1, "t").standard_normal((40, 3))
    Z1 = pca_fit_transform(X, 8, make_rng(5, "p"))
    Z2 = pca_fit_transform(X, 8, make_rng(5, "p"))
    assert Z1.shape == (40, 8)
    assert np.array_equal(Z1, Z2)
    assert np.abs(Z1[:, 3:]).max() < 1e-9


@pytest.mark.parametrize("n,d", [(0, 2), (3, 0)])
def test_pca_rejects_empty(n, d):
    with pytest.raises(InvalidArgumentError):
        pca_fit_transform(np.zeros((n, 3)), d)


def test_random_projection_scale():
    P = gaussian_random_projection(np.eye(400), 256, make_rng(0))
    assert abs(P.var() - 1 / 256) < 1e-4


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 6)), elements=finite),
       st.integers(1, 6))
def test_pca_orthogonal_columns_and_variance_bound(X, d):
    Z = pca_fit_transform(X, d, make_rng(0))
    total = X.var(axis=0, ddof=1).sum() if X.shape[1] >= d else None
    scale = max(1.0, float(np.abs(X).max()) ** 2) * X.shape[0]
    G = Z.T @ Z
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() <= 1e-8 * scale
    if total is not None:
        assert Z.var(axis=0, ddof=1).sum() <= total * (1 + 1e-8) + 1e-9 * scale
        if d >= min(X.shape[0] - 1, X.shape[1]):
            assert Z.var(axis=0, ddof=1).sum() == pytest.approx(total, rel=1e-8, abs=1e-9 * scale)


# masked softmax


def test_softmax_analytic_row():
    np.testing.assert_allclose(masked_softmax([[0.0, np.log(2.0)]]), [[1 / 3, 2 / 3]], rtol=1e-15)


def test_softmax_mask_contract():
    out = masked_softmax(make_rng(0).standard_normal((4, 3)), [[0]] * 4)
    assert np.all(out[:, 0] == 0.0)
    np.testing.assert_allclose(out[:, 1:].sum(axis=1), 1.0, atol=1e-15)


def test_softmax_matches_direct_oracle():
    Z = make_rng(1).standard_normal((2, 4))
    out = masked_softmax(Z, [[3], [3]], temperature=0.5)
    e = np.exp(Z[:, :3] / 0.5)
    np.testing.assert_allclose(out[:, :3], e / e.sum(axis=1, keepdims=True), atol=1e-12)
    assert np.all(out[:, 3] == 0.0)


@pytest.mark.parametrize("masked,temp", [([[0, 1]], 1.0), (None, 0.0), ([[2]], 1.0)])
def test_softmax_errors(masked, temp):
    with pytest.raises(InvalidArgumentError):
        masked_softmax([[1.0, 2.0]], masked, temp)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 8)), elements=finite),
       st.data(), st.floats(1e-3, 10))
def test_softmax_rows_sum_to_one(Z, data, temp):
    M = data.draw(arrays(bool, Z.shape))
    M[np.arange(Z.shape[0]), data.draw(st.integers(0, Z.shape[1] - 1))] = False
    out = masked_softmax(Z, M, temp)
    assert np.all(out[M] == 0.0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


# finite differences


def test_fd_quadratic():
    g = finite_diff_grad(lambda t: t[0] ** 2, [3.0], 1e-4)
    assert abs(g[0] - 6.0) < 1e-7


def test_fd_constant():
    assert np.array_equal(finite_diff_grad(lambda t: 4.0, np.ones(3)), np.zeros(3))


def test_fd_reports_coordinate():
    with pytest.raises(NumericalError, match="coordinate 1"):
        finite_diff_grad(lambda t: np.inf if t[1] > 0 else 0.0, [0.0, 0.0])
