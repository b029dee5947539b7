"""Dense float64 kernels: seeded RNG streams, PCA, random projection,
masked softmax and a central-difference gradient checker.

Randomness
----------
Every random draw in the package comes from :func:`make_rng`, which wraps
numpy's PCG64 bit generator.  A run is identified by one integer seed; each
pipeline step draws from its own stream, keyed by ``(seed, *keys)`` through
``numpy.random.SeedSequence``.  String keys are mapped to integers with
CRC-32, so adding a new step (a new key) never perturbs the streams used by
existing steps.
"""

import zlib

import numpy as np

from .errors import InvalidArgumentError, NumericalError

#: Output width of the random projection applied when a graph has fewer raw
#: features than the target dimension.
RANDOM_PROJECTION_DIM = 256


def _stream_key(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise InvalidArgumentError(f"stream keys must be non-negative, got {key}")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def make_rng(seed, *keys):
    """Return a PCG64 generator for stream ``keys`` under ``seed``.

    >>> a = make_rng(7, "train").random()
    >>> b = make_rng(7, "train").random()
    >>> a == b
    True
    """
    if seed is None or int(seed) < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_stream_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(rng):
    """Draw a 63-bit integer seed from ``rng`` (for handing to sub-steps)."""
    return int(rng.integers(0, 2**63 - 1))


def as_matrix(x, name="matrix"):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def gaussian_random_projection(X, out_dim, rng):
    """Project the columns of ``X`` to ``out_dim`` with i.i.d. N(0, 1/out_dim) entries."""
    X = as_matrix(X, "X")
    if out_dim < 1:
        raise InvalidArgumentError("out_dim must be >= 1")
    P = rng.standard_normal((X.shape[1], out_dim)) / np.sqrt(out_dim)
    return X @ P


def _fix_signs(V):
    # largest-magnitude loading of each component made non-negative
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def principal_axes(Xc, n_components):
    """Top principal axes of an already centred matrix.

    Returns ``(eigenvalues, V)`` where ``V`` is ``p x n_components``.
    Components with numerically zero variance come back as zero columns
    with zero eigenvalue.
    """
    n, p = Xc.shape
    denom = max(n - 1, 1)
    tol_scale = max(n, p) * np.finfo(np.float64).eps
    if p <= n:
        C = (Xc.T @ Xc) / denom
        C = 0.5 * (C + C.T)
        w, V = np.linalg.eigh(C)
        order = np.argsort(-w, kind="stable")
        w, V = w[order], V[:, order]
    else:
        G = Xc @ Xc.T
        G = 0.5 * (G + G.T)
        w, U = np.linalg.eigh(G)
        order = np.argsort(-w, kind="stable")
        w, U = w[order], U[:, order]
        keep = w > (w[0] if w.size else 0.0) * tol_scale
        V = np.zeros((p, w.size))
        V[:, keep] = (Xc.T @ U[:, keep]) / np.sqrt(w[keep])
        w = w / denom
    top = w[0] if w.size else 0.0
    zero = ~(w > max(top, 0.0) * tol_scale) | (top <= 0.0)
    w = np.where(zero, 0.0, w)
    V = np.where(zero[None, :], 0.0, V)

    k = min(n_components, V.shape[1])
    w_out = np.zeros(n_components)
    V_out = np.zeros((p, n_components))
    w_out[:k] = w[:k]
    V_out[:, :k] = _fix_signs(V[:, :k])
    return w_out, V_out


def pca_fit_transform(X, target_dim, rng=None):
    """Project rows of ``X`` onto its top ``target_dim`` principal components.

    Covariance PCA on the column-centred matrix.  When ``X`` has fewer
    columns than ``target_dim`` it is first sent through a seeded Gaussian
    random projection to ``max(p, 256)`` columns; directions without
    variance are returned as zero columns.

    Parameters
    ----------
    X : array_like, shape (n, p)
    target_dim : int
    rng : numpy.random.Generator, optional
        Only consumed by the random projection branch.

    Returns
    -------
    ndarray, shape (n, target_dim)
    """
    X = as_matrix(X, "X")
    n, p = X.shape
    if n == 0 or target_dim < 1:
        raise InvalidArgumentError(f"need n >= 1 and target_dim >= 1, got n={n}, d={target_dim}")
    if p < target_dim:
        if rng is None:
            raise InvalidArgumentError("an rng is required when p < target_dim")
        X = gaussian_random_projection(X, max(p, RANDOM_PROJECTION_DIM), rng)
    Xc = X - X.mean(axis=0)
    w, V = principal_axes(Xc, target_dim)
    Z = Xc @ V
    Z[:, w == 0.0] = 0.0
    return Z


def masked_softmax(logits, masked=None, temperature=1.0):
    """Row-wise softmax of ``logits / temperature`` with masked entries forced to 0.

    ``masked`` is either a boolean array shaped like ``logits`` or a
    sequence (one per row) of column index collections.
    """
    Z = as_matrix(logits, "logits")
    if not temperature > 0:
        raise InvalidArgumentError(f"temperature must be positive, got {temperature}")
    r, c = Z.shape
    if masked is None:
        M = np.zeros((r, c), dtype=bool)
    elif isinstance(masked, np.ndarray) and masked.dtype == bool:
        if masked.shape != Z.shape:
            raise InvalidArgumentError(f"mask shape {masked.shape} != logits shape {Z.shape}")
        M = masked
    else:
        if len(masked) != r:
            raise InvalidArgumentError(f"expected {r} mask rows, got {len(masked)}")
        M = np.zeros((r, c), dtype=bool)
        for i, cols in enumerate(masked):
            cols = list(cols)
            if any(j < 0 or j >= c for j in cols):
                raise InvalidArgumentError(f"mask index out of range in row {i}")
            M[i, cols] = True
    if c == 0 or M.all(axis=1).any():
        raise InvalidArgumentError("every row needs at least one unmasked entry")
    U = np.where(M, -np.inf, Z / temperature)
    U = U - U.max(axis=1, keepdims=True)
    E = np.exp(U)
    E[M] = 0.0
    return E / E.sum(axis=1, keepdims=True)


def finite_diff_grad(loss_fn, params, step=1e-4):
    """Central-difference gradient of a scalar function of a flat vector."""
    theta = np.array(params, dtype=np.float64).ravel()
    if not step > 0:
        raise InvalidArgumentError("step must be positive")
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        up = float(loss_fn(theta.copy()))
        theta[i] = orig - step
        down = float(loss_fn(theta.copy()))
        theta[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericalError(f"non-finite loss when probing coordinate {i}")
        grad[i] = (up - down) / (2.0 * step)
    return grad
