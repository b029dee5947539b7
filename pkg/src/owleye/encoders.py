"""Attribute- and structure-channel GCN encoders.

Both channels run the same stack ``H_t = relu(A_hat @ H_{t-1} @ W_t)`` for
``t = 1..L`` and emit the residual concatenation
``[H_2 - H_1, ..., H_L - H_1]`` of width ``(L - 1) * d``.  The attribute
channel starts from the aligned features, the structure channel from an
all-ones matrix.

Each forward function can return a cache consumed by the matching
``*_backward`` function, which is how the training loop gets exact
gradients.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

ATTENTION_NAMES = ("W1", "WQ_H", "WK_H", "WQ_R", "WK_R")


@dataclass
class EncoderParams:
    """All learnable matrices.

    ``W1_H`` is only allocated when the attribute channel gets its own
    similarity weight (``similarity_channel = "per_channel"``).
    """

    W_attr: list
    W_struc: list
    W1: np.ndarray = field(repr=False)
    WQ_H: np.ndarray = field(repr=False)
    WK_H: np.ndarray = field(repr=False)
    WQ_R: np.ndarray = field(repr=False)
    WK_R: np.ndarray = field(repr=False)
    W1_H: np.ndarray = field(default=None, repr=False)

    @property
    def L(self):
        return len(self.W_attr)

    @property
    def d(self):
        return self.W_attr[0].shape[0]

    @property
    def D_emb(self):
        return (self.L - 1) * self.d

    def named(self):
        """Ordered ``name -> array`` view (arrays are shared, not copied)."""
        out = {}
        for t, W in enumerate(self.W_attr):
            out[f"W_attr.{t}"] = W
        for t, W in enumerate(self.W_struc):
            out[f"W_struc.{t}"] = W
        for name in ATTENTION_NAMES:
            out[name] = getattr(self, name)
        if self.W1_H is not None:
            out["W1_H"] = self.W1_H
        return out

    @classmethod
    def from_named(cls, mats):
        L = sum(1 for k in mats if k.startswith("W_attr."))
        return cls(
            W_attr=[np.array(mats[f"W_attr.{t}"], dtype=np.float64) for t in range(L)],
            W_struc=[np.array(mats[f"W_struc.{t}"], dtype=np.float64) for t in range(L)],
            W1_H=None if "W1_H" not in mats else np.array(mats["W1_H"], dtype=np.float64),
            **{k: np.array(mats[k], dtype=np.float64) for k in ATTENTION_NAMES},
        )

    def copy(self):
        return EncoderParams.from_named({k: v.copy() for k, v in self.named().items()})

    def flat(self):
        return np.concatenate([W.ravel() for W in self.named().values()])

    def with_flat(self, theta):
        out, pos = {}, 0
        for k, W in self.named().items():
            out[k] = np.asarray(theta[pos:pos + W.size]).reshape(W.shape)
            pos += W.size
        return EncoderParams.from_named(out)


def _glorot(rng, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(L, d, rng, per_channel_similarity=False):
    """Glorot-uniform initialisation of every matrix."""
    if L < 2:
        raise InvalidArgumentError(f"need at least 2 layers, got {L}")
    if d < 1:
        raise InvalidArgumentError(f"layer width must be >= 1, got {d}")
    D = (L - 1) * d
    W_attr = [_glorot(rng, d, d) for _ in range(L)]
    W_struc = [_glorot(rng, d, d) for _ in range(L)]
    att = {name: _glorot(rng, D, D) for name in ATTENTION_NAMES}
    W1_H = _glorot(rng, D, D) if per_channel_similarity else None
    return EncoderParams(W_attr=W_attr, W_struc=W_struc, W1_H=W1_H, **att)


def gcn_forward(A, X0, Ws, keep_cache=False):
    """Residual multi-hop GCN; returns ``(E, cache)``."""
    A = A.values if hasattr(A, "values") else A
    if X0.shape[1] != Ws[0].shape[0]:
        raise InvalidArgumentError(f"input width {X0.shape[1]} != layer width {Ws[0].shape[0]}")
    if A.shape[0] != X0.shape[0]:
        raise InvalidArgumentError(f"adjacency is {A.shape[0]}x{A.shape[0]} but input has {X0.shape[0]} rows")
    H = X0
    prop, pre, outs = [], [], []
    for W in Ws:
        AH = A @ H
        Z = AH @ W
        H = np.maximum(Z, 0.0)
        prop.append(AH)
        pre.append(Z)
        outs.append(H)
    E = np.concatenate([Ht - outs[0] for Ht in outs[1:]], axis=1)
    cache = (A, prop, pre) if keep_cache else None
    return E, cache


def gcn_backward(cache, Ws, dE):
    """Gradients of the layer weights given ``dE = dLoss/dE``."""
    A, prop, pre = cache
    L = len(Ws)
    d = Ws[0].shape[1]
    dH = [None] * L
    dH[0] = np.zeros_like(pre[0])
    for t in range(1, L):
        block = dE[:, (t - 1) * d:t * d]
        dH[t] = block.copy()
        dH[0] -= block
    dWs = [None] * L
    for t in range(L - 1, -1, -1):
        dZ = dH[t] * (pre[t] > 0)
        dWs[t] = prop[t].T @ dZ
        if t > 0:
            # A_hat is symmetric
            dH[t - 1] = dH[t - 1] + A.T @ (dZ @ Ws[t].T)
    return dWs


def encode_attribute(X_tilde, A_hat, params, keep_cache=False):
    """Attribute embedding ``H`` (n x (L-1)d).  Returns ``(H, cache)`` if ``keep_cache``."""
    H, cache = gcn_forward(A_hat, np.asarray(X_tilde, dtype=np.float64), params.W_attr, keep_cache)
    return (H, cache) if keep_cache else H


def encode_structure(n, A_hat, params, keep_cache=False):
    """Structure embedding ``R`` computed from an all-ones input."""
    ones = np.ones((n, params.d))
    R, cache = gcn_forward(A_hat, ones, params.W_struc, keep_cache)
    return (R, cache) if keep_cache else R


@dataclass
class Embeddings:
    H: np.ndarray
    R: np.ndarray

    @property
    def n(self):
        return self.H.shape[0]


def encode(X_tilde, A_hat, params):
    return Embeddings(encode_attribute(X_tilde, A_hat, params),
                      encode_structure(X_tilde.shape[0], A_hat, params))
