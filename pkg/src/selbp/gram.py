"""Gram matrix of last-layer gradients, computed implicitly from the forward pass.

For a linear output layer with weight W (C x D) and bias b, the gradient of
example i's loss w.r.t. (W, b) is (p_i h_i^T, p_i), where h_i is the layer
input and p_i the gradient w.r.t. the model output. The pairwise inner
products of these flattened gradients satisfy

    K_ij = (h_i^T h_j)(p_i^T p_j) + p_i^T p_j,

so the full M x M Gram matrix is K = HH^T o PP^T + PP^T with o the
elementwise product. ``gram_explicit`` materializes the flattened gradients
and serves as the brute-force oracle for ``gram_implicit``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class BatchTape:
    """Forward-pass byproducts for one minibatch.

    H: (M, D) inputs to the last linear layer.
    P: (M, C) per-example loss gradients w.r.t. the model outputs.
    losses: (M,) per-example loss values.
    """

    H: np.ndarray
    P: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64)
        P = np.asarray(self.P, dtype=np.float64)
        losses = np.asarray(self.losses, dtype=np.float64)
        if H.ndim != 2 or P.ndim != 2 or losses.ndim != 1:
            raise DimensionMismatch("H and P must be 2-D, losses 1-D")
        if not (H.shape[0] == P.shape[0] == losses.shape[0]):
            raise DimensionMismatch(
                f"row counts disagree: H {H.shape[0]}, P {P.shape[0]}, "
                f"losses {losses.shape[0]}"
            )
        for name, a in (("H", H), ("P", P), ("losses", losses)):
            if not np.isfinite(a).all():
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "losses", losses)

    @property
    def M(self):
        return self.H.shape[0]

    @property
    def D(self):
        return self.H.shape[1]

    @property
    def C(self):
        return self.P.shape[1]


def _symmetrize(raw):
    # Mirror the computed upper triangle so K_ij == K_ji exactly.
    upper = np.triu(raw)
    return upper + upper.T - np.diag(np.diag(raw))


def gram_implicit(tape, with_bias=True):
    """Gram matrix of last-layer gradients without forming them.

    With ``with_bias`` the bias-gradient term PP^T is included (a last layer
    with a bias vector); without it only the elementwise product remains.
    """
    PPt = tape.P @ tape.P.T
    HHt = tape.H @ tape.H.T
    raw = HHt * PPt + PPt if with_bias else HHt * PPt
    return _symmetrize(raw)


def explicit_gradients(tape, with_bias=True):
    """Flattened last-layer gradients [vec(p_i h_i^T); p_i], one row per example."""
    M = tape.M
    outer = np.einsum("mc,md->mcd", tape.P, tape.H).reshape(M, -1)
    if with_bias:
        return np.concatenate([outer, tape.P], axis=1)
    return outer


def gram_explicit(tape, with_bias=True):
    """Brute-force Gram matrix from explicitly materialized gradients."""
    V = explicit_gradients(tape, with_bias=with_bias)
    return _symmetrize(V @ V.T)


def mean_correlations(K):
    """Row means of K, i.e. the inner products of each gradient with the mean."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionMismatch(f"K must be square, got shape {K.shape}")
    return K.mean(axis=1)
