"""Orthogonal matching pursuit, Gram-matrix variant.

``omp_gram`` runs entirely on inner products: the Gram matrix K = A^T A of
the atoms and the correlation vector t = A^T b with the target. It maintains
a Cholesky factorization of the active sub-Gram matrix, extended by one row
per selected atom. ``omp_dense_oracle`` is the textbook implementation on
explicit vectors, used as the reference in tests.

The greedy step picks the raw (signed) maximum correlation; set
``abs_correlation`` for the usual absolute-value criterion.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptySelection, SingularUpdate
from .linalg import DEFAULT_PIVOT_TOL, LowerCholesky, cholesky_append, solve_posdef


@dataclass(frozen=True)
class Selection:
    """An ordered set of minibatch indices with aligned per-example weights."""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if idx.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"{idx.shape[0]} indices but {w.shape[0]} weights"
            )
        if idx.shape[0] == 0:
            raise EmptySelection("a Selection must contain at least one index")
        if len(np.unique(idx)) != idx.shape[0]:
            raise ValueError("selection indices must be distinct")
        if (idx < 0).any():
            raise ValueError("selection indices must be non-negative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.indices.shape[0]


@dataclass(frozen=True)
class OmpConfig:
    max_atoms: int
    residual_tol: float = 0.0
    pivot_tol: float = DEFAULT_PIVOT_TOL
    abs_correlation: bool = False

    def __post_init__(self):
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be >= 1")
        if self.residual_tol < 0 or self.pivot_tol < 0:
            raise ValueError("tolerances must be >= 0")


def omp_gram(K, t, cfg):
    """Greedy sparse approximation of the target given only inner products.

    Returns the raw selection (unnormalized weights; may hold fewer than
    ``max_atoms`` atoms when correlations are exhausted or an append turns
    singular). Raises :class:`EmptySelection` when no atom correlates with
    the target above ``residual_tol``.
    """
    K = np.asarray(K, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    M = t.shape[0]
    if K.shape != (M, M):
        raise DimensionMismatch(f"K has shape {K.shape}, expected ({M}, {M})")
    if cfg.max_atoms > M:
        raise DimensionMismatch(f"max_atoms {cfg.max_atoms} exceeds batch size {M}")

    alpha = t.copy()
    available = np.ones(M, dtype=bool)
    indices = []
    gamma = np.zeros(0)
    chol = LowerCholesky()

    while len(indices) < cfg.max_atoms:
        score = np.abs(alpha) if cfg.abs_correlation else alpha
        masked = np.where(available, score, -np.inf)
        k = int(np.argmax(masked))  # ties break toward the lowest index
        if masked[k] <= cfg.residual_tol:
            if not indices:
                raise EmptySelection("no atom correlates with the target")
            break
        try:
            chol = cholesky_append(chol, K[indices, k], K[k, k], cfg.pivot_tol)
        except SingularUpdate:
            break
        indices.append(k)
        available[k] = False
        gamma = solve_posdef(chol, t[indices])
        alpha = t - K[:, indices] @ gamma

    return Selection(np.array(indices), gamma)


def omp_dense_oracle(atoms, target, m, residual_tol=0.0, abs_correlation=False):
    """Textbook OMP on explicit atom vectors (rows of ``atoms``).

    Reference implementation for tests: greedy residual-correlation selection
    with a full least-squares refit after every addition.
    """
    A = np.asarray(atoms, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64).reshape(-1)
    M = A.shape[0]
    if A.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"atoms have width {A.shape[1]} but target has length {b.shape[0]}"
        )
    if m > M:
        raise DimensionMismatch(f"m {m} exceeds number of atoms {M}")

    resid = b.copy()
    available = np.ones(M, dtype=bool)
    indices = []
    gamma = np.zeros(0)

    while len(indices) < m:
        corr = A @ resid
        score = np.abs(corr) if abs_correlation else corr
        masked = np.where(available, score, -np.inf)
        k = int(np.argmax(masked))
        if masked[k] <= residual_tol:
            if not indices:
                raise EmptySelection("no atom correlates with the target")
            break
        indices.append(k)
        available[k] = False
        gamma, *_ = np.linalg.lstsq(A[indices].T, b, rcond=None)
        resid = b - A[indices].T @ gamma

    return Selection(np.array(indices), gamma)


def residual_norm_sq(K, t, t0, sel):
    """Matching objective ||sum_i gamma_i g_i - gbar||^2 from inner products.

    ``t0`` is ||gbar||^2, obtainable as the mean of t when t stems from
    :func:`selbp.gram.mean_correlations`.
    """
    K = np.asarray(K, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    idx = sel.indices
    g = sel.weights
    quad = g @ K[np.ix_(idx, idx)] @ g
    return float(quad - 2.0 * (g @ t[idx]) + t0)
