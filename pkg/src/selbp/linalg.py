"""Incremental Cholesky factorization and positive-definite solves.

The Gram-OMP solver grows the active set one atom at a time, so the
factorization of the active sub-Gram matrix is maintained by appending a
bordered row instead of refactoring from scratch.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, SingularUpdate

# Pivot threshold relative to the new atom's self-inner-product.
DEFAULT_PIVOT_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Validate and return a 2-D float64 array with finite entries."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


class LowerCholesky:
    """Lower-triangular Cholesky factor of a symmetric positive-definite matrix.

    Built incrementally with :func:`cholesky_append`; the existing block is
    never touched by an append.
    """

    def __init__(self, factor=None):
        if factor is None:
            self._L = np.zeros((0, 0))
            return
        L = np.asarray(factor, dtype=np.float64)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DimensionMismatch(f"factor must be square, got shape {L.shape}")
        if not np.isfinite(L).all():
            raise ValueError("factor contains non-finite entries")
        if L.shape[0] > 0 and not (np.diag(L) > 0).all():
            raise ValueError("factor diagonal must be strictly positive")
        self._L = np.tril(L)

    @property
    def order(self):
        return self._L.shape[0]

    @property
    def factor(self):
        return self._L.copy()

    def reconstruct(self):
        """Return factor @ factor.T, the matrix that was factored."""
        return self._L @ self._L.T


def cholesky_append(chol, cross, diag, pivot_tol=DEFAULT_PIVOT_TOL):
    """Extend a Cholesky factor by one bordered row/column.

    ``cross`` holds the inner products between the new atom and the k active
    ones, ``diag`` the new atom's self-inner-product. Raises
    :class:`SingularUpdate` when the new pivot falls below
    ``pivot_tol * diag``, which signals a (near-)duplicate atom.
    """
    L = chol._L
    k = chol.order
    cross = np.asarray(cross, dtype=np.float64).reshape(-1)
    if cross.shape[0] != k:
        raise DimensionMismatch(f"cross has length {cross.shape[0]}, expected {k}")
    diag = float(diag)

    if k == 0:
        if diag <= 0.0 or diag <= pivot_tol * diag:
            raise SingularUpdate(f"non-positive leading pivot {diag!r}")
        return LowerCholesky(np.array([[np.sqrt(diag)]]))

    w = solve_triangular(L, cross, lower=True)
    pivot = diag - float(w @ w)
    if pivot <= pivot_tol * diag:
        raise SingularUpdate(
            f"pivot {pivot:.3e} below tolerance {pivot_tol * diag:.3e} at order {k}"
        )

    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = L
    out[k, :k] = w
    out[k, k] = np.sqrt(pivot)
    new = LowerCholesky.__new__(LowerCholesky)
    new._L = out
    return new


def solve_posdef(chol, rhs):
    """Solve (factor @ factor.T) x = rhs by forward and backward substitution."""
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    if rhs.shape[0] != chol.order:
        raise DimensionMismatch(
            f"rhs has length {rhs.shape[0]}, expected {chol.order}"
        )
    if chol.order == 0:
        return np.zeros(0)
    y = solve_triangular(chol._L, rhs, lower=True)
    return solve_triangular(chol._L.T, y, lower=False)
