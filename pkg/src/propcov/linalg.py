"""Small dense linear algebra helpers.

Matrices are plain ``numpy`` arrays.  The validators here enforce the
conventions used throughout the package: symmetric inputs are checked and
symmetrized, triangular factors carry exact zeros in the other triangle, and
positive definiteness is judged by the Cholesky pivots.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, SingularMatrix

# relative thresholds, see as_symmetric / cholesky_lower
SYMMETRY_RTOL = 1e-9
PIVOT_RTOL = 1e-12


def _square(M: ArrayLike, name: str = "matrix") -> NDArray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_symmetric(M: ArrayLike) -> NDArray:
    """Return ``M`` as an exactly symmetric float array.

    Asymmetry up to ``1e-9 * max|M|`` (parser round-off) is removed by
    averaging with the transpose; anything larger is rejected.
    """
    M = _square(M, "symmetric matrix")
    scale = np.max(np.abs(M))
    asym = np.max(np.abs(M - M.T))
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return 0.5 * (M + M.T)


def as_lower(L: ArrayLike) -> NDArray:
    L = _square(L, "lower triangular matrix")
    if np.any(np.triu(L, 1) != 0.0):
        raise ValueError("entries above the diagonal must be zero")
    return L


def as_upper(U: ArrayLike) -> NDArray:
    U = _square(U, "upper triangular matrix")
    if np.any(np.tril(U, -1) != 0.0):
        raise ValueError("entries below the diagonal must be zero")
    return U


def cholesky_lower(M: ArrayLike) -> NDArray:
    """Lower Cholesky factor ``A`` with ``A @ A.T == M`` and positive diagonal.

    Raises
    ------
    NotPositiveDefinite
        If a pivot ``a_ii**2`` is at most ``1e-12 * max(diag(M))``.
    """
    M = as_symmetric(M)
    try:
        A = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    threshold = PIVOT_RTOL * np.max(np.diag(M))
    if threshold <= 0.0 or np.min(np.diag(A)) ** 2 <= threshold:
        raise NotPositiveDefinite("matrix is not positive definite (vanishing pivot)")
    return np.tril(A)


def invert_lower_triangular(L: ArrayLike) -> NDArray:
    L = as_lower(L)
    d = np.abs(np.diag(L))
    if np.min(d) <= np.finfo(float).eps * np.max(d):
        raise SingularMatrix("triangular matrix has a (numerically) zero diagonal entry")
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return np.tril(Linv)


def sym_inverse(M: ArrayLike) -> NDArray:
    """Inverse of a symmetric positive definite matrix via its Cholesky factor."""
    Ainv = invert_lower_triangular(cholesky_lower(M))
    inv = Ainv.T @ Ainv
    return 0.5 * (inv + inv.T)


def log_det_spd(M: ArrayLike) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(cholesky_lower(M)))))


def trace_of_product(M: ArrayLike, N: ArrayLike) -> float:
    """``tr(M @ N)`` without forming the product."""
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    if M.ndim != 2 or M.shape != N.T.shape:
        raise DimensionMismatch(f"incompatible shapes {M.shape} and {N.shape}")
    return float(np.sum(M * N.T))
