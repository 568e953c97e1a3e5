"""Information matrix and asymptotic covariances of the proportional model MLE.

Every matrix here is expressed per unit of total degrees of freedom ``n_+``:
``sqrt(n_+) (theta_hat - theta)`` is asymptotically normal with covariance
``V``, so the standard error of a component is ``sqrt(V_jj / n_+)``.

Parameter vectors are ordered ``(c_2, ..., c_K)`` followed by the column
blocks of the matrix parameter (see :mod:`propcov.model`).  Three
parametrizations are available, tagged ``"b"`` (Cholesky inverse root),
``"a"`` (Cholesky root) and ``"sigma"`` (covariance).

Block indices ``i``/``j`` in the closed forms are 1-based, like the helpers in
:mod:`propcov.notation`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import block_diag

from .errors import DimensionMismatch, KTooSmall, NotPositiveSemidefinite
from .model import (
    CholInvParam,
    CholRootParam,
    CovParam,
    Kind,
    ParamIndexMap,
    as_coefficients,
    b_from_a,
    check_weights,
    convert,
    n_free,
)
from .notation import col_head, col_tail, corner, leading, row_tail, selector, trailing, unit

# Closed forms that must each be paired with an independent check in
# propcov.oracle.CHECKS (the test suite enforces the pairing).
CLOSED_FORMS = (
    "information_cb",
    "i22_block_inverse",
    "u11",
    "v11",
    "v12_cb",
    "v22_cb",
    "jacobian_a_wrt_b",
    "v12_ca",
    "v22_ca",
    "jacobian_sigma_wrt_a",
    "v12_csigma",
    "v22_csigma",
    "inverse_root_identities",
    "sigma_column_identities",
    "sigma_block_identities",
)


@dataclass(frozen=True)
class InfoMatrix:
    matrix: NDArray
    index_map: ParamIndexMap


@dataclass(frozen=True)
class AsymptoticCov:
    matrix: NDArray
    index_map: ParamIndexMap
    tag: str

    @property
    def v11(self) -> NDArray:
        s = self.index_map.coef_slice
        return self.matrix[s, s]


def _require_k2(c):
    if c.size < 2:
        raise KTooSmall("the coefficient block needs at least two groups")


def de_coefficients(r1: float, p: int) -> tuple[float, float]:
    """The scalars ``d`` and ``e`` of the ``B``-block covariance."""
    d = (1.0 - (1.0 + p) * r1) / (2.0 * p * r1)
    e = (1.0 - r1) / (2.0 * p * r1)
    return d, e


def _prep(c, weights):
    c = as_coefficients(c)
    r = check_weights(weights, c.size)
    return c, r


# -- information --------------------------------------------------------

def information_cb(params: CholRootParam, weights) -> InfoMatrix:
    """Expected information per unit ``n_+`` for ``(c_2..c_K, B)``."""
    c, r = _prep(params.c, weights)
    A = params.A
    p, K = A.shape[0], c.size
    imap = ParamIndexMap(K, p, "b")
    info = np.zeros((imap.size, imap.size))
    cs = imap.coef_slice
    alpha = r[1:] / c[1:]
    info[cs, cs] = 0.5 * p * np.diag(r[1:] / c[1:] ** 2)
    for i in range(1, p + 1):
        bs = imap.block_slice(i - 1)
        aii = A[i - 1, i - 1]
        block12 = -aii * np.outer(alpha, unit(i, i))
        info[cs, bs] = block12
        info[bs, cs] = block12.T
        Ai = leading(A, i)
        info[bs, bs] = aii ** 2 * np.outer(unit(i, i), unit(i, i)) + Ai @ Ai.T
    return InfoMatrix(info, imap)


def i22_block_inverse(A, i: int) -> NDArray:
    """Inverse of the ``i``-th diagonal block of the ``B`` information."""
    B = b_from_a(A)
    Bi = leading(B, i)
    bii = col_head(B, i, i)
    return Bi @ Bi.T - 0.5 * np.outer(bii, bii)


# -- (c, B) -------------------------------------------------------------

def u11(c, weights, p: int) -> NDArray:
    """Schur complement of the ``B`` block: the information for ``c`` alone."""
    c, r = _prep(c, weights)
    _require_k2(c)
    alpha = r[1:] / c[1:]
    return 0.5 * p * (np.diag(r[1:] / c[1:] ** 2) - np.outer(alpha, alpha))


def v11(c, weights, p: int) -> NDArray:
    """Asymptotic covariance of ``c_hat``; the same in every parametrization."""
    c, r = _prep(c, weights)
    _require_k2(c)
    cf = c[1:]
    return (2.0 / p) * (np.diag(cf ** 2 / r[1:]) + np.outer(cf, cf) / r[0])


def v12_cb(c, B, weights) -> NDArray:
    c, r = _prep(c, weights)
    _require_k2(c)
    p = B.shape[0]
    cf = c[1:]
    return np.hstack([np.outer(cf, col_head(B, i, i)) for i in range(1, p + 1)]) / (p * r[0])


def v22_cb(B, weights) -> NDArray:
    r = check_weights(weights)
    p = B.shape[0]
    d, e = de_coefficients(r[0], p)
    blocks = [[None] * p for _ in range(p)]
    for i in range(1, p + 1):
        bi = col_head(B, i, i)
        for j in range(1, p + 1):
            bj = col_head(B, j, j)
            if i == j:
                Bi = leading(B, i)
                blocks[i - 1][j - 1] = Bi @ Bi.T + d * np.outer(bi, bi)
            else:
                blocks[i - 1][j - 1] = e * np.outer(bi, bj)
    return np.block(blocks)


# -- (c, A) -------------------------------------------------------------

def jacobian_a_wrt_b(A) -> NDArray:
    """Jacobian of the packed ``A`` with respect to the packed ``B``.

    ``d a_ji / d b_hg = -a_jg a_hi`` for ``i <= h <= g <= j``, zero otherwise.
    Rows follow the ``A`` packing, columns the ``B`` packing.
    """
    p = A.shape[0]
    rows = [(j, i) for i in range(1, p + 1) for j in range(i, p + 1)]
    cols = [(h, g) for g in range(1, p + 1) for h in range(1, g + 1)]
    J = np.zeros((len(rows), len(cols)))
    for ri, (j, i) in enumerate(rows):
        for ci, (h, g) in enumerate(cols):
            if i <= h <= g <= j:
                J[ri, ci] = -A[j - 1, g - 1] * A[h - 1, i - 1]
    return J


def v12_ca(c, A, weights) -> NDArray:
    c, r = _prep(c, weights)
    _require_k2(c)
    p = A.shape[0]
    cf = c[1:]
    return -np.hstack([np.outer(cf, col_tail(A, i, i - 1)) for i in range(1, p + 1)]) / (p * r[0])


def v22_ca(A, weights) -> NDArray:
    r = check_weights(weights)
    p = A.shape[0]
    d, e = de_coefficients(r[0], p)
    blocks = [[None] * p for _ in range(p)]
    for i in range(1, p + 1):
        ai = col_tail(A, i, i - 1)
        for j in range(1, p + 1):
            aj = col_tail(A, j, j - 1)
            if i == j:
                Ai = trailing(A, i - 1)
                blocks[i - 1][j - 1] = Ai @ Ai.T + d * np.outer(ai, ai)
            else:
                blocks[i - 1][j - 1] = e * np.outer(ai, aj)
    return np.block(blocks)


# -- (c, Sigma1) --------------------------------------------------------

def jacobian_sigma_wrt_a(A) -> NDArray:
    """Jacobian of the packed ``Sigma1 = A A^T`` with respect to the packed ``A``.

    Block ``(i, j)`` for ``j <= i`` is
    ``a_ij I_{p-j+1.i-j} + a_{j(-i+1)} 1_{p-j+1.i-j+1}^T``; blocks above the
    diagonal are zero.
    """
    p = A.shape[0]
    blocks = [[np.zeros((p - i + 1, p - j + 1)) for j in range(1, p + 1)] for i in range(1, p + 1)]
    for i in range(1, p + 1):
        for j in range(1, i + 1):
            m = p - j + 1
            blocks[i - 1][j - 1] = (A[i - 1, j - 1] * selector(m, i - j)
                                    + np.outer(col_tail(A, j, i - 1), unit(m, i - j + 1)))
    return np.block(blocks)


def v12_csigma(c, A, weights) -> NDArray:
    c, r = _prep(c, weights)
    _require_k2(c)
    S = A @ A.T
    p = S.shape[0]
    cf = c[1:]
    return -2.0 * np.hstack([np.outer(cf, col_tail(S, i, i - 1)) for i in range(1, p + 1)]) / (p * r[0])


def v22_csigma(A, weights) -> NDArray:
    r = check_weights(weights)
    S = A @ A.T
    p = S.shape[0]
    _, e = de_coefficients(r[0], p)
    blocks = [[None] * p for _ in range(p)]
    for i in range(1, p + 1):
        for j in range(i, p + 1):
            si = col_tail(S, i, i - 1)
            sj = col_tail(S, j, j - 1)
            blk = (S[i - 1, j - 1] * corner(S, i, j)
                   + 4.0 * e * np.outer(si, sj)
                   + np.outer(col_tail(S, j, i - 1), col_tail(S, i, j - 1)))
            blocks[i - 1][j - 1] = blk
            blocks[j - 1][i - 1] = blk.T
    return np.block(blocks)


# -- helper identities behind the block formulas ----------------------------
#
# Each function returns ``[(label, lhs, rhs), ...]``; they are checked
# numerically by the oracle registry.

def inverse_root_identities(A) -> list:
    """``a_{i.l}^T b_{l.l} = delta_il`` and ``a_{i.l}^T B_l = 1_{l.i}^T`` (i <= l)."""
    B = b_from_a(A)
    p = A.shape[0]
    out = []
    for i in range(1, p + 1):
        for l in range(1, p + 1):
            out.append((f"a_i.l'b_l.l i={i} l={l}", col_head(A, i, l) @ col_head(B, l, l), float(i == l)))
            if i <= l:
                out.append((f"a_i.l'B_l i={i} l={l}", col_head(A, i, l) @ leading(B, l), unit(l, i)))
    return out


def sigma_column_identities(A) -> list:
    S = A @ A.T
    p = A.shape[0]
    out = []
    for i in range(1, p + 1):
        for j in range(1, i + 1):
            aj = col_tail(A, j, j - 1)
            out.append((f"(i) i={i} j={j}", selector(p - j + 1, i - j) @ aj, col_tail(A, j, i - 1)))
            out.append((f"(ii) i={i} j={j}", aj @ unit(p - j + 1, i - j + 1), A[i - 1, j - 1]))
        rhs = sum(A[i - 1, j - 1] * col_tail(A, j, i - 1) for j in range(1, i + 1))
        out.append((f"(iii) i={i}", col_tail(S, i, i - 1), rhs))
    return out


def sigma_block_identities(A) -> list:
    S = A @ A.T
    p = A.shape[0]
    a = lambda u, v: A[u - 1, v - 1]  # noqa: E731
    col = lambda u, k: col_tail(A, u, k)  # noqa: E731  a_{u(-k)}
    out = []
    for i in range(1, p + 1):
        for j in range(i, p + 1):
            tag = f"i={i} j={j}"
            si, sj = col_tail(S, i, i - 1), col_tail(S, j, j - 1)

            rhs5 = sum(a(i, m) * a(j, l) * np.outer(col(m, i - 1), col(l, j - 1))
                       for l in range(1, j + 1) for m in range(1, i + 1))
            out.append((f"(v) {tag}", np.outer(si, sj), rhs5))

            lhs6 = np.outer(col_tail(S, j, i - 1), col_tail(S, i, j - 1))
            rhs6a = sum(a(i, m) * a(j, l) * np.outer(col(l, i - 1), col(m, j - 1))
                        for l in range(1, j + 1) for m in range(1, i + 1))
            rhs6b = (sum(a(i, m) * a(j, m) * np.outer(col(m, i - 1), col(m, j - 1))
                         for m in range(1, i + 1))
                     + sum(a(j, m) * np.outer(col(m, i - 1),
                                              sum((a(i, l) * col(l, j - 1) for l in range(m + 1, i + 1)),
                                                  np.zeros(p - j + 1)))
                           for m in range(1, i + 1))
                     + sum((a(i, m) * a(j, l) * np.outer(col(l, i - 1), col(m, j - 1))
                            for m in range(1, i + 1) for l in range(m + 1, j + 1)),
                           np.zeros((p - i + 1, p - j + 1))))
            out.append((f"(vi) first {tag}", lhs6, rhs6a))
            out.append((f"(vi) split {tag}", lhs6, rhs6b))

            lhs8 = S[i - 1, j - 1] * corner(S, i, j)
            rhs8a = (sum(a(i, m) * a(j, m) for m in range(1, i + 1))
                     * sum(np.outer(col(l, i - 1), col(l, j - 1)) for l in range(1, p + 1)))
            rhs8b = (sum(a(i, m) * a(j, m) * corner(A, i, m) @ corner(A, j, m).T for m in range(1, i + 1))
                     + sum((sum(a(i, m) * a(j, m) for m in range(l + 1, i + 1))
                            * np.outer(col(l, i - 1), col(l, j - 1)) for l in range(1, i)),
                           np.zeros((p - i + 1, p - j + 1))))
            out.append((f"(viii) product {tag}", lhs8, rhs8a))
            out.append((f"(viii) split {tag}", lhs8, rhs8b))

            for m in range(1, i + 1):
                tm = f"{tag} m={m}"
                Am = trailing(A, m - 1)
                out.append((f"(i) {tm}", unit(p - m + 1, i - m + 1) @ Am, row_tail(A, i, m - 1)))
                out.append((f"(ii) {tm}", selector(p - m + 1, i - m) @ Am, corner(A, i, m)))
                out.append((f"(iii) {tm}", row_tail(A, i, m - 1) @ corner(A, j, m).T,
                            sum(a(i, u) * col(u, j - 1) for u in range(m, i + 1))))
                out.append((f"(iv) {tm}", row_tail(A, i, m - 1) @ row_tail(A, j, m - 1),
                            sum(a(i, u) * a(j, u) for u in range(m, i + 1))))
                rhs7 = (sum((np.outer(col(u, i - 1), col(u, j - 1)) for u in range(1, m)),
                            np.zeros((p - i + 1, p - j + 1)))
                        + corner(A, i, m) @ corner(A, j, m).T)
                out.append((f"(vii) {tm}", corner(S, i, j), rhs7))
    return out


# -- assembly -------------------------------------------------------------

def _v_blocks(tag: str, c, A, weights):
    if tag == "b":
        B = b_from_a(A)
        return lambda: v12_cb(c, B, weights), v22_cb(B, weights)
    if tag == "a":
        return lambda: v12_ca(c, A, weights), v22_ca(A, weights)
    if tag == "sigma":
        return lambda: v12_csigma(c, A, weights), v22_csigma(A, weights)
    raise ValueError(f"unknown parametrization {tag!r}; use 'b', 'a' or 'sigma'")


def assemble_v(params: CholRootParam | CholInvParam | CovParam, weights, tag: Kind = "sigma") -> AsymptoticCov:
    """Full asymptotic covariance in the parametrization ``tag``.

    ``params`` may be any parameter container; the closed forms are evaluated
    from its Cholesky root.
    """
    root = convert(params, "a")
    c, A = root.c, root.A
    K, p = c.size, A.shape[0]
    r = check_weights(weights, K)
    v12_fn, v22 = _v_blocks(tag, c, A, r)
    imap = ParamIndexMap(K, p, tag)
    if K == 1:
        V = v22
    else:
        top = v12_fn()
        V = np.block([[v11(c, r, p), top], [top.T, v22]])
    V = 0.5 * (V + V.T)
    if np.min(np.diag(V)) < -1e-10:
        raise NotPositiveSemidefinite("asymptotic covariance has a negative variance")
    return AsymptoticCov(V, imap, tag)


def delta_method(V: NDArray, jac: NDArray, K: int) -> NDArray:
    """``J V J^T`` with ``J = diag(I_{K-1}, jac)``: the coefficients are unchanged."""
    J = block_diag(np.eye(K - 1), jac) if K > 1 else jac
    return J @ V @ J.T


def standard_errors(V: AsymptoticCov | NDArray, n_plus: float) -> NDArray:
    M = V.matrix if isinstance(V, AsymptoticCov) else np.asarray(V, dtype=float)
    diag = np.diag(M)
    if np.any(diag < -1e-10):
        raise NotPositiveSemidefinite("asymptotic covariance has a negative variance")
    return np.sqrt(np.clip(diag, 0.0, None) / n_plus)


def check_dim(V: NDArray, K: int, p: int):
    q = K - 1 + n_free(p)
    if V.shape != (q, q):
        raise DimensionMismatch(f"expected a {q}x{q} matrix, got {V.shape}")
