"""Data containers, parameter containers and half-vectorization maps.

Three equivalent parametrizations of the proportional covariance model are
supported.  All share the coefficient vector ``c`` (length K, ``c[0] == 1``
for the reference group) and differ in how the common covariance is held:

* :class:`CholInvParam` -- upper triangular ``B`` with ``inv(Sigma1) = B B^T``
* :class:`CholRootParam` -- lower triangular ``A`` with ``Sigma1 = A A^T``
* :class:`CovParam` -- ``Sigma1`` itself

A parameter vector is ``(c_2, ..., c_K)`` followed by the free entries of the
matrix, packed column block by column block.  For ``B`` column block ``i``
is ``B[:i+1, i]``; for ``A`` and ``Sigma1`` it is ``M[i:, i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import linalg
from .errors import DimensionMismatch

Kind = Literal["b", "a", "sigma"]
KINDS: tuple[str, ...] = ("b", "a", "sigma")


# -- half-vectorization ---------------------------------------------------

def n_free(p: int) -> int:
    return p * (p + 1) // 2


def block_rows(kind: Kind, p: int, i: int) -> range:
    """Row indices (0-based) of column block ``i`` for a packing kind."""
    if kind == "b":
        return range(0, i + 1)
    if kind in ("a", "sigma"):
        return range(i, p)
    raise ValueError(f"unknown packing kind {kind!r}")


def block_offsets(kind: Kind, p: int) -> list[int]:
    sizes = [len(block_rows(kind, p, i)) for i in range(p)]
    return list(np.concatenate([[0], np.cumsum(sizes)]).astype(int))


def _pack(M: NDArray, kind: Kind) -> NDArray:
    p = M.shape[0]
    return np.concatenate([M[list(block_rows(kind, p, i)), i] for i in range(p)])


def _unpack(v: ArrayLike, p: int, kind: Kind) -> NDArray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n_free(p),):
        raise DimensionMismatch(f"expected {n_free(p)} packed entries for p={p}, got {v.shape}")
    M = np.zeros((p, p))
    off = block_offsets(kind, p)
    for i in range(p):
        M[list(block_rows(kind, p, i)), i] = v[off[i]:off[i + 1]]
    return M


def pack_b(B: ArrayLike) -> NDArray:
    return _pack(linalg.as_upper(B), "b")


def unpack_b(v: ArrayLike, p: int) -> NDArray:
    return _unpack(v, p, "b")


def pack_a(A: ArrayLike) -> NDArray:
    return _pack(linalg.as_lower(A), "a")


def unpack_a(v: ArrayLike, p: int) -> NDArray:
    return _unpack(v, p, "a")


def pack_sigma(S: ArrayLike) -> NDArray:
    return _pack(linalg.as_symmetric(S), "sigma")


def unpack_sigma(v: ArrayLike, p: int) -> NDArray:
    L = _unpack(v, p, "sigma")
    return L + np.tril(L, -1).T


def dim_from_free(m: int) -> int:
    p = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if n_free(p) != m:
        raise DimensionMismatch(f"{m} is not a triangular number")
    return p


@dataclass(frozen=True)
class ParamIndexMap:
    """Position of every parameter in a packed ``(c, matrix)`` vector.

    Labels are ``("c", k)`` for the coefficients (k = 2..K, 1-based as in the
    usual notation) and ``(kind, row, col)`` with 1-based matrix indices.
    """

    K: int
    p: int
    kind: Kind = "b"
    labels: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.K < 1 or self.p < 1:
            raise DimensionMismatch("K and p must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown packing kind {self.kind!r}")
        labels = [("c", k) for k in range(2, self.K + 1)]
        for i in range(self.p):
            labels.extend((self.kind, r + 1, i + 1) for r in block_rows(self.kind, self.p, i))
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def size(self) -> int:
        return self.K - 1 + n_free(self.p)

    def __len__(self) -> int:
        return self.size

    def index(self, label: tuple) -> int:
        return self.labels.index(label)

    @property
    def coef_slice(self) -> slice:
        return slice(0, self.K - 1)

    def block_slice(self, i: int) -> slice:
        """Slice of the 0-based column block ``i`` in the full vector."""
        off = block_offsets(self.kind, self.p)
        return slice(self.K - 1 + off[i], self.K - 1 + off[i + 1])


# -- data -----------------------------------------------------------------

@dataclass(frozen=True)
class GroupSample:
    """Unbiased covariance estimate ``S`` with ``n`` degrees of freedom."""

    S: NDArray
    n: int
    label: str | None = None

    def __post_init__(self):
        S = linalg.as_symmetric(self.S)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.n}")
        linalg.cholesky_lower(S)  # raises NotPositiveDefinite
        S.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "n", int(self.n))

    @property
    def p(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class SampleSet:
    groups: tuple[GroupSample, ...]

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("at least one group is required")
        ps = {g.p for g in groups}
        if len(ps) != 1:
            raise DimensionMismatch(f"groups have different dimensions {sorted(ps)}")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_arrays(cls, S: Iterable[ArrayLike], n: Iterable[int]) -> "SampleSet":
        S, n = list(S), list(n)
        if len(S) != len(n):
            raise DimensionMismatch("need one degrees-of-freedom value per matrix")
        return cls(tuple(GroupSample(np.asarray(s, dtype=float), int(m)) for s, m in zip(S, n)))

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].p

    @property
    def n(self) -> NDArray:
        return np.array([g.n for g in self.groups], dtype=float)

    @property
    def n_plus(self) -> int:
        return int(sum(g.n for g in self.groups))

    @property
    def weights(self) -> NDArray:
        n = self.n
        return n / n.sum()

    def stack(self) -> NDArray:
        """Covariance matrices as a ``(K, p, p)`` array."""
        return np.stack([g.S for g in self.groups])


# -- parameters -----------------------------------------------------------

def as_coefficients(c: ArrayLike) -> NDArray:
    """Validate a full-length coefficient vector (``c[0]`` pinned to 1)."""
    c = np.atleast_1d(np.array(c, dtype=float))
    if c.ndim != 1 or c.size < 1:
        raise DimensionMismatch("coefficients must be a non-empty vector")
    if c[0] != 1.0:
        raise ValueError(f"the reference coefficient c_1 must be exactly 1, got {c[0]}")
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("coefficients must be finite and positive")
    c.setflags(write=False)
    return c


def coefficients_from_free(c_free: ArrayLike) -> NDArray:
    return as_coefficients(np.concatenate([[1.0], np.atleast_1d(np.asarray(c_free, dtype=float))]))


def b_from_a(A: ArrayLike) -> NDArray:
    """Cholesky inverse root ``B = inv(A)^T`` (upper triangular)."""
    return np.triu(linalg.invert_lower_triangular(A).T)


def a_from_b(B: ArrayLike) -> NDArray:
    return np.tril(linalg.invert_lower_triangular(linalg.as_upper(B).T))


def sigma_from_a(A: ArrayLike) -> NDArray:
    A = linalg.as_lower(A)
    S = A @ A.T
    return 0.5 * (S + S.T)


def a_from_sigma(Sigma1: ArrayLike) -> NDArray:
    return linalg.cholesky_lower(Sigma1)


def _frozen(M: NDArray) -> NDArray:
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class CholRootParam:
    c: NDArray
    A: NDArray

    def __post_init__(self):
        A = linalg.as_lower(self.A)
        if np.any(np.diag(A) <= 0):
            raise ValueError("Cholesky root must have a positive diagonal")
        object.__setattr__(self, "c", as_coefficients(self.c))
        object.__setattr__(self, "A", _frozen(A))

    @property
    def K(self) -> int:
        return self.c.size

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def to_inv(self) -> "CholInvParam":
        return CholInvParam(self.c, b_from_a(self.A))

    def to_cov(self) -> "CovParam":
        return CovParam(self.c, sigma_from_a(self.A))

    def to_root(self) -> "CholRootParam":
        return self

    def vector(self) -> NDArray:
        return np.concatenate([self.c[1:], pack_a(self.A)])

    @classmethod
    def from_vector(cls, v: ArrayLike, K: int, p: int) -> "CholRootParam":
        v = np.asarray(v, dtype=float)
        return cls(coefficients_from_free(v[:K - 1]), unpack_a(v[K - 1:], p))


@dataclass(frozen=True)
class CholInvParam:
    c: NDArray
    B: NDArray

    def __post_init__(self):
        B = linalg.as_upper(self.B)
        if np.any(np.diag(B) <= 0):
            raise ValueError("Cholesky inverse root must have a positive diagonal")
        object.__setattr__(self, "c", as_coefficients(self.c))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def K(self) -> int:
        return self.c.size

    @property
    def p(self) -> int:
        return self.B.shape[0]

    def to_root(self) -> CholRootParam:
        return CholRootParam(self.c, a_from_b(self.B))

    def to_cov(self) -> "CovParam":
        return self.to_root().to_cov()

    def to_inv(self) -> "CholInvParam":
        return self

    def vector(self) -> NDArray:
        return np.concatenate([self.c[1:], pack_b(self.B)])

    @classmethod
    def from_vector(cls, v: ArrayLike, K: int, p: int) -> "CholInvParam":
        v = np.asarray(v, dtype=float)
        return cls(coefficients_from_free(v[:K - 1]), unpack_b(v[K - 1:], p))


@dataclass(frozen=True)
class CovParam:
    c: NDArray
    Sigma1: NDArray

    def __post_init__(self):
        S = linalg.as_symmetric(self.Sigma1)
        linalg.cholesky_lower(S)
        object.__setattr__(self, "c", as_coefficients(self.c))
        object.__setattr__(self, "Sigma1", _frozen(S))

    @property
    def K(self) -> int:
        return self.c.size

    @property
    def p(self) -> int:
        return self.Sigma1.shape[0]

    def to_root(self) -> CholRootParam:
        return CholRootParam(self.c, a_from_sigma(self.Sigma1))

    def to_inv(self) -> CholInvParam:
        return self.to_root().to_inv()

    def to_cov(self) -> "CovParam":
        return self

    def covariances(self) -> NDArray:
        """Group covariance matrices ``c_k * Sigma1`` as a ``(K, p, p)`` array."""
        return self.c[:, None, None] * self.Sigma1[None]

    def vector(self) -> NDArray:
        return np.concatenate([self.c[1:], pack_sigma(self.Sigma1)])

    @classmethod
    def from_vector(cls, v: ArrayLike, K: int, p: int) -> "CovParam":
        v = np.asarray(v, dtype=float)
        return cls(coefficients_from_free(v[:K - 1]), unpack_sigma(v[K - 1:], p))


PARAM_CLASSES = {"b": CholInvParam, "a": CholRootParam, "sigma": CovParam}


def convert(params, kind: Kind):
    """Convert any parameter container to the parametrization ``kind``."""
    return {"b": params.to_inv, "a": params.to_root, "sigma": params.to_cov}[kind]()


def check_weights(weights: ArrayLike, K: int | None = None) -> NDArray:
    r = np.atleast_1d(np.asarray(weights, dtype=float))
    if K is not None and r.size != K:
        raise DimensionMismatch(f"expected {K} weights, got {r.size}")
    if np.any(r <= 0) or abs(r.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to one")
    return r


def weights_from_n(n: Sequence[float]) -> NDArray:
    n = np.asarray(n, dtype=float)
    return n / n.sum()
