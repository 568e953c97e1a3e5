import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from propcov import linalg
from propcov.errors import DimensionMismatch, NotPositiveDefinite, SingularMatrix

from conftest import random_lower, random_spd


def test_cholesky_2x2():
    assert_allclose(linalg.cholesky_lower([[4, 2], [2, 5]]), [[2, 0], [1, 2]], atol=1e-15)


def test_cholesky_identity():
    assert_array_equal(linalg.cholesky_lower(np.eye(4)), np.eye(4))


@pytest.mark.parametrize("p", [1, 2, 5, 12])
def test_cholesky_reconstructs(rng, p):
    M = random_spd(rng, p)
    A = linalg.cholesky_lower(M)
    assert np.all(np.diag(A) > 0)
    assert_array_equal(np.triu(A, 1), 0)
    assert np.max(np.abs(A @ A.T - M)) <= 1e-12 * np.max(np.abs(M))


@pytest.mark.parametrize("M", [[[1, 2], [2, 1]], [[0.0]], [[1, 1], [1, 1]], [[-1.0]]])
def test_cholesky_rejects_non_pd(M):
    with pytest.raises(NotPositiveDefinite):
        linalg.cholesky_lower(M)


def test_cholesky_rejects_tiny_pivot():
    M = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-13]])
    with pytest.raises(NotPositiveDefinite):
        linalg.cholesky_lower(M)


def test_symmetry_tolerance():
    M = np.array([[2.0, 1.0], [1.0 + 1e-12, 3.0]])
    S = linalg.as_symmetric(M)
    assert S[0, 1] == S[1, 0]
    with pytest.raises(ValueError, match="not symmetric"):
        linalg.as_symmetric([[2.0, 1.0], [1.1, 3.0]])


def test_invert_lower_2x2():
    assert_allclose(linalg.invert_lower_triangular([[2, 0], [1, 2]]), [[0.5, 0], [-0.25, 0.5]], atol=1e-15)
    assert_array_equal(linalg.invert_lower_triangular(np.eye(3)), np.eye(3))


@pytest.mark.parametrize("p", [1, 3, 8])
def test_invert_lower_residual(rng, p):
    L = random_lower(rng, p)
    Linv = linalg.invert_lower_triangular(L)
    assert np.max(np.abs(L @ Linv - np.eye(p))) <= 1e-12
    assert np.max(np.abs(linalg.invert_lower_triangular(Linv) - L)) <= 1e-10


def test_invert_lower_singular():
    with pytest.raises(SingularMatrix):
        linalg.invert_lower_triangular([[1.0, 0.0], [3.0, 0.0]])
    with pytest.raises(ValueError):
        linalg.invert_lower_triangular([[1.0, 2.0], [0.0, 1.0]])


def test_sym_inverse_examples(rng):
    assert_allclose(linalg.sym_inverse(np.diag([4.0, 5.0])), np.diag([0.25, 0.2]), atol=1e-15)
    assert_array_equal(linalg.sym_inverse(np.eye(3)), np.eye(3))
    M = random_spd(rng, 6)
    inv = linalg.sym_inverse(M)
    assert_array_equal(inv, inv.T)
    assert np.max(np.abs(M @ inv - np.eye(6))) <= 1e-10
    with pytest.raises(NotPositiveDefinite):
        linalg.sym_inverse([[1.0, 2.0], [2.0, 1.0]])


def test_trace_of_product(rng):
    assert linalg.trace_of_product(np.eye(2), np.eye(2)) == 2
    assert linalg.trace_of_product(np.diag([2, 3]), np.diag([4, 5])) == 23
    M, N = random_spd(rng, 4), random_spd(rng, 4)
    assert linalg.trace_of_product(M, N) == pytest.approx(np.trace(M @ N), rel=1e-14)
    with pytest.raises(DimensionMismatch):
        linalg.trace_of_product(np.eye(2), np.eye(3))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 7))
def test_inverse_properties(seed, p):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, p)
    A = linalg.cholesky_lower(M)
    assert np.all(np.diag(A) > 0)
    assert np.max(np.abs(A @ A.T - M)) <= 1e-12 * np.max(np.abs(M))
    assert np.max(np.abs(linalg.sym_inverse(linalg.sym_inverse(M)) - M)) <= 1e-8
