import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from propcov import linalg, model
from propcov.errors import DimensionMismatch, NotPositiveDefinite
from propcov.model import (
    CholInvParam, CholRootParam, CovParam, GroupSample, ParamIndexMap, SampleSet,
)

from conftest import random_lower, random_spd


def test_b_from_a():
    assert_array_equal(model.b_from_a(np.eye(3)), np.eye(3))
    assert_allclose(model.b_from_a([[2, 0], [1, 2]]), [[0.5, -0.25], [0, 0.5]], atol=1e-15)


def test_b_from_a_multiply_back(rng):
    A = random_lower(rng, 5)
    B = model.b_from_a(A)
    assert_array_equal(np.tril(B, -1), 0)
    assert np.max(np.abs(B.T @ A - np.eye(5))) <= 1e-12


def test_sigma_a_round_trip(rng):
    assert_allclose(model.sigma_from_a([[2, 0], [1, 2]]), [[4, 2], [2, 5]])
    assert_allclose(model.a_from_sigma([[4, 2], [2, 5]]), [[2, 0], [1, 2]], atol=1e-15)
    A = random_lower(rng, 6)
    assert np.max(np.abs(model.a_from_sigma(model.sigma_from_a(A)) - A)) <= 1e-10
    with pytest.raises(NotPositiveDefinite):
        model.a_from_sigma([[1, 2], [2, 1]])


def test_pack_examples():
    B = np.array([[1.0, 2.0], [0.0, 3.0]])
    A = np.array([[1.0, 0.0], [2.0, 3.0]])
    assert_array_equal(model.pack_b(B), [1, 2, 3])
    assert_array_equal(model.pack_a(A), [1, 2, 3])
    S = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    assert_array_equal(model.pack_sigma(S), [1, 2, 3, 4, 5, 6])
    with pytest.raises(DimensionMismatch):
        model.unpack_a(np.ones(4), 2)


@pytest.mark.parametrize("p", [1, 3, 5])
def test_pack_round_trip(rng, p):
    A = random_lower(rng, p)
    B = np.triu(rng.standard_normal((p, p)))
    S = random_spd(rng, p)
    assert_array_equal(model.unpack_a(model.pack_a(A), p), A)
    assert_array_equal(model.unpack_b(model.pack_b(B), p), B)
    assert_array_equal(model.unpack_sigma(model.pack_sigma(S), p), 0.5 * (S + S.T))


@pytest.mark.parametrize("kind", ["b", "a", "sigma"])
@pytest.mark.parametrize("K,p", [(1, 1), (3, 2), (4, 4)])
def test_index_map_bijective(kind, K, p):
    imap = ParamIndexMap(K, p, kind)
    assert imap.size == K - 1 + p * (p + 1) // 2 == len(set(imap.labels))
    assert [imap.index(l) for l in imap.labels] == list(range(imap.size))
    covered = sorted(i for b in range(p) for i in range(imap.size)[imap.block_slice(b)])
    assert covered == list(range(K - 1, imap.size))
    for b in range(p):
        for lab in imap.labels[imap.block_slice(b)]:
            assert lab[2] == b + 1
    # every free matrix entry appears exactly once
    entries = {l[1:] for l in imap.labels if l[0] != "c"}
    expected = {(i, j) for i in range(1, p + 1) for j in range(1, p + 1)
                if (i <= j if kind == "b" else i >= j)}
    assert entries == expected


def test_coefficients_validation():
    assert_array_equal(model.as_coefficients([1, 2, 3]), [1, 2, 3])
    with pytest.raises(ValueError):
        model.as_coefficients([2, 1])
    with pytest.raises(ValueError):
        model.as_coefficients([1, -1])


def test_param_conversions(rng):
    A = random_lower(rng, 4)
    c = [1.0, 1.7, 0.4]
    root = CholRootParam(c, A)
    inv, cov = root.to_inv(), root.to_cov()
    assert_allclose(cov.to_root().A, A, atol=1e-12)
    assert_allclose(inv.to_root().A, A, atol=1e-12)
    for k, ck in enumerate(c):
        from_b = inv.B @ inv.B.T / ck
        assert np.max(np.abs(from_b - linalg.sym_inverse(ck * A @ A.T))) <= 1e-9
    for P in (root, inv, cov):
        again = type(P).from_vector(P.vector(), 3, 4)
        assert_allclose(again.vector(), P.vector())


def test_sample_set():
    data = SampleSet.from_arrays([np.eye(2), 2 * np.eye(2)], [10, 30])
    assert data.K == 2 and data.p == 2 and data.n_plus == 40
    assert_allclose(data.weights, [0.25, 0.75])
    assert data.weights.sum() == 1.0
    with pytest.raises(DimensionMismatch):
        SampleSet.from_arrays([np.eye(2), np.eye(3)], [5, 5])
    with pytest.raises(NotPositiveDefinite):
        GroupSample(np.array([[1.0, 2.0], [2.0, 1.0]]), 5)
    with pytest.raises(ValueError):
        GroupSample(np.eye(2), 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 6))
def test_cholesky_uniqueness_property(seed, p):
    A = random_lower(np.random.default_rng(seed), p)
    S = model.sigma_from_a(A)
    linalg.cholesky_lower(S)
    assert np.max(np.abs(model.a_from_sigma(S) - A)) <= 1e-10
