"""Independent numerical checks for the closed forms in :mod:`propcov.asymptotics`.

Nothing in the estimation code imports this module.  It provides finite
difference Hessians and Jacobians, a LAPACK-based inverse, and a registry
``CHECKS`` pairing every closed form with one check.  ``run_validation``
executes the registry on seeded random instances (used by ``propcov validate``
and the test suite).

Discrepancies are reported as ``max|closed - oracle| / max(1, max|oracle|)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from . import asymptotics as asy
from .errors import NotPositiveDefinite, StepTooLarge
from .model import (
    CholInvParam,
    CholRootParam,
    SampleSet,
    a_from_sigma,
    b_from_a,
    n_free,
    pack_a,
    pack_sigma,
    unpack_a,
    unpack_b,
)


@dataclass(frozen=True)
class FdSettings:
    step: float = 1e-6  # first derivatives
    hessian_step: float = 2e-3  # second derivatives, with one Richardson extrapolation
    symmetry_tol: float = 1e-5

    def __post_init__(self):
        if not (self.step > 0 and self.hessian_step > 0):
            raise ValueError("finite-difference steps must be positive")


def _steps(x: NDArray, h: float) -> NDArray:
    return h * np.maximum(1.0, np.abs(x))


# -- objective in the (c, B) parametrization --------------------------------

def neg_loglik_cb(theta: NDArray, data: SampleSet) -> float:
    """``-l / n_+`` with ``theta = (c_2..c_K, packed B)``, written directly in ``B``."""
    K, p = data.K, data.p
    c = np.concatenate([[1.0], theta[:K - 1]])
    B = unpack_b(theta[K - 1:], p)
    r = data.weights
    quad = np.array([np.sum(B * (g.S @ B)) for g in data.groups])  # sum_i b_i' S_k b_i
    return float(-np.sum(np.log(np.diag(B))) + 0.5 * np.sum(r * (p * np.log(c) + quad / c)))


def expected_data(params: CholRootParam, n) -> SampleSet:
    """Samples with ``S_k = c_k A A^T`` exactly, so the Hessian equals its expectation."""
    Sigma = params.A @ params.A.T
    return SampleSet.from_arrays([ck * Sigma for ck in params.c], n)


def fd_hessian(f: Callable[[NDArray], float], x: NDArray, settings: FdSettings = FdSettings()) -> NDArray:
    """Central-difference Hessian with one Richardson step (error O(h^4))."""
    x = np.asarray(x, dtype=float)
    q = x.size

    def raw(h):
        H = np.zeros((q, q))
        for i in range(q):
            for j in range(q):
                ei = np.zeros(q)
                ej = np.zeros(q)
                ei[i] = h[i]
                ej[j] = h[j]
                H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
        return H

    h = _steps(x, settings.hessian_step)
    H = (4.0 * raw(h / 2) - raw(h)) / 3.0
    scale = max(1.0, np.max(np.abs(H)))
    if np.max(np.abs(H - H.T)) > settings.symmetry_tol * scale:
        raise StepTooLarge("finite-difference Hessian is not symmetric; reduce the step")
    return 0.5 * (H + H.T)


def fd_hessian_loglik(params: CholInvParam, data: SampleSet, settings: FdSettings = FdSettings()) -> NDArray:
    """Finite-difference Hessian of ``-l/n_+`` in the ``(c, B)`` packing."""
    return fd_hessian(lambda t: neg_loglik_cb(t, data), params.vector(), settings)


def fd_jacobian(fn: Callable[[NDArray], NDArray], x, step: float = 1e-6) -> NDArray:
    """Central-difference Jacobian of a vector map."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h[i]))
    J = np.column_stack(cols)
    if not np.all(np.isfinite(J)):
        raise StepTooLarge("finite-difference Jacobian left the domain of the map")
    return J


def numeric_inverse(M) -> NDArray:
    """Inverse of an SPD matrix through LAPACK's Cholesky routines."""
    M = np.asarray(M, dtype=float)
    try:
        cf = cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    inv = cho_solve(cf, np.eye(M.shape[0]))
    return 0.5 * (inv + inv.T)


def map_b_to_a(vec_b: NDArray, p: int) -> NDArray:
    """Packed ``B`` to packed ``A`` through ``Sigma1 = (B B^T)^{-1}``."""
    B = unpack_b(vec_b, p)
    return pack_a(a_from_sigma(numeric_inverse(B @ B.T)))


def map_a_to_sigma(vec_a: NDArray, p: int) -> NDArray:
    A = unpack_a(vec_a, p)
    return pack_sigma(A @ A.T)


# -- random instances -------------------------------------------------------

def random_instance(rng: np.random.Generator, p: int, K: int) -> tuple[CholRootParam, NDArray, NDArray]:
    """A well-conditioned random ``(c, A)`` with integer degrees of freedom."""
    A = np.tril(rng.uniform(-0.5, 0.5, (p, p)), -1)
    A[np.diag_indices(p)] = rng.uniform(0.7, 1.5, p)
    c = np.concatenate([[1.0], rng.uniform(0.5, 2.0, K - 1)])
    n = rng.integers(20, 200, K).astype(float)
    return CholRootParam(c, A), n, n / n.sum()


def _disc(closed, oracle) -> float:
    closed = np.asarray(closed, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    return float(np.max(np.abs(closed - oracle), initial=0.0) / max(1.0, np.max(np.abs(oracle), initial=0.0)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    discrepancy: float
    tolerance: float
    instances: int

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tolerance


def _blocks(p, K):
    imap = asy.ParamIndexMap(K, p, "b")
    return imap.coef_slice, slice(K - 1, K - 1 + n_free(p))


# Each check takes (params, n, weights) and returns the discrepancy.

def _check_information(par, n, r, settings=FdSettings()):
    info = asy.information_cb(par, r).matrix
    H = fd_hessian_loglik(par.to_inv(), expected_data(par, n), settings)
    rel = np.max(np.abs(H - info)) / np.max(np.abs(info))
    zeros = np.max(np.abs(H[info == 0.0]), initial=0.0)
    # structural zeros are held to the absolute 1e-8; report them on the 1e-6 scale
    return max(rel, zeros * 100.0)


def _check_i22_block_inverse(par, n, r):
    info = asy.information_cb(par, r).matrix
    imap = asy.ParamIndexMap(par.K, par.p, "b")
    worst = 0.0
    for i in range(1, par.p + 1):
        s = imap.block_slice(i - 1)
        blk = info[s, s]
        inv = asy.i22_block_inverse(par.A, i)
        worst = max(worst, _disc(blk @ inv, np.eye(i)), _disc(inv, numeric_inverse(blk)))
    return worst


def _check_u11(par, n, r):
    if par.K < 2:
        return 0.0
    info = asy.information_cb(par, r).matrix
    cs, bs = _blocks(par.p, par.K)
    schur = info[cs, cs] - info[cs, bs] @ numeric_inverse(info[bs, bs]) @ info[bs, cs]
    return _disc(asy.u11(par.c, r, par.p), schur)


def _check_v11(par, n, r):
    if par.K < 2:
        return 0.0
    Vn = numeric_inverse(asy.information_cb(par, r).matrix)
    cs, _ = _blocks(par.p, par.K)
    v = asy.v11(par.c, r, par.p)
    return max(_disc(v, Vn[cs, cs]), _disc(v @ asy.u11(par.c, r, par.p), np.eye(par.K - 1)))


def _check_v12_cb(par, n, r):
    if par.K < 2:
        return 0.0
    info = asy.information_cb(par, r).matrix
    Vn = numeric_inverse(info)
    cs, bs = _blocks(par.p, par.K)
    B = b_from_a(par.A)
    v12 = asy.v12_cb(par.c, B, r)
    via_identity = -asy.v11(par.c, r, par.p) @ info[cs, bs] @ numeric_inverse(info[bs, bs])
    return max(_disc(v12, Vn[cs, bs]), _disc(v12, via_identity))


def _check_v22_cb(par, n, r):
    Vn = numeric_inverse(asy.information_cb(par, r).matrix)
    _, bs = _blocks(par.p, par.K)
    return _disc(asy.v22_cb(b_from_a(par.A), r), Vn[bs, bs])


def _check_jacobian_a_wrt_b(par, n, r):
    p = par.p
    J = asy.jacobian_a_wrt_b(par.A)
    Jfd = fd_jacobian(lambda v: map_b_to_a(v, p), par.to_inv().vector()[par.K - 1:])
    return float(np.max(np.abs(J - Jfd)))


def _chain_a(par, r):
    Vb = asy.assemble_v(par, r, "b").matrix
    return asy.delta_method(Vb, asy.jacobian_a_wrt_b(par.A), par.K)


def _chain_sigma(par, r):
    return asy.delta_method(_chain_a(par, r), asy.jacobian_sigma_wrt_a(par.A), par.K)


def _check_v12_ca(par, n, r):
    if par.K < 2:
        return 0.0
    cs, bs = _blocks(par.p, par.K)
    return _disc(asy.v12_ca(par.c, par.A, r), _chain_a(par, r)[cs, bs])


def _check_v22_ca(par, n, r):
    _, bs = _blocks(par.p, par.K)
    return _disc(asy.v22_ca(par.A, r), _chain_a(par, r)[bs, bs])


def _check_jacobian_sigma_wrt_a(par, n, r):
    p = par.p
    J = asy.jacobian_sigma_wrt_a(par.A)
    Jfd = fd_jacobian(lambda v: map_a_to_sigma(v, p), pack_a(par.A))
    return float(np.max(np.abs(J - Jfd)))


def _check_v12_csigma(par, n, r):
    if par.K < 2:
        return 0.0
    cs, bs = _blocks(par.p, par.K)
    return _disc(asy.v12_csigma(par.c, par.A, r), _chain_sigma(par, r)[cs, bs])


def wishart_covariance(Sigma: NDArray) -> NDArray:
    """``cov(s_ij, s_kl) = s_ik s_jl + s_il s_jk`` in the packed ``Sigma1`` order."""
    p = Sigma.shape[0]
    idx = [(i, j) for j in range(p) for i in range(j, p)]
    return np.array([[Sigma[i, k] * Sigma[j, l] + Sigma[i, l] * Sigma[j, k] for (k, l) in idx]
                     for (i, j) in idx])


def _check_v22_csigma(par, n, r):
    _, bs = _blocks(par.p, par.K)
    worst = _disc(asy.v22_csigma(par.A, r), _chain_sigma(par, r)[bs, bs])
    # the single-population case is the classical Wishart covariance
    single = asy.v22_csigma(par.A, np.ones(1))
    return max(worst, _disc(single, wishart_covariance(par.A @ par.A.T)))


def _identities(fn):
    def check(par, n, r):
        return max(_disc(lhs, rhs) for _, lhs, rhs in fn(par.A))
    return check


CHECKS: dict[str, tuple[Callable, float]] = {
    "information_cb": (_check_information, 1e-6),
    "i22_block_inverse": (_check_i22_block_inverse, 1e-10),
    "u11": (_check_u11, 1e-10),
    "v11": (_check_v11, 1e-9),
    "v12_cb": (_check_v12_cb, 1e-9),
    "v22_cb": (_check_v22_cb, 1e-9),
    "jacobian_a_wrt_b": (_check_jacobian_a_wrt_b, 1e-7),
    "v12_ca": (_check_v12_ca, 1e-10),
    "v22_ca": (_check_v22_ca, 1e-10),
    "jacobian_sigma_wrt_a": (_check_jacobian_sigma_wrt_a, 1e-7),
    "v12_csigma": (_check_v12_csigma, 1e-10),
    "v22_csigma": (_check_v22_csigma, 1e-10),
    "inverse_root_identities": (_identities(asy.inverse_root_identities), 1e-10),
    "sigma_column_identities": (_identities(asy.sigma_column_identities), 1e-10),
    "sigma_block_identities": (_identities(asy.sigma_block_identities), 1e-10),
}

DEFAULT_SHAPES = ((1, 1), (1, 3), (2, 2), (3, 3), (4, 2), (5, 4))


def run_validation(seed: int = 0, shapes=DEFAULT_SHAPES, names=None) -> list[CheckResult]:
    """Run every registered check on one random instance per ``(p, K)`` shape."""
    names = list(CHECKS) if names is None else list(names)
    rng = np.random.default_rng(seed)
    instances = [random_instance(rng, p, K) for p, K in shapes]
    out = []
    for name in names:
        fn, tol = CHECKS[name]
        disc = max(fn(par, n, r) for par, n, r in instances)
        out.append(CheckResult(name, disc, tol, len(instances)))
    return out
