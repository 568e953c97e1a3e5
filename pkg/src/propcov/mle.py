"""Maximum likelihood fit of the proportional covariance model.

The log-likelihood (constants dropped) of ``Sigma_k = c_k Sigma1`` is::

    l = n_+ sum_i log b_ii - sum_k n_k/2 (p log c_k + tr(Sigma1^{-1} S_k) / c_k)

with ``B`` the Cholesky inverse root of ``Sigma1``.  Setting the block
gradients to zero gives two closed-form updates, and the fit alternates them
("flip-flop").  Each half step maximizes ``l`` exactly in its block, so the
trace of ``l`` never decreases.

The fit does not hold ``c_1 = 1`` during the coefficient step.  With all
``c_k`` free the likelihood is invariant under ``(c / t, t Sigma1)``, so the
step maximizes over every coefficient and then rescales to ``c_1 = 1``,
giving ``c_k = tr(Sigma1^-1 S_k) / tr(Sigma1^-1 S_1)``.  Pinning ``c_1``
instead lets only the first group fix the overall scale, and the iteration
then contracts by just ``1 - r_1`` per sweep.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import kernels, linalg
from .errors import DimensionMismatch, NotPositiveDefinite
from .model import CholInvParam, CholRootParam, CovParam, SampleSet, as_coefficients

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-10
    max_iter: int = 500

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass(frozen=True)
class FitResult:
    params: CovParam
    loglik: float
    iterations: int
    converged: bool
    loglik_trace: NDArray = field(repr=False)

    @property
    def root(self) -> CholRootParam:
        return self.params.to_root()

    @property
    def inv(self) -> CholInvParam:
        return self.params.to_inv()

    @property
    def c(self) -> NDArray:
        return self.params.c


def _check_dims(params_p: int, data: SampleSet, K: int):
    if data.p != params_p or data.K != K:
        raise DimensionMismatch(
            f"parameters are for K={K}, p={params_p} but data has K={data.K}, p={data.p}")


def loglik(params: CovParam, data: SampleSet) -> float:
    """Log-likelihood of ``params`` given the sample covariances, constants dropped."""
    _check_dims(params.p, data, params.K)
    try:
        return float(kernels.loglik(data.stack(), data.n, params.Sigma1, params.c))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def update_c(Sigma1, data: SampleSet) -> NDArray:
    """Coefficients maximizing the likelihood for fixed ``Sigma1``: ``tr(Sigma1^-1 S_k)/p``."""
    Sinv = linalg.sym_inverse(Sigma1)
    if Sinv.shape[0] != data.p:
        raise DimensionMismatch("Sigma1 and data dimensions differ")
    c = np.array([linalg.trace_of_product(Sinv, g.S) for g in data.groups]) / data.p
    c[0] = 1.0
    return as_coefficients(c)


def update_sigma(c, data: SampleSet) -> NDArray:
    """Common covariance maximizing the likelihood for fixed ``c``: ``sum_k r_k S_k / c_k``."""
    c = as_coefficients(c)
    if c.size != data.K:
        raise DimensionMismatch(f"expected {data.K} coefficients, got {c.size}")
    Sigma = np.tensordot(data.weights / c, data.stack(), axes=1)
    return 0.5 * (Sigma + Sigma.T)


def fit(data: SampleSet, opts: FitOptions | None = None) -> FitResult:
    """Fit ``(c, Sigma1)`` by alternating maximization from ``c = 1``.

    Non-convergence within ``opts.max_iter`` sweeps is reported through
    ``converged=False`` with the last iterate, not raised.
    """
    opts = opts or FitOptions()
    if any(g.n < data.p for g in data.groups):
        raise NotPositiveDefinite("each group needs at least p degrees of freedom")
    try:
        Sigma, c, it, converged, trace = kernels.flipflop(
            data.stack(), data.n, float(opts.tol), int(opts.max_iter))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if not converged:
        log.warning("flip-flop did not converge in %d iterations", it)
    params = CovParam(c, 0.5 * (Sigma + Sigma.T))
    return FitResult(params, float(trace[-1]), int(it), bool(converged), trace)
