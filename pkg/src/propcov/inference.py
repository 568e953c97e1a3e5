"""Wald test of equal covariance matrices within the proportional model.

Under ``c_2 = ... = c_K = 1`` the statistic
``n_+ (c_hat - 1)^T U11(c_hat) (c_hat - 1)`` is asymptotically chi-squared
with ``K - 1`` degrees of freedom, ``U11`` being the information for the
coefficients.  It collapses to a weighted variance of ``1 / c_hat_k``::

    (n_+ p / 2) [ sum_k r_k / c_k^2 - (sum_k r_k / c_k)^2 ]     (c_1 = 1)

which is what is reported; the quadratic form is kept as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .asymptotics import u11
from .errors import InvalidArgument, KTooSmall, NotConverged
from .model import as_coefficients, check_weights

_EPS = 1e-16
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) by Lentz's continued fraction."""
    b = x + 1.0 - a
    C = 1.0 / _TINY
    D = 1.0 / b
    h = D
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        D = an * D + b
        if abs(D) < _TINY:
            D = _TINY
        C = b + an / C
        if abs(C) < _TINY:
            C = _TINY
        D = 1.0 / D
        delta = D * C
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0:
        raise InvalidArgument("shape must be positive")
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-squared distribution."""
    if not x >= 0:
        raise InvalidArgument(f"chi-squared statistic must be nonnegative, got {x}")
    if df < 1:
        raise InvalidArgument("degrees of freedom must be positive")
    if math.isinf(x):
        return 0.0
    return min(1.0, max(0.0, gamma_q(0.5 * df, 0.5 * x)))


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    c_hat: NDArray
    quadratic_form: float
    form_check: float

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "c_hat": [float(v) for v in self.c_hat],
            "quadratic_form": self.quadratic_form,
            "form_check": self.form_check,
        }


def simplified_statistic(c_hat, weights, n_plus: float, p: int) -> float:
    c = as_coefficients(c_hat)
    r = check_weights(weights, c.size)
    inv = 1.0 / c
    mean = np.dot(r, inv)
    # weighted variance of 1/c, centred first for accuracy near c = 1
    return float(0.5 * n_plus * p * np.dot(r, (inv - mean) ** 2))


def quadratic_statistic(c_hat, weights, n_plus: float, p: int) -> float:
    c = as_coefficients(c_hat)
    x = c[1:] - 1.0
    return float(n_plus * x @ u11(c, weights, p) @ x)


def homogeneity_statistic(c_hat, weights, n_plus: float, p: int) -> TestReport:
    """Test statistic, degrees of freedom and p-value for equal covariances."""
    c = as_coefficients(c_hat)
    if c.size < 2:
        raise KTooSmall("the homogeneity test needs at least two groups")
    stat = simplified_statistic(c, weights, n_plus, p)
    quad = quadratic_statistic(c, weights, n_plus, p)
    df = c.size - 1
    return TestReport(stat, df, chi_square_sf(stat, df), c, quad, abs(stat - quad))


def homogeneity_test(result, data) -> TestReport:
    """Run the test on a :class:`~propcov.mle.FitResult` for ``data``."""
    if not result.converged:
        raise NotConverged("the homogeneity test needs a converged fit")
    return homogeneity_statistic(result.c, data.weights, data.n_plus, data.p)
