import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from propcov import inference, mle
from propcov.errors import InvalidArgument, KTooSmall, NotConverged
from propcov.mle import FitOptions
from propcov.model import SampleSet
from propcov.montecarlo import sample_wishart


def quad_sf(x, df):
    """Upper tail of chi-squared by numerical integration of its density."""
    mpmath.mp.dps = 40
    k = mpmath.mpf(df) / 2
    pdf = lambda t: t ** (k - 1) * mpmath.exp(-t / 2) / (2 ** k * mpmath.gamma(k))  # noqa: E731
    return float(mpmath.quad(pdf, [x, x + 50, x + 200, mpmath.inf]))


def test_statistic_at_equal_coefficients():
    rep = inference.homogeneity_statistic([1.0, 1.0, 1.0], [0.2, 0.3, 0.5], 300, 3)
    assert rep.statistic == 0.0
    assert rep.p_value == 1.0
    assert rep.df == 2


def test_statistic_worked_example():
    rep = inference.homogeneity_statistic([1.0, 2.0], [0.5, 0.5], 100, 2)
    assert rep.statistic == pytest.approx(6.25, rel=1e-14)
    assert rep.quadratic_form == pytest.approx(6.25, rel=1e-14)
    assert rep.p_value == pytest.approx(math.erfc(math.sqrt(6.25 / 2)), abs=1e-12)


def test_statistic_dual_form_on_fitted_null_sample():
    rng = np.random.default_rng(17)
    Sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    n = [150, 220, 90]
    data = SampleSet.from_arrays([sample_wishart(Sigma, k, rng) for k in n], n)
    res = mle.fit(data)
    rep = inference.homogeneity_test(res, data)
    assert abs(rep.statistic - rep.quadratic_form) <= 1e-12 * max(1.0, rep.statistic)
    assert 0.0 <= rep.p_value <= 1.0


def test_statistic_errors():
    with pytest.raises(KTooSmall):
        inference.homogeneity_statistic([1.0], [1.0], 10, 2)
    data = SampleSet.from_arrays([np.eye(2), 2 * np.eye(2) + 0.5], [10, 20])
    res = mle.fit(data, FitOptions(max_iter=1))
    with pytest.raises(NotConverged):
        inference.homogeneity_test(res, data)


def test_statistic_invariant_under_rescaling():
    rng = np.random.default_rng(2)
    S = [sample_wishart(np.eye(3) * s, 40, rng) for s in (1.0, 1.3, 0.8)]
    a = SampleSet.from_arrays(S, [40, 40, 40])
    b = SampleSet.from_arrays([7.5 * s for s in S], [40, 40, 40])
    ra = inference.homogeneity_test(mle.fit(a), a)
    rb = inference.homogeneity_test(mle.fit(b), b)
    assert rb.statistic == pytest.approx(ra.statistic, rel=1e-8)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 6))
def test_dual_form_property(seed, K):
    rng = np.random.default_rng(seed)
    c = np.concatenate([[1.0], rng.uniform(0.2, 5.0, K - 1)])
    r = rng.dirichlet(np.ones(K))
    n_plus, p = float(rng.integers(10, 2000)), int(rng.integers(1, 8))
    simple = inference.simplified_statistic(c, r, n_plus, p)
    quad = inference.quadratic_statistic(c, r, n_plus, p)
    assert abs(simple - quad) <= 1e-12 * max(abs(simple), 1e-300) + 1e-300


# -- chi-squared tail ------------------------------------------------------------

@pytest.mark.parametrize("df", [1, 2, 7, 50])
def test_sf_at_zero(df):
    assert inference.chi_square_sf(0.0, df) == 1.0


def test_sf_two_degrees_of_freedom():
    assert inference.chi_square_sf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-15)
    for x in np.linspace(0, 200, 101):
        assert abs(inference.chi_square_sf(x, 2) - math.exp(-x / 2)) <= 1e-12


def test_sf_one_degree_of_freedom_quantile():
    # bisection for the 95% point of chi-squared(1) on erfc(sqrt(x/2)) = 0.05
    lo, hi = 0.0, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if math.erfc(math.sqrt(mid / 2)) > 0.05 else (lo, mid)
    assert lo == pytest.approx(3.841458820694124, abs=1e-12)
    assert inference.chi_square_sf(3.841458820694124, 1) == pytest.approx(0.05, abs=1e-9)


@pytest.mark.parametrize("df", [3, 5, 10])
def test_sf_matches_quadrature(df):
    for x in (0.1, 1.0, df - 0.5, df + 1.0, 3.0 * df, 60.0):
        assert abs(inference.chi_square_sf(x, df) - quad_sf(x, df)) <= 1e-10


def test_sf_grid_against_high_precision():
    mpmath.mp.dps = 40
    worst = 0.0
    for df in range(1, 51, 7):
        for x in np.linspace(0.0, 200.0, 81):
            ref = float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))
            worst = max(worst, abs(inference.chi_square_sf(x, df) - ref))
    assert worst <= 1e-10


def test_sf_rejects_negative():
    with pytest.raises(InvalidArgument):
        inference.chi_square_sf(-1e-3, 2)
    with pytest.raises(InvalidArgument):
        inference.chi_square_sf(1.0, 0)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 300), dx=st.floats(1e-6, 50), df=st.integers(1, 50))
def test_sf_is_survival_function(x, dx, df):
    a, b = inference.chi_square_sf(x, df), inference.chi_square_sf(x + dx, df)
    assert 0.0 <= b <= a <= 1.0
