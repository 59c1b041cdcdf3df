import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from adjpair import marginals as mg
from adjpair.errors import DomainError, ParameterError
from adjpair.marginals import MarginalSpec


def test_pmf_examples():
    assert_allclose(mg.pmf_or_pdf(MarginalSpec.poisson(1.7), 0), math.exp(-1.7), rtol=1e-14)
    assert_allclose(mg.pmf_or_pdf(MarginalSpec.poisson(1.7), 0), 0.182684, atol=1e-6)
    assert_allclose(mg.pmf_or_pdf(MarginalSpec.binomial(2, 0.5), 1), 0.5, rtol=1e-14)
    assert_allclose(mg.pmf_or_pdf(MarginalSpec.normal(0, 1), 0), 0.398942, atol=1e-6)


def test_cdf_examples():
    assert_allclose(mg.cdf(MarginalSpec.binomial(2, 0.5), 1), 0.75, rtol=1e-14)
    assert_allclose(mg.cdf(MarginalSpec.poisson(2.0125), 0), math.exp(-2.0125), rtol=1e-13)
    assert_allclose(mg.cdf(MarginalSpec.poisson(2.0125), 0), 0.1336542, atol=1e-7)


def test_binomial_cdf_matches_brute_force_sum():
    # exact rational arithmetic as the oracle
    from fractions import Fraction

    n, x0 = 100, 66
    p = Fraction(66, 100)
    exact = sum(math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(x0 + 1))
    assert abs(float(mg.cdf(MarginalSpec.binomial(n, 0.66), x0)) - float(exact)) < 1e-12


def test_chi1_cdf_values():
    assert mg.chi1_cdf(0.0) == 0.0
    assert_allclose(mg.chi1_cdf(3.8415), 0.95, atol=1e-4)
    assert_allclose(mg.chi1_cdf(2.7055), 0.90, atol=1e-4)
    d = np.linspace(0, 30, 61)
    assert_allclose(mg.chi1_cdf(d), stats.chi2.cdf(d, 1), atol=1e-14)


def test_chi1_cdf_monotone_and_saturates():
    vals = mg.chi1_cdf(np.linspace(0, 40, 1000))
    assert np.all(np.diff(vals) >= 0)
    assert mg.chi1_cdf(40.0) > 1 - 1e-9


def test_chi1_quantile_inverts_cdf():
    for level in (0.5, 0.9, 0.95, 0.99):
        assert_allclose(mg.chi1_cdf(mg.chi1_quantile(level)), level, rtol=1e-12)
    assert_allclose(mg.chi1_quantile(0.95), 3.841459, atol=1e-6)


def test_chi1_cdf_rejects_negative():
    with pytest.raises(DomainError):
        mg.chi1_cdf(-0.1)


def test_mean_sd():
    assert mg.mean_sd(MarginalSpec.poisson(4)) == (4, 2)
    mean, sd = mg.mean_sd(MarginalSpec.binomial(100, 0.66))
    assert_allclose((mean, sd), (66, math.sqrt(22.44)), rtol=1e-14)
    assert_allclose(sd, 4.7371, atol=1e-4)
    assert mg.mean_sd(MarginalSpec.exponential(2)) == (0.5, 0.5)


def test_normal_cdf_accuracy():
    z = np.linspace(-8, 8, 161)
    assert_allclose(mg.normal_cdf(z), stats.norm.cdf(z), rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("m", [
    MarginalSpec.poisson(0.5), MarginalSpec.poisson(1.7), MarginalSpec.poisson(30.0),
    MarginalSpec.binomial(20, 0.2), MarginalSpec.binomial(100, 0.66), MarginalSpec.binomial(3359, 0.83),
])
def test_discrete_pmf_sums_to_one_and_matches_cdf(m):
    xs = mg.truncated_support(m)
    pmf = mg.pmf_or_pdf(m, xs)
    assert np.all(pmf >= 0)
    total = pmf.sum() + (mg.sf(m, xs[-1]) if m.family is mg.Family.POISSON else 0.0)
    assert abs(total - 1.0) < 1e-12
    assert np.max(np.abs(mg.cdf(m, xs) - np.cumsum(pmf))) <= 1e-12
    cdf = mg.cdf(m, xs)
    assert np.all(np.diff(cdf) >= -1e-16)
    if m.family is mg.Family.BINOMIAL:
        assert_allclose(cdf[-1], 1.0, rtol=0, atol=1e-15)


def test_poisson_truncation_tail():
    m = MarginalSpec.poisson(1.7)
    xs = mg.truncated_support(m)
    assert mg.sf(m, xs[-1]) < mg.TAIL_MASS
    assert mg.sf(m, xs[-2]) >= mg.TAIL_MASS


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0.05, 40.0), x=st.integers(0, 60))
def test_poisson_log_path_agrees_with_direct(theta, x):
    direct = theta**x * math.exp(-theta) / math.factorial(x)
    if direct > 1e-300:
        assert_allclose(mg.pmf_or_pdf(MarginalSpec.poisson(theta), x), direct, rtol=1e-10)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 60), p=st.floats(0.01, 0.99), data=st.data())
def test_binomial_log_path_agrees_with_direct(n, p, data):
    x = data.draw(st.integers(0, n))
    direct = math.comb(n, x) * p**x * (1 - p) ** (n - x)
    if direct > 1e-300:
        assert_allclose(mg.pmf_or_pdf(MarginalSpec.binomial(n, p), x), direct, rtol=1e-10)


def test_large_binomial_is_finite():
    m = MarginalSpec.binomial(3359, 0.83)
    vals = mg.pmf_or_pdf(m, np.array([0, 2788, 3359]))
    assert np.all(np.isfinite(vals))
    assert vals[1] > 0


@pytest.mark.parametrize("m,x", [
    (MarginalSpec.poisson(1.0), -1),
    (MarginalSpec.poisson(1.0), 1.5),
    (MarginalSpec.binomial(5, 0.3), 6),
    (MarginalSpec.exponential(1.0), -0.1),
])
def test_out_of_support(m, x):
    with pytest.raises(DomainError):
        mg.pmf_or_pdf(m, x)


@pytest.mark.parametrize("ctor,args", [
    (MarginalSpec.poisson, (0.0,)),
    (MarginalSpec.poisson, (-1.0,)),
    (MarginalSpec.binomial, (0, 0.5)),
    (MarginalSpec.binomial, (10, 1.0)),
    (MarginalSpec.binomial, (2.5, 0.5)),
    (MarginalSpec.normal, (0.0, 0.0)),
    (MarginalSpec.exponential, (0.0,)),
])
def test_invalid_parameters(ctor, args):
    with pytest.raises(ParameterError):
        ctor(*args)


def test_continuous_cdfs():
    assert_allclose(mg.cdf(MarginalSpec.exponential(2.0), 1.0), 1 - math.exp(-2.0), rtol=1e-14)
    assert_allclose(mg.cdf(MarginalSpec.normal(1.0, 2.0), 1.0), 0.5, rtol=1e-15)
    assert_allclose(mg.sf(MarginalSpec.normal(0.0, 1.0), 10.0), stats.norm.sf(10.0), rtol=1e-12)
