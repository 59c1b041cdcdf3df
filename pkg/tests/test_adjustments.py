import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from adjpair import adjustments as adj_mod
from adjpair import marginals as mg
from adjpair.adjustments import AdjustmentSpec
from adjpair.bivariate import alpha_range, corr_range
from adjpair.errors import ConfigurationError
from adjpair.marginals import MarginalSpec

THETAS = (0.5, 1.0, 1.7, 2.0, 5.0)
TS = (0.5, 1.0, 1.084, 2.0)
D1 = 1.0 - math.exp(-1.0)


# closed-form examples ------------------------------------------------------

def test_center_examples():
    a = adj_mod.center(AdjustmentSpec.exp_decay(1.0), MarginalSpec.poisson(1.7))
    assert_allclose(a, math.exp(-D1 * 1.7), rtol=1e-14)
    assert_allclose(a, 0.341430, atol=3e-6)
    assert_allclose(adj_mod.center(AdjustmentSpec.phi_kernel(), MarginalSpec.normal()), 0.282095, atol=1e-6)
    assert_allclose(adj_mod.center(AdjustmentSpec.exp_decay(2.0), MarginalSpec.exponential(1.0)), 1 / 3, rtol=1e-14)
    assert_allclose(adj_mod.center(AdjustmentSpec.limit_brutal(), MarginalSpec.poisson(2.0)), math.exp(-2.0))


def test_bound_examples():
    # theta chosen so that a = 1/2
    theta = math.log(2.0) / D1
    m = MarginalSpec.poisson(theta)
    adj = AdjustmentSpec.exp_decay(1.0)
    assert_allclose(adj_mod.bound(adj, m), 0.5, rtol=1e-14)
    assert_allclose(alpha_range(m, m, adj, adj), (-4.0, 4.0), rtol=1e-13)
    assert_allclose(adj_mod.bound(AdjustmentSpec.indicator(1), MarginalSpec.binomial(2, 0.5)), 0.75)
    assert_allclose(adj_mod.bound(AdjustmentSpec.exp_decay(2.0), MarginalSpec.exponential(1.0)), 2 / 3, rtol=1e-14)


def test_nu_examples():
    nu = adj_mod.nu(AdjustmentSpec.exp_decay(1.0), MarginalSpec.poisson(1.7))
    assert_allclose(nu, -1.7 * math.exp(-D1 * 1.7) * D1, rtol=1e-14)
    assert_allclose(nu, -0.366905, atol=1e-6)
    assert adj_mod.nu(AdjustmentSpec.phi_kernel(), MarginalSpec.normal()) == 0.0
    assert_allclose(adj_mod.nu(AdjustmentSpec.exp_quadratic(1.0, 1.0), MarginalSpec.normal()),
                    2**-1.5 * math.exp(0.25), rtol=1e-14)
    assert_allclose(adj_mod.nu(AdjustmentSpec.exp_quadratic(1.0, 1.0), MarginalSpec.normal()), 0.453969, atol=3e-6)


def test_nu_approx_indicator_examples():
    assert_allclose(adj_mod.nu_approx_indicator(100, 0.66, 66), -math.sqrt(22.44) / math.sqrt(2 * math.pi), rtol=1e-14)
    assert_allclose(adj_mod.nu_approx_indicator(100, 0.66, 66), -1.88984, atol=2e-5)
    assert abs(adj_mod.nu_approx_indicator(100, 0.5, 0)) < 1e-10
    assert_allclose(adj_mod.nu_approx_indicator(400, 0.5, 200), -3.98942, atol=1e-5)
    exact = adj_mod.nu(AdjustmentSpec.indicator(66), MarginalSpec.binomial(100, 0.66))
    assert abs(exact / adj_mod.nu_approx_indicator(100, 0.66, 66) - 1) < 0.05


def test_quadrant_nu_is_minus_sigma_phi0():
    # E X {I(X <= xi) - 1/2} = -sigma phi(0) for a normal marginal
    m = MarginalSpec.normal(0.7, 2.0)
    adj = AdjustmentSpec.quadrant()
    assert_allclose(adj_mod.nu(adj, m), -2.0 / math.sqrt(2 * math.pi), rtol=1e-14)
    assert_allclose(adj_mod.nu_numeric(adj, m), adj_mod.nu(adj, m), atol=1e-8)


# oracle equivalence over the stated grids ------------------------------------

@pytest.mark.parametrize("theta", THETAS)
@pytest.mark.parametrize("t", TS)
def test_exp_decay_poisson_oracles(theta, t):
    m, adj = MarginalSpec.poisson(theta), AdjustmentSpec.exp_decay(t)
    assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.bound(adj, m), adj_mod.bound_numeric(adj, m), atol=1e-9, rtol=0)


@pytest.mark.parametrize("theta", THETAS)
@pytest.mark.parametrize("t", TS)
def test_exp_decay_exponential_oracles(theta, t):
    m, adj = MarginalSpec.exponential(theta), AdjustmentSpec.exp_decay(t)
    assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
    # sup attained at x = 0 or approached as x grows
    assert_allclose(adj_mod.bound(adj, m), adj_mod.bound_numeric(adj, m), atol=1e-9, rtol=0)
    assert_allclose(adj_mod.bound(adj, m), max(theta, t) / (theta + t), rtol=1e-14)


@pytest.mark.parametrize("theta", THETAS)
def test_limit_brutal_oracles(theta):
    m, adj = MarginalSpec.poisson(theta), AdjustmentSpec.limit_brutal()
    assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.nu(adj, m), -theta * math.exp(-theta), rtol=1e-14)
    assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.bound(adj, m), adj_mod.bound_numeric(adj, m), atol=1e-9, rtol=0)


@pytest.mark.parametrize("n", (20, 100))
@pytest.mark.parametrize("p", (0.2, 0.5, 0.66))
def test_indicator_oracles_all_thresholds(n, p):
    m = MarginalSpec.binomial(n, p)
    for x0 in range(n):
        adj = AdjustmentSpec.indicator(x0)
        assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
        assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
        assert_allclose(adj_mod.bound(adj, m), adj_mod.bound_numeric(adj, m), atol=1e-9, rtol=0)


@pytest.mark.parametrize("n", (20, 100))
@pytest.mark.parametrize("p", (0.2, 0.5, 0.66))
def test_linear_oracles(n, p):
    m, adj = MarginalSpec.binomial(n, p), AdjustmentSpec.linear()
    assert_allclose(adj_mod.center(adj, m), p, rtol=1e-14)
    assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.nu(adj, m), p * (1 - p), rtol=1e-14)
    assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.bound(adj, m), max(p, 1 - p), rtol=1e-14)


@pytest.mark.parametrize("adj", [
    AdjustmentSpec.phi_kernel(),
    AdjustmentSpec.quadrant(),
    AdjustmentSpec.exp_quadratic(1.0, 1.0),
    AdjustmentSpec.exp_quadratic(-0.5, 2.0),
    AdjustmentSpec.exp_quadratic(0.3, 0.5),
])
@pytest.mark.parametrize("m", [MarginalSpec.normal(), MarginalSpec.normal(1.5, 0.7)])
def test_normal_family_oracles(adj, m):
    assert_allclose(adj_mod.center(adj, m), adj_mod.center_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.nu(adj, m), adj_mod.nu_numeric(adj, m), atol=1e-8, rtol=0)
    assert_allclose(adj_mod.bound(adj, m), adj_mod.bound_numeric(adj, m), atol=1e-8, rtol=0)


# invariants ----------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.1, 20.0), t=st.floats(0.05, 5.0))
def test_h_has_mean_zero_and_is_bounded(theta, t):
    m, adj = MarginalSpec.poisson(theta), AdjustmentSpec.exp_decay(t)
    xs = mg.truncated_support(m, tail=1e-16)
    hx = adj_mod.h(adj, m, xs)
    assert abs(np.sum(mg.pmf_or_pdf(m, xs) * hx)) <= 1e-10
    assert np.max(np.abs(hx)) <= adj_mod.bound(adj, m) + 1e-15


def test_rescaling_covariance():
    k = 3.0
    m = MarginalSpec.poisson(1.7)
    adj = AdjustmentSpec.exp_decay(1.0)
    big = adj.scaled(k)
    assert_allclose(adj_mod.bound(big, m), k * adj_mod.bound(adj, m), rtol=1e-14)
    assert_allclose(adj_mod.nu(big, m), k * adj_mod.nu(adj, m), rtol=1e-14)
    lo, hi = alpha_range(m, m, adj, adj)
    lo_k, hi_k = alpha_range(m, m, big, big)
    assert_allclose((lo_k, hi_k), (lo / k**2, hi / k**2), rtol=1e-14)
    # the attainable correlation range is unchanged
    assert_allclose(corr_range(m, m, big, big).hi, corr_range(m, m, adj, adj).hi, rtol=1e-13)


def test_linear_correlation_bound_shrinks_with_n():
    adj = AdjustmentSpec.linear()
    vals = [corr_range(MarginalSpec.binomial(n, 0.5), MarginalSpec.binomial(n, 0.5), adj, adj).hi
            for n in (25, 100, 400)]
    assert vals[2] < vals[1] < vals[0]
    # order 1/n for equal sizes
    assert_allclose(vals[1] * 100, vals[2] * 400, rtol=1e-12)


@pytest.mark.parametrize("adj,m", [
    (AdjustmentSpec.exp_decay(1.0), MarginalSpec.binomial(5, 0.5)),
    (AdjustmentSpec.indicator(2), MarginalSpec.poisson(1.0)),
    (AdjustmentSpec.phi_kernel(), MarginalSpec.poisson(1.0)),
    (AdjustmentSpec.limit_brutal(), MarginalSpec.exponential(1.0)),
    (AdjustmentSpec.indicator(5), MarginalSpec.binomial(5, 0.5)),
])
def test_incompatible_pairings(adj, m):
    with pytest.raises(ConfigurationError):
        adj_mod.center(adj, m)


@pytest.mark.parametrize("kwargs", [dict(family="exp_decay", t=0.0), dict(family="exp_decay", t=-1.0),
                                    dict(family="indicator", x0=-1), dict(family="indicator", x0=1.5),
                                    dict(family="exp_quadratic", t=1.0)])
def test_invalid_adjustments(kwargs):
    with pytest.raises(ConfigurationError):
        AdjustmentSpec(**kwargs)
