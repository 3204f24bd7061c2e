import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from hetcache.errors import DomainError
from hetcache.special import (EULER_GAMMA, exp_integral_E1, exp_integral_E1_scaled, exp_integral_Ei,
                              exp_integral_Ei_scaled, truncated_poisson_inverse_mean)

mpmath.mp.dps = 40


def kappa_oracle(mean):
    mu = mpmath.mpf(mean)
    s = mpmath.nsum(lambda k: mu ** k / (k * mpmath.factorial(k)), [1, mpmath.inf])
    return float(s * mpmath.exp(-mu) / -mpmath.expm1(-mu))


def test_e1_reference_values():
    assert exp_integral_E1(1.0) == pytest.approx(0.2193839344, abs=1e-10)
    assert exp_integral_E1(0.1) == pytest.approx(1.8229239585, abs=1e-10)


def test_e1_against_quadrature_oracle():
    for x in (1e-3, 0.1, 0.7, 1.0, 1.5, 3.0, 12.0, 60.0):
        ref = mpmath.quad(lambda t: mpmath.exp(-t) / t, [x, x + 1, mpmath.inf])
        assert exp_integral_E1(x) == pytest.approx(float(ref), rel=1e-12)


def test_e1_asymptote():
    x = 50.0
    assert exp_integral_E1(x) * x * math.exp(x) == pytest.approx(1.0, rel=0.02)


def test_e1_scaled_large_argument():
    x = 800.0
    assert exp_integral_E1_scaled(x) == pytest.approx(float(mpmath.exp(x) * mpmath.e1(x)), rel=1e-12)
    assert exp_integral_E1(x) >= 0.0


def test_ei_reference_values():
    assert exp_integral_Ei(1.0) == pytest.approx(1.8951178164, abs=1e-10)
    assert exp_integral_Ei(10.0) == pytest.approx(2492.2289763, rel=1e-10)


def test_ei_series_identity():
    x = 0.5
    series = sum(x ** k / (k * math.factorial(k)) for k in range(1, 30))
    assert exp_integral_Ei(x) - math.log(x) - EULER_GAMMA == pytest.approx(series, abs=1e-12)


@pytest.mark.parametrize("x", [0.01, 0.3, 2.0, 25.0, 39.9, 40.1, 80.0, 300.0])
def test_ei_against_mpmath(x):
    assert exp_integral_Ei(x) == pytest.approx(float(mpmath.ei(x)), rel=1e-10)
    assert exp_integral_Ei_scaled(x) == pytest.approx(float(mpmath.exp(-x) * mpmath.ei(x)), rel=1e-10)


def test_ei_overflow_is_inf():
    assert exp_integral_Ei(800.0) == math.inf


@pytest.mark.parametrize("fn", [exp_integral_E1, exp_integral_Ei, truncated_poisson_inverse_mean])
@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_domain_errors(fn, x):
    with pytest.raises(DomainError):
        fn(x)


def test_kappa_reference_values():
    assert truncated_poisson_inverse_mean(1.0) == pytest.approx(kappa_oracle(1.0), abs=1e-12)
    assert truncated_poisson_inverse_mean(1.0) == pytest.approx(0.76700, abs=2e-5)
    assert truncated_poisson_inverse_mean(10.0) == pytest.approx(0.11302, abs=1e-5)
    assert truncated_poisson_inverse_mean(1e-6) == pytest.approx(1.0, abs=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-8, max_value=5.0))
def test_e1_matches_alternating_series(x):
    mx = mpmath.mpf(x)
    series = -EULER_GAMMA - mpmath.log(mx) - mpmath.nsum(
        lambda k: (-mx) ** k / (k * mpmath.factorial(k)), [1, mpmath.inf])
    assert exp_integral_E1(x) == pytest.approx(float(series), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-3, max_value=50.0))
def test_kappa_closed_form_matches_series(mu):
    assert truncated_poisson_inverse_mean(mu) == pytest.approx(kappa_oracle(mu), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1e4), st.floats(min_value=1e-3, max_value=1.0))
def test_kappa_decreasing_and_bounded(mu, frac):
    lo, hi = mu, mu * (1 + frac)
    k_lo, k_hi = truncated_poisson_inverse_mean(lo), truncated_poisson_inverse_mean(hi)
    assert 0.0 < k_hi < k_lo <= 1.0
