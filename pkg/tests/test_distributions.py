import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bsnlr.distributions import (BSParams, SNParams, bs_logpdf, count_modes, sn_from_normal,
                                 sn_logpdf, sn_modality, sn_sample)

LOG_INV_SQRT_2PI = -0.91893853320467274178
HALF_LOG_8PI = -1.6120857137646180512


def test_params_validated():
    with pytest.raises(ValueError):
        BSParams(0.0, 1.0)
    with pytest.raises(ValueError):
        BSParams(1.0, -1.0)
    with pytest.raises(ValueError):
        SNParams(1.0, 0.0, 0.0)


def test_bs_logpdf_at_scale():
    assert bs_logpdf(1.0, BSParams(1.0, 1.0)) == pytest.approx(LOG_INV_SQRT_2PI, abs=1e-14)


def test_bs_logpdf_direct_arithmetic():
    # t=2, alpha=0.5, eta=1, written out by hand
    t, a = 2.0, 0.5
    dens = 1 / (2 * a * math.sqrt(2 * math.pi)) * (t ** -0.5 + t ** -1.5) * math.exp(
        -(t + 1 / t - 2) / (2 * a * a))
    assert bs_logpdf(t, BSParams(a, 1.0)) == pytest.approx(math.log(dens), rel=1e-14)


@given(st.floats(0.05, 50), st.floats(0.1, 5), st.floats(0.1, 10), st.floats(0.1, 10))
def test_bs_scaling(t, alpha, eta, k):
    lhs = bs_logpdf(k * t, BSParams(alpha, k * eta))
    rhs = bs_logpdf(t, BSParams(alpha, eta)) - math.log(k)
    assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, abs(rhs)))


def test_bs_domain():
    with pytest.raises(ValueError):
        bs_logpdf(0.0, BSParams(1.0, 1.0))


def test_bs_integrates_to_one():
    p = BSParams(0.7, 2.0)
    total = mpmath.quad(lambda t: mpmath.e ** bs_logpdf(float(t), p), [0, 0.5, 2, 10, 200])
    assert float(total) == pytest.approx(1.0, abs=1e-8)


def test_sn_logpdf_at_location():
    assert sn_logpdf(0.3, SNParams(2.0, 0.3, 2.0)) == pytest.approx(HALF_LOG_8PI, abs=1e-14)


def test_sn_logpdf_direct_arithmetic():
    a, sigma = 1.0, 2.0
    dens = 2 / (a * sigma * math.sqrt(2 * math.pi)) * math.cosh(0.5) * math.exp(
        -2 / a ** 2 * math.sinh(0.5) ** 2)
    assert sn_logpdf(1.0, SNParams(a, 0.0, sigma)) == pytest.approx(math.log(dens), rel=1e-14)


@given(st.floats(-30, 30), st.floats(0.1, 5))
def test_sn_symmetric(c, alpha):
    p = SNParams(alpha, 1.5, 2.0)
    assert sn_logpdf(1.5 + c, p) == pytest.approx(sn_logpdf(1.5 - c, p), rel=1e-12)
    assert sn_logpdf(c, SNParams(alpha, 0.0, 2.0)) == sn_logpdf(-c, SNParams(alpha, 0.0, 2.0))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
def test_sn_integrates_to_one(alpha):
    p = SNParams(alpha, 0.0, 2.0)
    total = mpmath.quad(lambda y: mpmath.e ** sn_logpdf(float(y), p), mpmath.linspace(-40, 40, 17))
    assert abs(float(total) - 1.0) <= 1e-8


@given(st.floats(0.01, 1e3), st.floats(0.1, 5), st.floats(0.05, 50))
def test_bs_sn_consistency(t, alpha, eta):
    lhs = sn_logpdf(math.log(t), SNParams(alpha, math.log(eta), 2.0))
    rhs = bs_logpdf(t, BSParams(alpha, eta)) + math.log(t)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(rhs)))


def test_sn_from_zero_normal_is_location():
    assert sn_from_normal(0.0, SNParams(0.5, 1.25, 2.0)) == 1.25


def test_sn_sample_deterministic():
    p = SNParams(0.5, 1.0, 2.0)
    np.testing.assert_array_equal(sn_sample(p, 11, 50), sn_sample(p, 11, 50))
    assert not np.array_equal(sn_sample(p, 11, 50), sn_sample(p, 12, 50))
    with pytest.raises(ValueError):
        sn_sample(p, 0, 0)


def test_sn_sample_mean_and_normality():
    p = SNParams(0.5, 1.0, 2.0)
    y = sn_sample(p, 20240, 100_000)
    assert abs(y.mean() - 1.0) < 0.02
    assert abs(y.mean() - 1.0) < 5 * y.std(ddof=1) / math.sqrt(y.size)
    z = 2 / p.alpha * np.sinh((y - p.mu) / p.sigma)
    skew = np.mean((z - z.mean()) ** 3) / z.std() ** 3
    assert abs(skew) < 0.05


@pytest.mark.parametrize("alpha, expected", [(1.0, "unimodal"), (2.0, "unimodal"), (3.0, "bimodal")])
def test_modality(alpha, expected):
    assert sn_modality(alpha) == expected


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.9, 2.0, 2.1, 3.0, 8.0])
def test_modality_matches_grid_count(alpha):
    modes = count_modes(alpha)
    assert modes == (2 if sn_modality(alpha) == "bimodal" else 1)
