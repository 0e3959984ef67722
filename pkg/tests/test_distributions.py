import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr
from scipy.stats import norm

from famlvm import (DfTooSmall, NotPositiveDefinite, RngHandle, sample_beta,
                    sample_inv_gamma, sample_inv_wishart, sample_mvn,
                    sample_truncated_normal)


def _tn_positive_moments(mu, sigma):
    """Closed-form mean/var of N(mu, sigma^2) truncated to (0, inf)."""
    a = -mu / sigma
    h = norm.pdf(a) / ndtr(-a)
    mean = mu + sigma * h
    var = sigma ** 2 * (1 + a * h - h ** 2)
    return mean, var


@pytest.mark.parametrize("mu,sigma", [(0.0, 1.0), (2.0, 0.5), (-3.0, 1.0)])
def test_truncated_normal_positive_moments(mu, sigma):
    gen = RngHandle(10).generator
    n = 40000
    x = sample_truncated_normal(np.full(n, mu), sigma, "positive", gen)
    mean, var = _tn_positive_moments(mu, sigma)
    assert np.all(x > 0)
    assert abs(x.mean() - mean) < 4 * np.sqrt(var / n)
    assert abs(x.var() - var) < 0.05 * var


def test_truncated_normal_negative_side():
    gen = RngHandle(11).generator
    x = sample_truncated_normal(np.full(20000, 1.0), 1.0, "negative", gen)
    assert np.all(x <= 0)
    # symmetry: -TN_neg(mu) has the law of TN_pos(-mu)
    mean, _ = _tn_positive_moments(-1.0, 1.0)
    assert abs(-x.mean() - mean) < 0.02


def test_truncated_normal_extreme_tail_is_finite_and_in_support():
    gen = RngHandle(12).generator
    x = sample_truncated_normal(np.full(1000, -50.0), 1.0, "positive", gen)
    assert np.all(np.isfinite(x)) and np.all(x > 0)
    # conditioned that far out, the draw hugs the truncation boundary
    # (roughly Exp(rate 50), so even the max of 1000 draws stays tiny)
    assert x.max() < 0.5
    assert np.median(x) < 0.02
    y = sample_truncated_normal(np.full(1000, 50.0), 1.0, "negative", gen)
    assert np.all(np.isfinite(y)) and np.all(y <= 0)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-60, 60), sigma=st.floats(0.01, 20),
       seed=st.integers(0, 2 ** 20))
def test_truncated_normal_support_property(mu, sigma, seed):
    gen = RngHandle(seed).generator
    assert sample_truncated_normal(np.array([mu]), sigma, "positive",
                                   gen)[0] > 0
    assert sample_truncated_normal(np.array([mu]), sigma, "negative",
                                   gen)[0] <= 0


def test_truncated_normal_no_truncation_matches_normal():
    gen = RngHandle(13).generator
    x = sample_truncated_normal(np.full(30000, 2.0), 3.0, "none", gen)
    assert abs(x.mean() - 2.0) < 0.08
    assert abs(x.std() - 3.0) < 0.08


def test_truncated_normal_rejects_bad_inputs():
    gen = RngHandle(0).generator
    with pytest.raises(ValueError):
        sample_truncated_normal(np.zeros(2), -1.0, "positive", gen)
    with pytest.raises(ValueError):
        sample_truncated_normal(np.zeros(2), 1.0, "sideways", gen)


def test_inv_gamma_moments():
    gen = RngHandle(14).generator
    shape, rate = 6.0, 3.0
    x = sample_inv_gamma(shape, rate, gen, size=60000)
    mean = rate / (shape - 1)
    var = rate ** 2 / ((shape - 1) ** 2 * (shape - 2))
    assert abs(x.mean() - mean) < 4 * np.sqrt(var / 60000)
    assert abs(x.var() - var) < 0.1 * var
    with pytest.raises(ValueError):
        sample_inv_gamma(-1.0, 1.0, gen)


def test_inv_wishart_mean():
    gen = RngHandle(15).generator
    scale = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
    df = 10.0
    draws = np.mean([sample_inv_wishart(df, scale, gen)
                     for _ in range(6000)], axis=0)
    expected = scale / (df - 3 - 1)
    np.testing.assert_allclose(draws, expected, rtol=0.08, atol=0.02)


def test_inv_wishart_draws_are_spd():
    gen = RngHandle(16).generator
    for _ in range(50):
        w = sample_inv_wishart(4, np.eye(2) * 10.0, gen)
        np.testing.assert_allclose(w, w.T)
        assert np.all(np.linalg.eigvalsh(w) > 0)


def test_inv_wishart_df_too_small():
    with pytest.raises(DfTooSmall):
        sample_inv_wishart(1.5, np.eye(3), RngHandle(0).generator)


def test_mvn_mean_and_covariance():
    gen = RngHandle(17).generator
    mean = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.8], [0.8, 1.0]])
    x = np.stack([sample_mvn(mean, cov, gen) for _ in range(20000)])
    np.testing.assert_allclose(x.mean(axis=0), mean, atol=0.05)
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.07)


def test_mvn_rejects_non_spd():
    gen = RngHandle(0).generator
    with pytest.raises(NotPositiveDefinite):
        sample_mvn(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), gen)
    with pytest.raises(NotPositiveDefinite):
        sample_mvn(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]), gen)


def test_beta_moments():
    gen = RngHandle(18).generator
    x = sample_beta(2.0, 5.0, gen, size=40000)
    assert abs(x.mean() - 2.0 / 7.0) < 0.01
    with pytest.raises(ValueError):
        sample_beta(0.0, 1.0, gen)
