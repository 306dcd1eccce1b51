#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest
from scipy import special

from numerics.distances_rates import (
    RateSeries,
    bootstrap_se,
    rate_fit,
    silverman_bandwidth,
    smoothed_tv_to_gauss,
    theory_slope,
    wasserstein1_to_gauss,
)
from numerics.errors import DomainError


def _quantiles(n):
    return special.ndtri((np.arange(n) + 0.5) / n)


def test_w1_of_point_mass_at_zero():
    assert wasserstein1_to_gauss([0.0, 0.0]) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)


def test_w1_of_gaussian_quantiles_is_small():
    assert wasserstein1_to_gauss(_quantiles(4000)) < 5e-3


def test_w1_detects_shift():
    assert wasserstein1_to_gauss(_quantiles(4000) + 0.3) == pytest.approx(0.3, abs=5e-3)


def test_w1_ignores_order():
    x = np.array([0.4, -1.2, 2.0, 0.1])
    assert wasserstein1_to_gauss(x) == wasserstein1_to_gauss(np.sort(x)[::-1])


@pytest.mark.parametrize("sample", [[1.0], [0.0, float("nan")], [0.0, float("inf")]])
def test_w1_rejects_bad_samples(sample):
    with pytest.raises(DomainError):
        wasserstein1_to_gauss(sample)


def test_silverman_bandwidth():
    assert silverman_bandwidth(1) == pytest.approx(1.06)
    assert silverman_bandwidth(32) == pytest.approx(0.53)
    with pytest.raises(DomainError):
        silverman_bandwidth(0)


def test_tv_proxy_bounds():
    close = smoothed_tv_to_gauss(_quantiles(2000))
    far = smoothed_tv_to_gauss(np.full(100, 5.0))
    assert 0.0 <= close < 0.05
    assert 0.9 < far <= 1.0
    with pytest.raises(DomainError):
        smoothed_tv_to_gauss([0.0, 1.0], bandwidth=0.0)
    with pytest.raises(DomainError):
        smoothed_tv_to_gauss([])


def test_theory_slopes():
    assert theory_slope("w1_xtilde", 2) == -0.5
    assert theory_slope("var_sigma", 2) == -1.0
    assert theory_slope("var_sigma", 4) == -1.5
    assert theory_slope("w1_sigma", 4) == -0.75
    assert theory_slope("w1_sigma", 6) == -1.0
    with pytest.raises(DomainError):
        theory_slope("kolmogorov", 2)
    with pytest.raises(DomainError):
        theory_slope("w1_xtilde", 1)


def test_rate_fit_exact_power_law():
    series = RateSeries(statistic="w1_xtilde", d=2)
    for ell in (8, 16, 32, 64):
        series.add(ell, 3.0 * ell ** -0.5)
    rate_fit(series)
    assert series.slope == pytest.approx(-0.5, abs=1e-12)
    assert series.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert series.slope_se == pytest.approx(0.0, abs=1e-10)
    assert series.theory_slope == -0.5


def test_rate_fit_with_log_factor():
    series = RateSeries(statistic="custom", d=2)
    for k in range(3, 9):
        ell = 2 ** k
        series.add(ell, math.log(ell) / ell)
    rate_fit(series)
    assert series.slope == pytest.approx(-0.7211, abs=1e-3)
    assert series.theory_slope is None


def test_rate_fit_errors():
    short = RateSeries(statistic="w1_xtilde", d=2)
    for ell in (8, 16, 32):
        short.add(ell, 1.0 / ell)
    with pytest.raises(DomainError):
        rate_fit(short)

    negative = RateSeries(statistic="w1_xtilde", d=2)
    for ell, y in zip((8, 16, 32, 64), (0.1, 0.05, 0.0, 0.01)):
        negative.add(ell, y)
    with pytest.raises(DomainError):
        rate_fit(negative)

    with pytest.raises(DomainError):
        short.add(16, 0.1)


def test_bootstrap_is_deterministic():
    x = _quantiles(200)
    a = bootstrap_se(x, np.mean, B=50, seed=4)
    b = bootstrap_se(x, np.mean, B=50, seed=4)
    assert a == b
    assert 0.0 < a < 0.2
    with pytest.raises(DomainError):
        bootstrap_se(x, np.mean, B=1)
