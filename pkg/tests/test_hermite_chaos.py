#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from numerics.errors import DomainError, TruncationError
from numerics.hermite_chaos import (
    check_assumption,
    chaos_coeffs,
    derivative_series,
    dominating_moment_bound,
    envelope_tail_bound,
    fit_envelope,
    hermite_eval,
    normalized_hermite_table,
    pointwise_tail_bound,
    require_certified,
)


def test_hermite_recurrence():
    assert hermite_eval(0, 1.7) == 1.0
    assert hermite_eval(3, 2.0) == pytest.approx(2.0)
    x = np.linspace(-3, 3, 13)
    assert np.allclose(hermite_eval(4, x), x ** 4 - 6 * x ** 2 + 3)


def test_normalized_table():
    x = np.array([-1.5, 0.0, 2.0])
    table = normalized_hermite_table(5, x)
    assert table.shape == (6, 3)
    assert np.allclose(table[2], (x ** 2 - 1) / math.sqrt(2))
    assert np.allclose(table[5], hermite_eval(5, x) / math.sqrt(120))


def test_exponential_closed_form():
    spec = chaos_coeffs("exponential", params={"t": 0.5})
    c = math.exp(0.125)
    for q in range(spec.Q + 1):
        assert spec.b(q) == pytest.approx(c * 0.5 ** q, rel=1e-14)
    assert spec.growth == pytest.approx((c, 0.5))
    assert spec.certified


def test_exponential_series_matches_function():
    spec = chaos_coeffs({"kind": "exponential", "params": {"t": 0.5}})
    x = np.linspace(-4, 4, 41)
    exact = np.exp(0.5 * x)
    bound = pointwise_tail_bound(spec, 0, x)
    assert np.all(np.abs(spec.series(x) - exact) <= bound + 1e-12 * exact)
    assert pointwise_tail_bound(spec, 0, 0.0) < 1e-5


def test_pointwise_tail_bound_finite_and_unknown():
    h3 = chaos_coeffs({"kind": "hermite", "params": {"p": 3}})
    assert pointwise_tail_bound(h3, 0, 1.5) == 0.0
    ind = chaos_coeffs({"kind": "indicator", "params": {"u": 0.0}})
    assert pointwise_tail_bound(ind, 0, 0.0) is None


def test_pointwise_tail_bound_shrinks_with_q():
    short = chaos_coeffs("exponential", Q=6, params={"t": 0.5})
    long = chaos_coeffs("exponential", Q=12, params={"t": 0.5})
    assert pointwise_tail_bound(long, 0, 1.0) < pointwise_tail_bound(short, 0, 1.0)
    x = np.linspace(-3, 3, 13)
    err = np.abs(short.series(x) - np.exp(0.5 * x))
    assert np.all(err <= pointwise_tail_bound(short, 0, x))


def test_explicit_truncation_tail():
    spec = chaos_coeffs("exponential", Q=4, params={"t": 1.0})
    assert spec.Q == 4
    assert spec.tail_bound == pytest.approx(envelope_tail_bound(math.exp(0.5), 1.0, 4))
    assert not spec.certified
    with pytest.raises(TruncationError):
        require_certified(spec)


def test_hermite_kind_has_rank_p():
    spec = chaos_coeffs({"kind": "hermite", "params": {"p": 3}})
    assert spec.coeffs == (0.0, 0.0, 0.0, 6.0)
    report = check_assumption(spec)
    assert report.finite_expansion
    assert not report.b2_nonzero
    assert not report.passed


def test_polynomial_change_of_basis():
    # x² = H_2 + 1
    spec = chaos_coeffs({"kind": "polynomial", "params": {"coeffs": [0, 0, 1]}})
    assert spec.coeffs == pytest.approx((1.0, 0.0, 2.0))
    assert spec.tail_bound == 0.0
    assert check_assumption(spec).passed


def test_indicator_is_unsupported():
    spec = chaos_coeffs({"kind": "indicator", "params": {"u": 0.0}})
    assert spec.b(0) == pytest.approx(0.5)
    report = check_assumption(spec)
    assert report.unsupported == "indicator"
    assert not report.passed
    with pytest.raises(TruncationError):
        require_certified(spec)


def test_exponential_passes_assumption():
    report = check_assumption(chaos_coeffs("exponential", params={"t": 0.5}))
    assert report.passed
    assert report.envelope_holds
    assert report.dominating_moment is not None


def test_callable_matches_closed_form():
    spec = chaos_coeffs(lambda x: np.exp(0.5 * x), Q=6)
    assert spec.kind == "callable"
    assert spec.b(2) == pytest.approx(math.exp(0.125) * 0.25, rel=1e-8)
    assert spec.evaluate(1.0) == pytest.approx(math.exp(0.5))


def test_fit_envelope_recovers_geometric():
    coeffs = [0.0, 0.0] + [3.0 * 0.5 ** q for q in range(2, 12)]
    C, R = fit_envelope(coeffs)
    assert C == pytest.approx(3.0, rel=1e-9)
    assert R == pytest.approx(0.5, rel=1e-9)
    assert fit_envelope([1.0, 1.0, 2.0]) is None


def test_dominating_moment_trivial_envelope():
    assert dominating_moment_bound(1.0, 0.0, 2.0) == pytest.approx(1.0)


def test_derivative_series_of_exponential():
    spec = chaos_coeffs("exponential", params={"t": 0.5})
    x = np.linspace(-4, 4, 41)
    exact = 0.5 * np.exp(0.5 * x)
    bound = pointwise_tail_bound(spec, 1, x)
    assert np.all(np.abs(derivative_series(spec, 1, x) - exact) <= bound + 1e-12 * exact)
    assert pointwise_tail_bound(spec, 1, 0.0) < 1e-5


def test_generator_variant_on_h2():
    spec = chaos_coeffs({"kind": "hermite", "params": {"p": 2}})
    x = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(derivative_series(spec, 0, x, variant="L"), -2 * (x ** 2 - 1))


@pytest.mark.parametrize("phi", [
    {"kind": "gaussian", "params": {}},
    {"kind": "exponential", "params": {}},
    {"kind": "callable"},
])
def test_invalid_phi_raises_domain_error(phi):
    with pytest.raises(DomainError):
        chaos_coeffs(phi)


def test_q_below_two_rejected():
    with pytest.raises(DomainError):
        chaos_coeffs("exponential", Q=1, params={"t": 0.5})
