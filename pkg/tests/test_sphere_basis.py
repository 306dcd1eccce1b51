#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest
import scipy.special as sps

from numerics.errors import DomainError, QuadratureBudgetError
from numerics.sphere_basis import (
    LOG_BRANCH_COEFF,
    asymptotic_constant,
    eigenspace_dim,
    export_rule_csv,
    gegenbauer_coefficients,
    gegenbauer_eval,
    gegenbauer_table,
    limit_estimate,
    line_measure,
    log_branch_coefficient,
    moment_asymptote,
    orthogonality_defect,
    quadrature_rule,
    reproducing_check,
    sphere_area,
    sphere_dim,
    sphere_moment,
)


def test_sphere_area_known_values():
    assert sphere_area(0) == pytest.approx(2.0)
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi ** 2)
    assert sphere_dim(2).mu_dm1 == pytest.approx(2 * math.pi)


def test_sphere_dim_rejects_circle():
    with pytest.raises(DomainError):
        sphere_dim(1)


@pytest.mark.parametrize("ell", [0, 1, 2, 7, 50])
def test_eigenspace_dim_closed_forms(ell):
    assert eigenspace_dim(2, ell) == 2 * ell + 1
    assert eigenspace_dim(3, ell) == (ell + 1) ** 2


def test_eigenspace_dim_large_ell_is_exact_integer():
    n = eigenspace_dim(6, 10_000)
    assert isinstance(n, int)
    assert n == math.comb(10_006, 6) - math.comb(10_004, 6)


def test_gegenbauer_d2_is_legendre():
    t = np.linspace(-1, 1, 41)
    for ell in (0, 1, 5, 12):
        assert np.allclose(gegenbauer_eval(2, ell, t), sps.eval_legendre(ell, t), atol=1e-13)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_gegenbauer_normalised_at_one(d):
    table = gegenbauer_table(d, 30, np.array([1.0]))
    assert np.allclose(table[:, 0], 1.0)
    assert gegenbauer_eval(d, 30, 1.0) == pytest.approx(1.0)


def test_gegenbauer_stays_bounded_for_large_ell():
    t = np.linspace(-1, 1, 1001)
    values = gegenbauer_eval(3, 5000, t)
    assert np.all(np.isfinite(values))
    assert np.max(np.abs(values)) <= 1.0 + 1e-9


def test_gegenbauer_rejects_t_outside_interval():
    with pytest.raises(DomainError):
        gegenbauer_eval(2, 3, 1.5)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_second_moment_is_exact(d):
    mu = sphere_dim(d).mu_d
    for ell in range(0, 81, 2):
        exact = mu / eigenspace_dim(d, ell)
        assert abs(sphere_moment(d, ell, 2) - exact) / exact <= 1e-10


def test_odd_moment_of_odd_degree_vanishes():
    assert abs(sphere_moment(2, 3, 3)) < 1e-12
    assert abs(sphere_moment(3, 5, 1)) < 1e-12


def test_first_moment_vanishes_for_positive_ell():
    assert abs(sphere_moment(2, 6, 1)) < 1e-12


def test_zero_moment_is_sphere_area():
    assert sphere_moment(3, 10, 0) == pytest.approx(sphere_area(3), rel=1e-12)


def test_quadrature_rule_integrates_weight():
    rule = quadrature_rule(4, 10)
    assert np.sum(rule.weights) == pytest.approx(line_measure(4), rel=1e-12)
    assert rule.exact_degree >= 10


def test_quadrature_budget(monkeypatch):
    from config.config import Config

    monkeypatch.setenv("HSL_MAX_QUADRATURE_NODES", "10")
    Config.reset()
    with pytest.raises(QuadratureBudgetError):
        quadrature_rule(2, 100)


def test_export_rule_csv(tmp_path):
    path = export_rule_csv(quadrature_rule(2, 4), tmp_path / "rule.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "node,weight"
    assert len(lines) == 1 + quadrature_rule(2, 4).size


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_reproducing_property(d):
    for ell in range(0, 25):
        assert reproducing_check(d, ell) <= 1e-10


def test_reproducing_small_cases():
    assert reproducing_check(3, 0) <= 1e-13
    assert reproducing_check(2, 8, n_points=101) <= 1e-10
    assert reproducing_check(4, 6) <= 1e-10


def test_reproducing_check_respects_budget(monkeypatch):
    from config.config import Config

    monkeypatch.setenv("HSL_MAX_QUADRATURE_NODES", "10")
    Config.reset()
    with pytest.raises(QuadratureBudgetError):
        reproducing_check(2, 12)


@pytest.mark.parametrize("d", [2, 3])
def test_orthogonality(d):
    assert orthogonality_defect(d, 20) <= 1e-10


def test_coefficients_recover_polynomial():
    # t² = (1/3)·G_0 + (2/3)·G_2 trên S²
    coeffs = gegenbauer_coefficients(2, lambda t: t ** 2, 2)
    assert np.allclose(coeffs, [1 / 3, 0.0, 2 / 3], atol=1e-13)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_second_order_constant_closed_form(d):
    dim = sphere_dim(d)
    expected = math.factorial(d - 1) * dim.mu_d / (4 * dim.mu_dm1)
    assert asymptotic_constant(d, 2) == pytest.approx(expected)


def test_third_order_constant_d2():
    # ∫_0^∞ J_0(u)³ u du = 2/(π√3)
    assert asymptotic_constant(2, 3) == pytest.approx(2 / (math.pi * math.sqrt(3)), rel=1e-4)


def test_log_branch_has_no_constant():
    with pytest.raises(DomainError):
        asymptotic_constant(2, 4)


def test_asymptotic_ratios_at_large_ell():
    ell = 200
    assert sphere_moment(2, ell, 3) / moment_asymptote(2, 3, ell) == pytest.approx(1.0, abs=0.10)
    assert sphere_moment(3, ell, 2) / moment_asymptote(3, 2, ell) == pytest.approx(1.0, abs=0.10)


def test_limit_estimate_approaches_constant():
    assert limit_estimate(3, 2, 400) == pytest.approx(asymptotic_constant(3, 2), rel=0.01)


def test_log_branch_asymptote_formula():
    assert moment_asymptote(2, 4, 100) == pytest.approx(12 * math.log(100) / (math.pi * 100 ** 2))


def test_log_branch_growth_coefficient():
    assert log_branch_coefficient(200) == pytest.approx(LOG_BRANCH_COEFF, rel=0.10)
    with pytest.raises(DomainError):
        log_branch_coefficient(7)
