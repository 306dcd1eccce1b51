#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from numerics.errors import DomainError, TruncationError
from numerics.field_sampler import sample_field, sphere_grid
from numerics.functionals_stats import (
    analytic_moments,
    chaos_projection,
    integrate_functional,
    jackknife_variance,
    sigma_sample,
    sigma_variance_diagram,
    sigma_variance_scan,
    simulate_batch,
    standardize,
)
from numerics.hermite_chaos import chaos_coeffs
from numerics.sphere_basis import eigenspace_dim

MU2 = 4 * math.pi
H2 = chaos_coeffs({"kind": "hermite", "params": {"p": 2}})
EXP = chaos_coeffs({"kind": "exponential", "params": {"t": 0.5}})


def test_pure_h2_moments():
    ell = 8
    n = eigenspace_dim(2, ell)
    m = analytic_moments(2, ell, H2)
    assert m.mean == 0.0
    assert m.variance == pytest.approx(2 * MU2 ** 2 / n, rel=1e-12)
    assert m.sigma_mean == pytest.approx(2.0, abs=1e-12)
    assert m.eta_rate == pytest.approx(1 / ell)


def test_exponential_moments():
    ell = 16
    m = analytic_moments(2, ell, EXP)
    assert m.mean == pytest.approx(math.exp(0.125) * MU2, rel=1e-14)
    assert m.shares[2] == pytest.approx(m.variance_asymptote, rel=1e-10)
    assert m.variance > m.shares[2]
    assert m.eta_rate == pytest.approx(math.log(ell) / ell)


def test_indicator_moments_refused():
    with pytest.raises(TruncationError):
        analytic_moments(2, 8, chaos_coeffs({"kind": "indicator", "params": {"u": 0.0}}))


def test_standardize():
    m = analytic_moments(2, 8, H2)
    assert standardize(m.mean + 2 * math.sqrt(m.variance), m) == pytest.approx(2.0)


def test_chaos_projections_sum_to_functional():
    spec = chaos_coeffs({"kind": "polynomial", "params": {"coeffs": [0, 0, 1]}})
    grid = sphere_grid(2, 6)
    real = sample_field(2, 6, grid, seed=8)
    total = sum(chaos_projection(real, q, spec) for q in range(spec.Q + 1))
    assert total == pytest.approx(integrate_functional(real, spec), rel=1e-12)
    assert chaos_projection(real, 1, spec) == 0.0


def test_sigma_paths_agree():
    ell = 4
    grid = sphere_grid(2, ell)
    real = sample_field(2, ell, grid, seed=21)
    spectral = sigma_sample(real, EXP, path="spectral")
    dense = sigma_sample(real, EXP, path="dense")
    assert spectral == pytest.approx(dense, rel=1e-10)
    assert sigma_sample(real, EXP) == spectral
    with pytest.raises(DomainError):
        sigma_sample(real, EXP, path="fft")


def test_simulate_batch_thread_invariant():
    one = simulate_batch(2, 4, H2, 8, seed=99, threads=1, shard_size=3)
    many = simulate_batch(2, 4, H2, 8, seed=99, threads=3, shard_size=3)
    assert [s.to_json() for s in one.samples] == [s.to_json() for s in many.samples]
    assert [s.replicate for s in one.samples] == list(range(8))
    assert one.x_stats.mean == many.x_stats.mean
    assert one.sigma_stats.count == 8


def test_simulate_batch_mean_is_unbiased():
    batch = simulate_batch(2, 4, EXP, 400, seed=7, with_sigma=False)
    stats = batch.xtilde_stats
    assert stats.count == 400
    assert abs(stats.mean) <= 4 * stats.std_error
    assert batch.sigma_stats.count == 0
    assert batch.summary()["sigma"] is None


def test_simulate_batch_validates_input():
    with pytest.raises(DomainError):
        simulate_batch(2, 5, H2, 4, seed=1)
    with pytest.raises(DomainError):
        simulate_batch(2, 4, H2, 0, seed=1)


def test_jackknife_variance():
    values = np.arange(40, dtype=float)
    var, se = jackknife_variance(values)
    assert var == pytest.approx(np.var(values, ddof=1))
    assert se > 0
    with pytest.raises(DomainError):
        jackknife_variance(values[:30])


def test_sigma_variance_scan_needs_reps():
    with pytest.raises(DomainError):
        sigma_variance_scan(2, [4, 8], H2, reps=100, seed=1)


def test_sigma_variance_diagram_for_h2():
    n = eigenspace_dim(2, 4)
    result = sigma_variance_diagram(2, 4, H2, q_max=2)
    assert result.terms == 2
    assert result.mc_terms == 0
    assert result.value == pytest.approx(8 / n, rel=1e-10)
    with pytest.raises(DomainError):
        sigma_variance_diagram(2, 4, H2, q_max=1)
