#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import itertools
import math

import pytest

from numerics.diagram_engine import DiagramIndex, enumerate_A, extract_graph, spanning_tree_bound
from numerics.errors import DomainError, NotSeriesParallelError
from numerics.graph_integrals import (
    GauntCase,
    GraphIntegralSpec,
    expand_power,
    four_point_integral,
    frak_I,
    gamma_hat,
    gaunt_identity_check,
    graph_integral,
    is_series_parallel,
    kappa_id,
    mc_graph_integral,
    prop_I_scan,
    reduce_graph,
)
from numerics.sphere_basis import eigenspace_dim

MU2 = 4 * math.pi


def _spec(n, edges, ell=4, d=2):
    return GraphIntegralSpec.from_edges(d, ell, n, edges)


def test_single_edge_is_second_moment():
    n = eigenspace_dim(2, 4)
    assert graph_integral(_spec(2, [(0, 1, 2)])) == pytest.approx(MU2 ** 2 / n, rel=1e-12)


def test_triangle_uses_reproducing_kernel():
    n = eigenspace_dim(2, 4)
    assert graph_integral(_spec(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])) == pytest.approx(MU2 ** 3 / n ** 2, rel=1e-12)


def test_four_cycle_d3():
    n = eigenspace_dim(3, 6)
    mu = 2 * math.pi ** 2
    spec = _spec(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)], ell=6, d=3)
    assert graph_integral(spec) == pytest.approx(mu ** 4 / n ** 3, rel=1e-12)


def test_edgeless_graph():
    assert graph_integral(_spec(3, [])) == pytest.approx(MU2 ** 3)


def test_zero_exponents_and_parallel_edges_merge():
    spec = _spec(2, [(1, 0, 1), (0, 1, 1), (0, 1, 0)])
    assert spec.edges == ((0, 1, 2),)


@pytest.mark.parametrize("edges", [[(0, 0, 1)], [(0, 5, 1)], [(0, 1, -1)]])
def test_invalid_edges(edges):
    with pytest.raises(DomainError):
        _spec(2, edges)


def test_expand_power_at_one():
    for r in (2, 3, 5):
        assert expand_power(2, 6, r).at_one() == pytest.approx(1.0, abs=1e-10)
    assert expand_power(3, 4, 1).degree == 4


@pytest.mark.parametrize("d, ell", [(2, 4), (2, 10), (3, 8)])
def test_gamma_hat_first_order(d, ell):
    assert gamma_hat(d, ell, 1) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("family, exponents", [
    ("A1", (2, 2)),
    ("A1", (3, 4)),
    ("B", (2, 3, 1)),
    ("B", (2, 2, 2)),
    ("C", (2, 2, 0)),
    ("C", (3, 2, 1)),
])
@pytest.mark.parametrize("ell", [4, 8])
def test_gaunt_ratio_matches_pinned_constants(golden, family, exponents, ell):
    pinned = golden("gaunt_constants.json")
    report = gaunt_identity_check(2, ell, GauntCase(family, exponents))
    assert report.ratio == pytest.approx(pinned[family], rel=1e-8)
    assert report.rel_dev < 1e-8


@pytest.mark.parametrize("family, exponents", [("A1", (1, 2)), ("B", (2, 2, 0)), ("C", (2, 1, 0)), ("D", (2, 2))])
def test_gaunt_case_validation(family, exponents):
    with pytest.raises(DomainError):
        GauntCase(family, exponents)


def test_k4_is_not_series_parallel():
    spec = _spec(4, [(i, j, 1) for i, j in itertools.combinations(range(4), 2)])
    assert not is_series_parallel(spec)
    with pytest.raises(NotSeriesParallelError):
        reduce_graph(spec)


def test_reduction_order_does_not_matter():
    spec = _spec(4, [(0, 1, 2), (0, 2, 1), (1, 2, 3), (1, 3, 1), (2, 3, 2)], ell=6)
    values = [
        reduce_graph(spec).value,
        reduce_graph(spec, order=(3, 0)).value,
        reduce_graph(spec, order=(0, 3)).value,
        reduce_graph(spec, merge_first=True).value,
    ]
    for v in values[1:]:
        assert v == pytest.approx(values[0], rel=1e-10)


def test_mc_agrees_with_spectral():
    spec = _spec(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], ell=2)
    exact = graph_integral(spec)
    est = mc_graph_integral(spec, 40_000, seed=11)
    assert abs(est.value - exact) <= 5 * est.abs_err
    pinned = mc_graph_integral(spec, 40_000, seed=11, pin_first=True)
    assert abs(pinned.value - exact) <= 5 * pinned.abs_err


def test_mc_is_thread_invariant():
    spec = _spec(2, [(0, 1, 2)], ell=4)
    single = mc_graph_integral(spec, 20_000, seed=3, shard_size=4_000)
    multi = mc_graph_integral(spec, 20_000, seed=3, shard_size=4_000, threads=4)
    assert single.value == multi.value
    assert single.abs_err == multi.abs_err
    assert single.samples == 20_000


def test_mc_needs_enough_samples():
    with pytest.raises(DomainError):
        mc_graph_integral(_spec(2, [(0, 1, 1)]), 100, seed=1)


def test_frak_i_cycle_value():
    kappa = DiagramIndex.from_upper(4, {(0, 2): 1, (1, 3): 1})
    est = frak_I((2, 2, 2, 2), kappa, 4)
    n = eigenspace_dim(2, 4)
    assert est.method == "spectral"
    assert est.value == pytest.approx(MU2 ** 4 / n ** 3, rel=1e-12)
    assert kappa_id(kappa) == "0-1-0-0-1-0"


def test_frak_i_rejects_wrong_row_sums():
    kappa = DiagramIndex.from_upper(4, {(0, 1): 2})
    with pytest.raises(DomainError):
        frak_I((2, 2, 2, 2), kappa, 4)
    with pytest.raises(DomainError):
        frak_I((1, 2, 2, 2), kappa, 4)


def test_doubled_matching_respects_spanning_tree_bound():
    for kappa in enumerate_A((2, 2, 2, 2)):
        doubled = DiagramIndex.from_upper(4, {(i, j): 2 * k for i, j, k in kappa.upper()})
        est = four_point_integral(2, 8, doubled, extra=())
        assert est.method == "spectral"
        assert abs(est.value) <= spanning_tree_bound(2, 8, kappa)


def test_prop_i_scan_small_grid():
    scan = prop_I_scan([4, 8], q_max=2)
    assert len(scan.rows) == 4
    assert scan.r_histogram == {2: 4}
    for ell in (4, 8):
        n = eigenspace_dim(2, ell)
        assert scan.max_per_ell[ell] == pytest.approx(ell ** 3 * MU2 ** 4 / n ** 3, rel=1e-10)
    assert all(r["mc_ok"] for r in scan.rows)


def test_prop_i_scan_reports_component_count():
    scan = prop_I_scan([4], q_max=3)
    kappas = {}
    for q in itertools.product(range(2, 4), repeat=4):
        for kappa in enumerate_A([v - 1 for v in q]):
            kappas[(q, kappa_id(kappa))] = kappa
    assert scan.rows
    for r in scan.rows:
        kappa = kappas[((r["q1"], r["q2"], r["q3"], r["q4"]), r["kappa_id"])]
        assert r["N"] >= 1
        assert r["N"] == extract_graph(kappa).n_components


def test_prop_i_scan_validates_input():
    with pytest.raises(DomainError):
        prop_I_scan([5], q_max=2)
    with pytest.raises(DomainError):
        prop_I_scan([4], q_max=1)
