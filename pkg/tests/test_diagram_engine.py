#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import math
from fractions import Fraction

import pytest

from numerics.diagram_engine import (
    DiagramIndex,
    enumerate_A,
    even_n_constant,
    extract_graph,
    in_N,
    joint_hermite_moment,
    spanning_tree_bound,
    split_N_C,
    wick_oracle,
)
from numerics.errors import BudgetError, DomainError

HALF = Fraction(1, 2)


def _cov(*upper):
    """Ma trận 3×3 từ (ρ12, ρ13, ρ23)."""
    a, b, c = upper
    return [[1, a, b], [a, 1, c], [b, c, 1]]


@pytest.mark.parametrize("q, count", [
    ((1, 1, 1, 1), 3),
    ((2, 2), 1),
    ((2, 2, 2), 1),
    ((1, 1), 1),
    ((1, 2), 0),
    ((1, 1, 1), 0),
    ((0,), 1),
    ((2,), 0),
])
def test_enumerate_counts(q, count):
    assert len(list(enumerate_A(q))) == count


def test_enumerate_rows_match_targets():
    q = (3, 2, 2, 3)
    kappas = list(enumerate_A(q))
    assert kappas
    assert len({k.k for k in kappas}) == len(kappas)
    for kappa in kappas:
        assert tuple(sum(row) for row in kappa.k) == q
        assert all(kappa.k[i][i] == 0 for i in range(4))


def test_enumerate_rejects_negative():
    with pytest.raises(DomainError):
        list(enumerate_A((-1, 1)))


def test_two_point_moment():
    rho = Fraction(1, 3)
    assert joint_hermite_moment((2, 2), [[1, rho], [rho, 1]]) == Fraction(2, 9)
    # E[H_q(Z)²] = q!
    assert joint_hermite_moment((4, 4)) == 24


def test_three_point_moment():
    assert joint_hermite_moment((2, 2, 2), _cov(HALF, HALF, HALF)) == 1


def test_float_covariance_returns_float():
    value = joint_hermite_moment((2, 2), [[1.0, 0.5], [0.5, 1.0]])
    assert isinstance(value, float)
    assert value == pytest.approx(0.5)


@pytest.mark.parametrize("q", [(2, 3, 1), (3, 3, 2), (1, 1, 2), (4, 2, 2)])
def test_diagram_matches_wick_oracle(q):
    cov = _cov(HALF, -HALF, Fraction(1))
    assert joint_hermite_moment(q, cov) == wick_oracle(q, cov)


def test_four_point_oracle():
    cov = [
        [1, HALF, 0, -HALF],
        [HALF, 1, HALF, 0],
        [0, HALF, 1, HALF],
        [-HALF, 0, HALF, 1],
    ]
    for q in [(1, 1, 1, 1), (2, 2, 1, 1), (3, 1, 2, 2)]:
        assert joint_hermite_moment(q, cov) == wick_oracle(q, cov)


def test_oracle_budget():
    with pytest.raises(BudgetError):
        wick_oracle((13, 13))


def test_covariance_must_be_symmetric():
    with pytest.raises(DomainError):
        joint_hermite_moment((1, 1), [[1, HALF], [Fraction(1, 3), 1]])
    with pytest.raises(DomainError):
        joint_hermite_moment((1, 1), [[2, 0], [0, 1]])


def test_split_n_c():
    n_set, c_set = split_N_C((1, 1, 1, 1))
    assert len(n_set) == 1
    assert len(c_set) == 2
    assert all(in_N(k) for k in n_set)


def test_extract_graph_components():
    kappa = DiagramIndex.from_upper(4, {(0, 1): 1, (2, 3): 1})
    graph = extract_graph(kappa)
    assert graph.n_components == graph.n_components_dfs == 2
    assert graph.R == 2
    assert graph.components == [(0, 1), (2, 3)]
    assert all(graph.is_tree_per_component)
    assert graph.is_N

    cycle = DiagramIndex.from_upper(4, {(0, 1): 1, (1, 2): 1, (2, 3): 1, (0, 3): 1})
    g = extract_graph(cycle)
    assert g.n_components == 1
    assert g.is_tree_per_component == [False]
    assert not g.is_N


def test_from_upper_rejects_diagonal():
    with pytest.raises(DomainError):
        DiagramIndex.from_upper(2, {(1, 1): 2})


def test_spanning_tree_bound_formula():
    kappa = DiagramIndex.from_upper(4, {(0, 1): 2, (2, 3): 2})
    base = 32 * math.pi ** 2
    expected = base ** 2 * (4 * math.pi) ** 2 / 16 ** 2
    assert spanning_tree_bound(2, 16, kappa) == pytest.approx(expected)

    connected = DiagramIndex.from_upper(4, {(0, 1): 1, (1, 2): 1, (2, 3): 1, (0, 3): 1})
    assert spanning_tree_bound(2, 8, connected) == pytest.approx(base ** 3 * 4 * math.pi / 8 ** 3)


def test_even_n_constant():
    mu = 4 * math.pi
    assert even_n_constant(2, 1) == pytest.approx((2 * mu * mu) ** 2 * mu)
    with pytest.raises(DomainError):
        even_n_constant(2, 0)
