#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Công thức diagram cho E[∏ H_{q_i}(Z_i)].

- `enumerate_A`: liệt kê tập 𝒜_{q_1..q_n} các ma trận nguyên đối xứng κ,
  đường chéo 0, tổng hàng k_{i·} = q_i; thứ tự từ điển trên tam giác trên
  đọc theo hàng.
- `joint_hermite_moment`: ∏q_r!·Σ_κ ∏_{i<j} ρ_ij^{k_ij}/k_ij!, tính đúng bằng
  `Fraction` khi hiệp phương sai là số hữu tỉ.
- `wick_oracle`: oracle độc lập (khai triển đơn thức + định lý Isserlis).
- `extract_graph`: đồ thị ngoại suy 𝔊_κ, số thành phần liên thông N_κ, R.
- `spanning_tree_bound`: cận C_d(N_κ)/ℓ^{(d−1)(n−N_κ)}.
"""

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from config.config import Config
from numerics.errors import BudgetError, DomainError
from numerics.sphere_basis import asymptotic_constant, sphere_dim

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]


# ==================== Kiểu dữ liệu ====================

@dataclass(frozen=True)
class DiagramIndex:
    """Ma trận κ (n×n, đối xứng, đường chéo 0) cùng tổng hàng mục tiêu."""

    n: int
    k: Tuple[Tuple[int, ...], ...]
    row_targets: Tuple[int, ...]

    def entry(self, i: int, j: int) -> int:
        return self.k[i][j]

    def upper(self) -> List[Tuple[int, int, int]]:
        """Các cặp (i, j, k_ij) với i < j và k_ij ≠ 0."""
        return [
            (i, j, self.k[i][j])
            for i in range(self.n)
            for j in range(i + 1, self.n)
            if self.k[i][j]
        ]

    def to_json(self) -> List[List[int]]:
        return [list(row) for row in self.k]

    @classmethod
    def from_upper(cls, n: int, entries: Dict[Tuple[int, int], int]) -> "DiagramIndex":
        mat = [[0] * n for _ in range(n)]
        for (i, j), v in entries.items():
            if i == j:
                raise DomainError("κ không được có phần tử đường chéo khác 0.")
            mat[i][j] = mat[j][i] = int(v)
        return cls(n=n, k=tuple(tuple(r) for r in mat), row_targets=tuple(sum(r) for r in mat))


@dataclass
class ExtractedGraph:
    n: int
    edges: Dict[Tuple[int, int], int]
    n_components: int
    n_components_dfs: int
    components: List[Tuple[int, ...]]
    is_tree_per_component: List[bool]
    R: int
    is_N: bool
    graph: nx.Graph = field(repr=False, default=None)


# ==================== Liệt kê 𝒜 ====================

def _pairs(n: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def enumerate_A(q: Sequence[int]) -> Iterator[DiagramIndex]:
    """Sinh mọi κ ∈ 𝒜_q đúng một lần, theo thứ tự từ điển trên tam giác trên.

    Quay lui trên từng phần tử (i, j); phần tử cuối mỗi hàng bị ép bằng phần dư
    của hàng đó nên không bao giờ để lại hàng thiếu.
    """
    q = tuple(int(v) for v in q)
    n = len(q)
    if n < 1:
        raise DomainError("Cần ít nhất 1 hàng.")
    if any(v < 0 for v in q):
        raise DomainError(f"Mọi q_i phải ≥ 0, nhận được {q}.")
    if n == 1:
        if q[0] == 0:
            yield DiagramIndex(n=1, k=((0,),), row_targets=q)
        return
    if sum(q) % 2:
        return

    pairs = _pairs(n)
    values = [0] * len(pairs)
    residual = list(q)

    def build() -> DiagramIndex:
        mat = [[0] * n for _ in range(n)]
        for (i, j), v in zip(pairs, values):
            mat[i][j] = mat[j][i] = v
        return DiagramIndex(n=n, k=tuple(tuple(r) for r in mat), row_targets=q)

    def rec(pos: int) -> Iterator[DiagramIndex]:
        if pos == len(pairs):
            if residual[n - 1] == 0:
                yield build()
            return
        i, j = pairs[pos]
        if j == i + 1 and residual[i] > sum(residual[i + 1:]):
            return
        if j == n - 1:
            choices = [residual[i]] if residual[i] <= residual[j] else []
        else:
            choices = range(min(residual[i], residual[j]) + 1)
        for v in choices:
            values[pos] = v
            residual[i] -= v
            residual[j] -= v
            yield from rec(pos + 1)
            residual[i] += v
            residual[j] += v
        values[pos] = 0

    yield from rec(0)


def in_N(kappa: DiagramIndex) -> bool:
    """κ thuộc 𝒩 (n = 4): chỉ có cạnh (1,2) và (3,4), không có cạnh chéo."""
    if kappa.n != 4:
        return False
    return all(kappa.entry(i, j) == 0 for i, j in ((0, 2), (0, 3), (1, 2), (1, 3)))


def split_N_C(q: Sequence[int]) -> Tuple[List[DiagramIndex], List[DiagramIndex]]:
    """Chia 𝒜_q thành (𝒩, 𝒞 = 𝒜 \\ 𝒩)."""
    n_set, c_set = [], []
    for kappa in enumerate_A(q):
        (n_set if in_N(kappa) else c_set).append(kappa)
    return n_set, c_set


# ==================== Moment Hermite ====================

def _is_exact(x: Any) -> bool:
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


def _normalize_cov(cov: Any, n: int) -> Tuple[List[List[Number]], bool]:
    rows = [list(r) for r in (cov.tolist() if isinstance(cov, np.ndarray) and cov.dtype != object else cov)]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise DomainError(f"Ma trận hiệp phương sai phải là {n}×{n}.")
    exact = all(_is_exact(v) for r in rows for v in r)
    if exact:
        mat = [[Fraction(int(v)) if isinstance(v, np.integer) else Fraction(v) for v in r] for r in rows]
        for i in range(n):
            if mat[i][i] != 1:
                raise DomainError("Đường chéo hiệp phương sai phải bằng 1.")
            for j in range(i + 1, n):
                if mat[i][j] != mat[j][i]:
                    raise DomainError("Ma trận hiệp phương sai phải đối xứng.")
        return mat, True
    mat = [[float(v) for v in r] for r in rows]
    for i in range(n):
        if abs(mat[i][i] - 1.0) > 1e-12:
            raise DomainError("Đường chéo hiệp phương sai phải bằng 1.")
        for j in range(i + 1, n):
            if abs(mat[i][j] - mat[j][i]) > 1e-12:
                raise DomainError("Ma trận hiệp phương sai phải đối xứng.")
    return mat, False


def _default_cov(n: int) -> List[List[Fraction]]:
    return [[Fraction(1)] * n for _ in range(n)]


def joint_hermite_moment(q: Sequence[int], cov: Any = None) -> Number:
    """E[∏ H_{q_r}(Z_r)] theo công thức diagram.

    `cov` = None nghĩa là mọi tương quan bằng 1 (Z_1 = ... = Z_n).
    Trả về `Fraction` khi mọi phần tử là int/Fraction, ngược lại float.
    """
    q = [int(v) for v in q]
    n = len(q)
    mat, exact = (_default_cov(n), True) if cov is None else _normalize_cov(cov, n)
    zero = Fraction(0) if exact else 0.0
    total = zero
    for kappa in enumerate_A(q):
        term = Fraction(1) if exact else 1.0
        for i, j, k in kappa.upper():
            term *= mat[i][j] ** k / math.factorial(k)
        total += term
    prefactor = math.prod(math.factorial(v) for v in q)
    return total * prefactor


@functools.lru_cache(maxsize=64)
def _hermite_monomials(q: int) -> Tuple[int, ...]:
    """Hệ số nguyên của H_q theo đơn thức x^0..x^q."""
    prev, cur = (1,), (0, 1)
    if q == 0:
        return prev
    for m in range(1, q):
        nxt = [0] * (m + 2)
        for i, c in enumerate(cur):
            nxt[i + 1] += c
        for i, c in enumerate(prev):
            nxt[i] -= m * c
        prev, cur = cur, tuple(nxt)
    return cur


def _gaussian_monomial_moment(m: Sequence[int], mat: List[List[Number]], exact: bool) -> Number:
    """E[∏ Z_i^{m_i}] theo Isserlis: tổng trên ma trận đếm cặp p (p_ii là cặp tự ghép)."""
    n = len(m)
    pairs = _pairs(n)
    counts = [0] * len(pairs)
    used = [0] * n
    total = Fraction(0) if exact else 0.0
    numerator = math.prod(math.factorial(v) for v in m)

    def rec(pos: int):
        nonlocal total
        if pos == len(pairs):
            denom = 1
            for i in range(n):
                rest = m[i] - used[i]
                if rest < 0 or rest % 2:
                    return
                p_ii = rest // 2
                denom *= 2 ** p_ii * math.factorial(p_ii)
            weight = Fraction(1) if exact else 1.0
            for (i, j), c in zip(pairs, counts):
                if c:
                    weight *= mat[i][j] ** c
                    denom *= math.factorial(c)
            total += weight * Fraction(numerator, denom) if exact else weight * numerator / denom
            return
        i, j = pairs[pos]
        for c in range(min(m[i] - used[i], m[j] - used[j]) + 1):
            counts[pos] = c
            used[i] += c
            used[j] += c
            rec(pos + 1)
            used[i] -= c
            used[j] -= c
        counts[pos] = 0

    rec(0)
    return total


def wick_oracle(q: Sequence[int], cov: Any = None) -> Number:
    """Oracle: khai triển từng H_{q_i} thành đơn thức rồi lấy moment Gauss (Isserlis)."""
    q = [int(v) for v in q]
    budget = Config().WICK_BUDGET
    if sum(q) > budget:
        raise BudgetError(f"Σq = {sum(q)} vượt ngân sách Isserlis {budget}.")
    n = len(q)
    mat, exact = (_default_cov(n), True) if cov is None else _normalize_cov(cov, n)
    polys = [_hermite_monomials(v) for v in q]
    total = Fraction(0) if exact else 0.0
    supports = [[(deg, c) for deg, c in enumerate(p) if c] for p in polys]
    for combo in itertools.product(*supports):
        coef = math.prod(c for _, c in combo)
        degrees = [deg for deg, _ in combo]
        if sum(degrees) % 2:
            continue
        total += coef * _gaussian_monomial_moment(degrees, mat, exact)
    return total


# ==================== Đồ thị ngoại suy ====================

def extract_graph(kappa: DiagramIndex) -> ExtractedGraph:
    """Đồ thị 𝔊_κ: cạnh (i, j) khi k_ij ≠ 0; đếm thành phần bằng union-find và DFS."""
    edges = {(i, j): k for i, j, k in kappa.upper()}
    uf = UnionFind(range(kappa.n))
    for i, j in edges:
        uf.union(i, j)
    groups = sorted(tuple(sorted(s)) for s in uf.to_sets())

    g = nx.Graph()
    g.add_nodes_from(range(kappa.n))
    g.add_edges_from(edges)
    dfs_components = list(nx.connected_components(g))
    trees = [nx.is_tree(g.subgraph(c)) for c in groups]

    return ExtractedGraph(
        n=kappa.n,
        edges=edges,
        n_components=len(groups),
        n_components_dfs=len(dfs_components),
        components=groups,
        is_tree_per_component=trees,
        R=len(edges),
        is_N=in_N(kappa),
        graph=g,
    )


def spanning_tree_bound(d: int, ell: int, kappa: DiagramIndex) -> float:
    """C_d(N_κ)/ℓ^{(d−1)(n−N_κ)} với C_d(N) = (8μ_dμ_{d−1}c_{2;d})^{n−N}·μ_d^N."""
    if ell < 1:
        raise DomainError(f"Cận cây khung cần ℓ ≥ 1, nhận được ell={ell}.")
    dim = sphere_dim(d)
    n = kappa.n
    n_comp = extract_graph(kappa).n_components
    base = 8.0 * dim.mu_d * dim.mu_dm1 * asymptotic_constant(d, 2)
    return base ** (n - n_comp) * dim.mu_d ** n_comp / float(ell) ** ((d - 1) * (n - n_comp))


def even_n_constant(d: int, p: int) -> float:
    """C_{d;p} = (2(d−1)!μ_d²)^{2p}·μ_d^p (cận cho n = 2p)."""
    if p < 1:
        raise DomainError(f"p phải ≥ 1, nhận được p={p}.")
    mu = sphere_dim(d).mu_d
    return (2.0 * math.factorial(d - 1) * mu * mu) ** (2 * p) * mu ** p
