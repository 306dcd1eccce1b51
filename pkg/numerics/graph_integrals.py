#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tích phân nhiều điểm ∫_{(S^d)^n} ∏_e G_{ℓ;d}(⟨x_i, x_j⟩)^{k_e} trên đồ thị có nhãn.

Mỗi cạnh mang một hàm của ⟨x, y⟩ dưới dạng hệ số Gegenbauer (`SpectralEdge`).
Bộ rút gọn series-parallel áp dụng lặp lại các luật:

- node cô lập:      ∫ dx = μ_d
- node lá:          ∫ f(⟨x, y⟩) dx = μ_d·c_0
- node bậc 2 (nối tiếp): ∫ f(⟨u, x⟩) g(⟨x, w⟩) dx = Σ_j f_j g_j (μ_d/n_j) G_j(⟨u, w⟩)
- node bậc 2 về cùng 1 láng giềng (vòng): Σ_j f_j g_j μ_d/n_j
- cạnh song song:   f·g được chiếu lại lên cơ sở Gegenbauer bằng quadrature

Đồ thị không rút gọn được (vd K4) dùng `mc_graph_integral` làm oracle.
"""

import functools
import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from numerics.diagram_engine import DiagramIndex, extract_graph, split_N_C
from numerics.errors import DomainError, NotSeriesParallelError
from numerics.sphere_basis import (
    eigenspace_dim,
    gegenbauer_eval,
    gegenbauer_project,
    gegenbauer_table,
    sphere_dim,
    sphere_moment,
)
from utils.rng import shard_sizes, stream, uniform_sphere
from utils.running_stats import RunningStats

logger = logging.getLogger(__name__)

_ZERO_ABS = 1e-14
_ZERO_REL = 1e-14
MIN_MC_SAMPLES = 10_000
DEFAULT_SHARD_SIZE = 65_536
# Sai số chuẩn tương đối tối đa để 1 giá trị MC được coi là tin cậy trong bảng quét
MC_REL_SE_OK = 0.1


# ==================== Cạnh phổ ====================

@dataclass(frozen=True, eq=False)
class SpectralEdge:
    """f(t) = Σ_j c_j·G_{j;d}(t), j = 0..J."""

    d: int
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return int(self.coeffs.size) - 1

    def evaluate(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        values = self.coeffs @ gegenbauer_table(self.d, self.degree, t_arr)
        return values if np.ndim(t) else float(values[0])

    def at_one(self) -> float:
        """f(1) = Σ_j c_j vì G_j(1) = 1."""
        return float(np.sum(self.coeffs))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _trim(coeffs: np.ndarray, absolute: Optional[float] = None) -> np.ndarray:
    """Xoá hệ số nhỏ hơn ngưỡng rồi cắt đuôi 0 (luôn giữ ít nhất c_0)."""
    c = np.array(coeffs, dtype=float)
    peak = float(np.max(np.abs(c))) if c.size else 0.0
    if peak == 0.0:
        return _frozen(np.zeros(1))
    threshold = absolute if absolute is not None else _ZERO_REL * peak
    c[np.abs(c) < threshold] = 0.0
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return _frozen(np.zeros(1))
    return _frozen(c[: nz[-1] + 1])


@functools.lru_cache(maxsize=64)
def _mass(d: int, j_max: int) -> np.ndarray:
    """μ_d/n_{j;d} cho j = 0..j_max (hệ số chéo hoá của ∫G_j(⟨x,z⟩)G_j(⟨z,y⟩)dz)."""
    mu = sphere_dim(d).mu_d
    arr = np.array([mu / eigenspace_dim(d, j) for j in range(j_max + 1)], dtype=float)
    return _frozen(arr)


@functools.lru_cache(maxsize=1024)
def expand_power(d: int, ell: int, r: int) -> SpectralEdge:
    """Hệ số γ_{j,ℓ;r} của G_{ℓ;d}(t)^r = Σ_{j ≤ rℓ} γ_{j,ℓ;r} G_{j;d}(t)."""
    if r < 0 or ell < 0:
        raise DomainError(f"Cần r ≥ 0 và ℓ ≥ 0, nhận được r={r}, ell={ell}.")
    sphere_dim(d)
    if r == 0 or ell == 0:
        return SpectralEdge(d=d, coeffs=_frozen(np.ones(1)))
    if r == 1:
        coeffs = np.zeros(ell + 1)
        coeffs[ell] = 1.0
        return SpectralEdge(d=d, coeffs=_frozen(coeffs))
    degree = r * ell
    raw = gegenbauer_project(d, lambda t: gegenbauer_eval(d, ell, t) ** r, degree, degree)
    return SpectralEdge(d=d, coeffs=_trim(raw, absolute=_ZERO_ABS))


def gamma_hat(d: int, ell: int, r: int) -> float:
    """γ̂_{ℓ;r} = (n_{ℓ;d}/μ_d)·∫_{S^d} G_{ℓ;d}^{r+1} dx."""
    if r < 0:
        raise DomainError(f"r phải ≥ 0, nhận được r={r}.")
    return eigenspace_dim(d, ell) / sphere_dim(d).mu_d * sphere_moment(d, ell, r + 1)


def _product_edge(f: SpectralEdge, g: SpectralEdge) -> SpectralEdge:
    degree = f.degree + g.degree
    if degree == 0:
        return SpectralEdge(d=f.d, coeffs=_frozen(f.coeffs * g.coeffs))
    raw = gegenbauer_project(f.d, lambda t: f.evaluate(t) * g.evaluate(t), degree, degree)
    return SpectralEdge(d=f.d, coeffs=_trim(raw))


def _series_edge(f: SpectralEdge, g: SpectralEdge) -> SpectralEdge:
    m = min(f.coeffs.size, g.coeffs.size)
    coeffs = f.coeffs[:m] * g.coeffs[:m] * _mass(f.d, m - 1)
    return SpectralEdge(d=f.d, coeffs=_trim(coeffs))


def _loop_trace(f: SpectralEdge, g: SpectralEdge) -> float:
    m = min(f.coeffs.size, g.coeffs.size)
    return float(np.sum(f.coeffs[:m] * g.coeffs[:m] * _mass(f.d, m - 1)))


# ==================== Đặc tả đồ thị ====================

Edge = Tuple[int, int, int]


@dataclass(frozen=True)
class GraphIntegralSpec:
    """Đồ thị n node với cạnh (i, j, k) đã chuẩn hoá i < j, gộp cạnh song song."""

    d: int
    ell: int
    n: int
    edges: Tuple[Edge, ...]

    @classmethod
    def from_edges(cls, d: int, ell: int, n: int, edges: Iterable[Sequence[int]]) -> "GraphIntegralSpec":
        sphere_dim(d)
        if ell < 0:
            raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
        if n < 1:
            raise DomainError(f"Đồ thị cần ít nhất 1 node, nhận được n={n}.")
        merged: Dict[Tuple[int, int], int] = {}
        for i, j, k in edges:
            i, j, k = int(i), int(j), int(k)
            if i == j:
                raise DomainError(f"Không chấp nhận khuyên tại node {i}.")
            if not (0 <= i < n and 0 <= j < n):
                raise DomainError(f"Cạnh ({i}, {j}) nằm ngoài {n} node.")
            if k < 0:
                raise DomainError(f"Số mũ cạnh ({i}, {j}) phải ≥ 0, nhận được {k}.")
            if k == 0:
                # G^0 ≡ 1: cạnh không đóng góp gì
                continue
            key = (min(i, j), max(i, j))
            merged[key] = merged.get(key, 0) + k
        edges_t = tuple(sorted((i, j, k) for (i, j), k in merged.items()))
        return cls(d=d, ell=ell, n=n, edges=edges_t)

    @classmethod
    def from_kappa(
        cls,
        d: int,
        ell: int,
        kappa: DiagramIndex,
        extra: Iterable[Tuple[int, int]] = (),
    ) -> "GraphIntegralSpec":
        """Cạnh theo κ cộng thêm các cạnh đơn vị trong `extra`."""
        edges: List[Edge] = list(kappa.upper())
        edges.extend((i, j, 1) for i, j in extra)
        return cls.from_edges(d, ell, kappa.n, edges)

    def to_json(self) -> Dict[str, Any]:
        return {"d": self.d, "ell": self.ell, "n": self.n, "edges": [list(e) for e in self.edges]}


@dataclass
class ReductionResult:
    value: float
    trace: List[str] = field(default_factory=list)


@dataclass
class IntegralEstimate:
    value: float
    abs_err: float
    method: str
    samples: int = 0


# ==================== Rút gọn series-parallel ====================

def _structural_graph(spec: GraphIntegralSpec) -> nx.MultiGraph:
    g = nx.MultiGraph()
    g.add_nodes_from(range(spec.n))
    for i, j, _ in spec.edges:
        g.add_edge(i, j)
    return g


def _find_parallel(graph: nx.MultiGraph) -> Optional[Tuple[int, int]]:
    for u, v in graph.edges():
        if graph.number_of_edges(u, v) > 1:
            return (u, v)
    return None


def _next_step(graph: nx.MultiGraph, order: Sequence[int], merge_first: bool) -> Optional[Tuple[str, Any]]:
    if merge_first:
        pair = _find_parallel(graph)
        if pair is not None:
            return ("merge", pair)
    preferred = [v for v in order if v in graph]
    rest = sorted(v for v in graph.nodes if v not in set(preferred))
    for x in itertools.chain(preferred, rest):
        deg = graph.degree(x)
        if deg == 0:
            return ("isolated", x)
        if deg == 1:
            return ("leaf", x)
        if deg == 2:
            nbrs = [v for _, v in graph.edges(x)]
            return ("loop" if nbrs[0] == nbrs[1] else "series", x)
    pair = _find_parallel(graph)
    if pair is not None:
        return ("merge", pair)
    return None


def is_series_parallel(spec: GraphIntegralSpec) -> bool:
    """Mô phỏng các luật rút gọn trên cấu trúc (không tính số)."""
    g = _structural_graph(spec)
    while g.number_of_nodes():
        step = _next_step(g, (), merge_first=False)
        if step is None:
            return False
        rule, arg = step
        if rule == "merge":
            u, v = arg
            keys = list(g[u][v])[:2]
            g.remove_edges_from([(u, v, keys[0]), (u, v, keys[1])])
            g.add_edge(u, v)
        elif rule == "series":
            u, w = [v for _, v in g.edges(arg)]
            g.remove_node(arg)
            g.add_edge(u, w)
        else:
            g.remove_node(arg)
    return True


def reduce_graph(
    spec: GraphIntegralSpec,
    order: Optional[Sequence[int]] = None,
    merge_first: bool = False,
) -> ReductionResult:
    """Giá trị chính xác bằng rút gọn phổ, kèm vết các bước đã áp dụng.

    `order` ưu tiên thứ tự khử node; `merge_first` gộp cạnh song song trước
    mọi luật khác. Mọi thứ tự hợp lệ cho cùng một giá trị.
    Raise `NotSeriesParallelError` khi không còn luật nào áp dụng được.
    """
    d = spec.d
    mu = sphere_dim(d).mu_d
    g = nx.MultiGraph()
    g.add_nodes_from(range(spec.n))
    for i, j, k in spec.edges:
        g.add_edge(i, j, edge=expand_power(d, spec.ell, k))

    order = tuple(order or ())
    factor = 1.0
    trace: List[str] = []
    while g.number_of_nodes():
        step = _next_step(g, order, merge_first)
        if step is None:
            raise NotSeriesParallelError(
                f"Đồ thị {spec.edges} không rút gọn tiếp được "
                f"(còn {g.number_of_nodes()} node, mọi node bậc ≥ 3, không có cạnh song song)."
            )
        rule, arg = step
        if rule == "isolated":
            factor *= mu
            g.remove_node(arg)
            trace.append(f"isolated x{arg}")
        elif rule == "leaf":
            (_, v, f), = g.edges(arg, data="edge")
            factor *= mu * float(f.coeffs[0])
            g.remove_node(arg)
            trace.append(f"leaf x{arg}->x{v}")
        elif rule == "series":
            (_, u, f), (_, w, h) = g.edges(arg, data="edge")
            g.remove_node(arg)
            g.add_edge(u, w, edge=_series_edge(f, h))
            trace.append(f"series x{arg}: x{u}-x{w}")
        elif rule == "loop":
            (_, u, f), (_, _, h) = g.edges(arg, data="edge")
            factor *= _loop_trace(f, h)
            g.remove_node(arg)
            trace.append(f"loop x{arg}@x{u}")
        else:
            u, v = arg
            k1, k2 = list(g[u][v])[:2]
            f, h = g[u][v][k1]["edge"], g[u][v][k2]["edge"]
            g.remove_edges_from([(u, v, k1), (u, v, k2)])
            g.add_edge(u, v, edge=_product_edge(f, h))
            trace.append(f"merge x{u}=x{v}")
        if factor == 0.0:
            trace.append("zero")
            break

    logger.debug("Rút gọn %s: %s bước, giá trị %.6e", spec.edges, len(trace), factor)
    return ReductionResult(value=factor, trace=trace)


def graph_integral(spec: GraphIntegralSpec) -> float:
    """∫_{(S^d)^n} ∏_e G^{k_e} dx bằng rút gọn phổ."""
    return reduce_graph(spec).value


# ==================== Oracle Monte Carlo ====================

def _shard_pair_values(
    spec: GraphIntegralSpec,
    seed: int,
    shard: int,
    size: int,
    pin_first: bool,
    pair_cache: Optional[Dict[Tuple, Dict[Tuple[int, int], np.ndarray]]],
) -> Dict[Tuple[int, int], np.ndarray]:
    key = (spec.d, spec.ell, spec.n, seed, shard, size, pin_first)
    if pair_cache is not None and key in pair_cache:
        return pair_cache[key]

    rng = stream(seed, spec.n, shard)
    points = [uniform_sphere(rng, size, spec.d) for _ in range(spec.n)]
    if pin_first:
        pole = np.zeros((size, spec.d + 1))
        pole[:, 0] = 1.0
        points[0] = pole
    values: Dict[Tuple[int, int], np.ndarray] = {}
    for i, j in itertools.combinations(range(spec.n), 2):
        t = np.clip(np.einsum("ij,ij->i", points[i], points[j]), -1.0, 1.0)
        values[(i, j)] = gegenbauer_eval(spec.d, spec.ell, t)
    if pair_cache is not None:
        pair_cache[key] = values
    return values


def mc_graph_integral(
    spec: GraphIntegralSpec,
    samples: int,
    seed: int,
    shard_size: int = DEFAULT_SHARD_SIZE,
    pin_first: bool = False,
    pair_cache: Optional[Dict] = None,
    threads: int = 1,
) -> IntegralEstimate:
    """Trung bình μ_d^n·∏G^{k_e} trên các điểm đều độc lập.

    `pin_first` cố định x_0 ở cực bắc (tích phân bất biến theo phép quay).
    `pair_cache` cho phép nhiều đồ thị cùng (d, ℓ, n, seed) dùng chung điểm mẫu.
    Kết quả không phụ thuộc `threads`: shard được gộp theo thứ tự.
    """
    mu = sphere_dim(spec.d).mu_d
    scale = mu ** spec.n
    if not spec.edges:
        return IntegralEstimate(value=scale, abs_err=0.0, method="mc", samples=samples)
    if samples < MIN_MC_SAMPLES:
        raise DomainError(f"Oracle MC cần ít nhất {MIN_MC_SAMPLES} mẫu, nhận được {samples}.")

    sizes = shard_sizes(samples, shard_size)

    def run_shard(index: int) -> RunningStats:
        pairs = _shard_pair_values(spec, seed, index, sizes[index], pin_first, pair_cache)
        prod = np.full(sizes[index], scale)
        for i, j, k in spec.edges:
            prod *= pairs[(i, j)] ** k
        return RunningStats.from_samples(prod)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="mc") as pool:
            parts = list(pool.map(run_shard, range(len(sizes))))
    else:
        parts = [run_shard(i) for i in range(len(sizes))]

    total = RunningStats()
    for part in parts:
        total.merge(part)
    logger.debug("MC %s: %s mẫu, ước lượng %.6e ± %.2e", spec.edges, total.count, total.mean, total.std_error)
    return IntegralEstimate(value=total.mean, abs_err=total.std_error, method="mc", samples=total.count)


# ==================== Đẳng thức Gaunt ====================

_GAUNT_FAMILIES = ("A1", "B", "C")


@dataclass(frozen=True)
class GauntCase:
    family: str
    exponents: Tuple[int, ...]

    def __post_init__(self):
        ex = self.exponents
        if self.family == "A1":
            ok = len(ex) == 2 and ex[0] >= 2 and ex[1] >= 2
            rule = "p, q ≥ 2"
        elif self.family == "B":
            ok = len(ex) == 3 and ex[0] >= 2 and ex[1] >= 2 and ex[2] >= 1
            rule = "q1, q2 ≥ 2 và q3 ≥ 1"
        elif self.family == "C":
            ok = len(ex) == 3 and ex[0] >= 2 and ex[1] >= 2 and ex[2] >= 0
            rule = "p1, p2 ≥ 2 và p3 ≥ 0"
        else:
            raise DomainError(f"Họ Gaunt không hợp lệ: {self.family!r}. Chọn trong {_GAUNT_FAMILIES}.")
        if not ok:
            raise DomainError(f"Số mũ {ex} không hợp lệ cho họ {self.family} (yêu cầu {rule}).")

    @property
    def label(self) -> str:
        return f"{self.family}{self.exponents}"


@dataclass
class GauntReport:
    case: GauntCase
    d: int
    ell: int
    lhs: float
    rhs: float
    ratio: float
    expected: float
    rel_dev: float

    def to_json(self) -> Dict[str, Any]:
        return {
            "family": self.case.family,
            "exponents": list(self.case.exponents),
            "d": self.d,
            "ell": self.ell,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "expected": self.expected,
            "rel_dev": self.rel_dev,
        }


def gaunt_graph(d: int, ell: int, case: GauntCase) -> GraphIntegralSpec:
    ex = case.exponents
    if case.family == "A1":
        p, q = ex
        return GraphIntegralSpec.from_edges(d, ell, 3, [(0, 1, 1), (0, 2, p), (1, 2, q)])
    if case.family == "B":
        q1, q2, q3 = ex
        return GraphIntegralSpec.from_edges(d, ell, 4, [(0, 1, 1), (0, 3, q1), (1, 2, q2), (2, 3, q3)])
    p1, p2, p3 = ex
    return GraphIntegralSpec.from_edges(
        d, ell, 4, [(0, 1, 1), (0, 3, p1), (1, 2, p2), (1, 3, p3), (2, 3, 1)]
    )


def _two_point(d: int, ell: int, k: int) -> float:
    """∬ G_{ℓ;d}(⟨x, y⟩)^k dx dy."""
    return sphere_dim(d).mu_d * sphere_moment(d, ell, k)


def gaunt_rhs(d: int, ell: int, case: GauntCase) -> float:
    ex = case.exponents
    if case.family == "A1":
        p, q = ex
        return _two_point(d, ell, q + 1) * _two_point(d, ell, p + 1)
    if case.family == "B":
        return math.prod(_two_point(d, ell, q + 1) for q in ex)
    p1, p2, p3 = ex
    return _two_point(d, ell, p1 + 1) * _two_point(d, ell, p2 + 1) * _two_point(d, ell, p3 + 2)


def gaunt_constants(d: int) -> Dict[str, float]:
    """Tỉ số giải tích kỳ vọng: 1/μ_d cho A1, 1/μ_d² cho B và C."""
    mu = sphere_dim(d).mu_d
    return {"A1": 1.0 / mu, "B": 1.0 / mu ** 2, "C": 1.0 / mu ** 2}


def gaunt_identity_check(d: int, ell: int, case: GauntCase) -> GauntReport:
    lhs = graph_integral(gaunt_graph(d, ell, case))
    rhs = gaunt_rhs(d, ell, case)
    expected = gaunt_constants(d)[case.family]
    ratio = lhs / rhs if rhs != 0.0 else float("nan")
    rel_dev = abs(ratio - expected) / expected if rhs != 0.0 else float("nan")
    if rhs == 0.0:
        # ∫G^{odd} = 0 với ℓ lẻ: cả hai vế triệt tiêu
        logger.warning("Vế phải của %s bằng 0 tại ℓ=%s; tỉ số không xác định.", case.label, ell)
    return GauntReport(case=case, d=d, ell=ell, lhs=lhs, rhs=rhs, ratio=ratio, expected=expected, rel_dev=rel_dev)


# ==================== Tích phân 𝔍 ====================

@functools.lru_cache(maxsize=4096)
def _spectral_value(spec: GraphIntegralSpec) -> float:
    return graph_integral(spec)


def four_point_integral(
    d: int,
    ell: int,
    kappa: DiagramIndex,
    extra: Iterable[Tuple[int, int]] = ((0, 1), (2, 3)),
    mc_samples: int = 100_000,
    seed: int = 12345,
    pair_cache: Optional[Dict] = None,
) -> IntegralEstimate:
    """∫ ∏_{i<j} G^{k_ij} × ∏_{(i,j) ∈ extra} G dx: rút gọn phổ nếu được, MC nếu không."""
    spec = GraphIntegralSpec.from_kappa(d, ell, kappa, tuple(extra))
    if is_series_parallel(spec):
        return IntegralEstimate(value=_spectral_value(spec), abs_err=0.0, method="spectral")
    logger.debug("Đồ thị %s không series-parallel, dùng MC (%s mẫu).", spec.edges, mc_samples)
    return mc_graph_integral(spec, mc_samples, seed, pin_first=True, pair_cache=pair_cache)


def frak_I(
    q: Sequence[int],
    kappa: DiagramIndex,
    ell: int,
    d: int = 2,
    mc_samples: int = 100_000,
    seed: int = 12345,
    pair_cache: Optional[Dict] = None,
) -> IntegralEstimate:
    """𝔍_{q,κ}(ℓ) với κ ∈ 𝒜_{q_1−1, …, q_4−1}."""
    q = tuple(int(v) for v in q)
    if len(q) != 4 or any(v < 2 for v in q):
        raise DomainError(f"Cần đúng 4 chỉ số q_i ≥ 2, nhận được {q}.")
    targets = tuple(v - 1 for v in q)
    if kappa.n != 4 or tuple(sum(row) for row in kappa.k) != targets:
        raise DomainError(f"κ không thuộc 𝒜{targets}: tổng hàng {tuple(sum(r) for r in kappa.k)}.")
    return four_point_integral(d, ell, kappa, mc_samples=mc_samples, seed=seed, pair_cache=pair_cache)


def kappa_id(kappa: DiagramIndex) -> str:
    """Định danh ngắn k12-k13-k14-k23-k24-k34 (tam giác trên)."""
    return "-".join(str(kappa.k[i][j]) for i, j in itertools.combinations(range(kappa.n), 2))


@dataclass
class PropIScan:
    rows: List[Dict[str, Any]]
    max_per_ell: Dict[int, float]
    r_histogram: Dict[int, int]


def prop_I_scan(
    ell_list: Sequence[int],
    q_max: int,
    mc_samples: int = 100_000,
    seed: int = 12345,
    d: int = 2,
) -> PropIScan:
    """Quét ℓ³·|𝔍_{q,κ}(ℓ)| cho mọi q_i ∈ [2, q_max] và κ ∈ 𝒞 (bỏ 𝒩).

    Các đồ thị giống hệt nhau (cùng tập cạnh) chỉ được tính một lần.
    """
    if q_max < 2:
        raise DomainError(f"q_max phải ≥ 2, nhận được {q_max}.")
    for ell in ell_list:
        if ell < 2 or ell % 2:
            raise DomainError(f"Chỉ quét ℓ chẵn ≥ 2, nhận được ell={ell}.")

    rows: List[Dict[str, Any]] = []
    max_per_ell: Dict[int, float] = {}
    r_hist: Counter = Counter()
    cases = []
    for q in itertools.product(range(2, q_max + 1), repeat=4):
        _, c_set = split_N_C([v - 1 for v in q])
        cases.extend((q, kappa) for kappa in c_set)
    components = {kappa: extract_graph(kappa).n_components for _, kappa in cases}
    logger.info("Quét 𝔍: %s cặp (q, κ) ∈ 𝒞 × %s giá trị ℓ.", len(cases), len(ell_list))

    for ell in ell_list:
        pair_cache: Dict = {}
        memo: Dict[Tuple[Edge, ...], IntegralEstimate] = {}
        best = 0.0
        for q, kappa in cases:
            spec = GraphIntegralSpec.from_kappa(d, ell, kappa, ((0, 1), (2, 3)))
            est = memo.get(spec.edges)
            if est is None:
                est = frak_I(q, kappa, ell, d=d, mc_samples=mc_samples, seed=seed, pair_cache=pair_cache)
                memo[spec.edges] = est
            R = len(kappa.upper())
            scaled = float(ell) ** 3 * abs(est.value)
            mc_ok = est.method != "mc" or (
                est.value != 0.0 and est.abs_err / abs(est.value) <= MC_REL_SE_OK
            )
            rows.append({
                "ell": ell,
                "q1": q[0], "q2": q[1], "q3": q[2], "q4": q[3],
                "kappa_id": kappa_id(kappa),
                "R": R,
                "N": components[kappa],
                "value": est.value,
                "abs_err": est.abs_err,
                "method": est.method,
                "scaled": scaled,
                "mc_ok": mc_ok,
            })
            r_hist[R] += 1
            best = max(best, scaled)
        max_per_ell[ell] = best
        logger.info("ℓ=%s: max ℓ³|𝔍| = %.4e (%s đồ thị khác nhau)", ell, best, len(memo))

    return PropIScan(rows=rows, max_per_ell=max_per_ell, r_histogram=dict(sorted(r_hist.items())))
