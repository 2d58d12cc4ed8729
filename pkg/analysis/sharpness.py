"""
analysis/sharpness.py

good-λ 상수의 지수 감쇠가 더 나아질 수 없음을 보이는 명시적 측도.

    δ = ε(1 − 2^{α−n}),  N = ⌊2/δ⌋,  루트 = Q^N = [0, 2^N)^n
    Q^j = [0, 2^j)^n,  A_j = Q^j ∖ Q^{j−1}  (|A_j| = (2^n − 1) 2^{n(j−1)})
    f = δ on Q^0,  f = δ 2^{j(n−α)} / |A_j| on A_j

보조 포텐셜
    𝒜(x) = Σ_c f(c) · 2^{−m(x,c)(n−α)}     (m = x 와 c 의 공통 조상 레벨)
은 고리(annulus)마다 상수이고 닫힌 꼴이 있다. k ≥ 1 에서

    𝒜 = δ( Σ_{j=1}^{k} 2^{−j(n−α)} + Σ_{j=1}^{k−1} 2^{−jα}
           + (2^n − 2 + 2^{n−kα})/(2^n − 1) + (N − k) ),

Q^0 에서는 δ(N+1). 흔히 인용되는 식
    (2^n − 2 + 2^{−kα})/(2^n − 1) + (N − k − 1)
은 직접 합보다 δ(1 + 2^{−kα}) 만큼 작다 (eval_A_printed 로 남겨 비교만 한다).

2^{nN} ≤ 2^24 이면 f 를 셀 배열로 만들고(dense), 그보다 크면 고리별 값만 둔다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from lattice.dyadic_core import DENSE_LIMIT_LOG2, MeasureTree, common_ancestor_level, measure_from_array
from lattice.potentials import PotentialParams, check_points, potential_field
from analysis.reports import save_rows_csv

logger = logging.getLogger(__name__)

REL_TOL = 1e-9


class SharpnessError(ValueError):
    """구성이 정확한데도 포함 관계가 깨지면 (= 버그) 던진다."""

    def __init__(self, message: str, report: Optional[dict] = None):
        super().__init__(message)
        self.report = report


@dataclass
class SharpExample:
    epsilon: float
    n: int
    alpha: float
    delta: float
    N: int
    annulus_density: np.ndarray   # 길이 N+1, index 0 = Q^0
    annulus_cells: np.ndarray     # 길이 N+1 (정수)
    tree: Optional[MeasureTree]   # dense 일 때만

    @property
    def s(self) -> float:
        return self.n - self.alpha

    @property
    def dense(self) -> bool:
        return self.tree is not None

    @property
    def total_mass(self) -> float:
        return self.delta * (1.0 + sum(2.0 ** (j * self.s) for j in range(1, self.N + 1)))


def annulus_index(cells: np.ndarray) -> np.ndarray:
    """셀 좌표 (P, n) → 고리 번호 = 축별 bit_length 의 최댓값."""
    _, exps = np.frexp(np.asarray(cells, dtype=np.float64))
    return exps.max(axis=-1).astype(np.int64)


def _bit_length(values: np.ndarray) -> np.ndarray:
    _, exps = np.frexp(values.astype(np.float64))
    return exps.astype(np.int64)


def sharp_delta(epsilon: float, n: int, alpha: float) -> float:
    return epsilon * (1.0 - 2.0 ** (alpha - n))


def sharp_levels(epsilon: float, n: int, alpha: float) -> int:
    """구성의 바깥 고리 번호 N = ⌊2/δ⌋ (셀 표현이면 루트 레벨)."""
    return int(math.floor(2.0 / sharp_delta(epsilon, n, alpha)))


def build_sharp_example(epsilon: float, n: int, alpha: float) -> SharpExample:
    if not (0 < epsilon <= 1):
        raise SharpnessError(f"epsilon must lie in (0, 1] (epsilon={epsilon})")
    if n not in (1, 2, 3) or not (0 < alpha < n):
        raise SharpnessError(f"need n in 1..3 and 0 < alpha < n (n={n}, alpha={alpha})")
    s = n - alpha
    delta = sharp_delta(epsilon, n, alpha)
    N = sharp_levels(epsilon, n, alpha)

    cells = np.array([1] + [(2 ** n - 1) * 2 ** (n * (j - 1)) for j in range(1, N + 1)], dtype=np.float64)
    density = np.array([delta] + [delta * 2.0 ** (j * s) / cells[j] for j in range(1, N + 1)])

    tree = None
    if n * N <= DENSE_LIMIT_LOG2:
        size = 1 << N
        coords = np.indices((size,) * n).reshape(n, -1).T
        ann = annulus_index(coords).reshape((size,) * n)
        tree = measure_from_array(density[ann])
    else:
        logger.info("sharp example eps=%g n=%d: N=%d too large for cells, keeping annuli only", epsilon, n, N)
    return SharpExample(epsilon, n, alpha, delta, N, density, cells, tree)


# --- 𝒜 ---

def closed_values(ex: SharpExample) -> np.ndarray:
    """고리 k = 0..N 의 닫힌 꼴 값."""
    n, alpha, s, delta, N = ex.n, ex.alpha, ex.s, ex.delta, ex.N
    out = np.empty(N + 1)
    out[0] = delta * (N + 1)
    for k in range(1, N + 1):
        outer = sum(2.0 ** (-j * s) for j in range(1, k + 1))
        same = sum(2.0 ** (-j * alpha) for j in range(1, k))
        local = (2 ** n - 2 + 2.0 ** (n - k * alpha)) / (2 ** n - 1)
        out[k] = delta * (outer + same + local + (N - k))
    return out


def printed_values(ex: SharpExample) -> np.ndarray:
    n, alpha, s, delta, N = ex.n, ex.alpha, ex.s, ex.delta, ex.N
    out = np.empty(N + 1)
    out[0] = delta * (N + 1)
    for k in range(1, N + 1):
        outer = sum(2.0 ** (-j * s) for j in range(1, k + 1))
        same = sum(2.0 ** (-j * alpha) for j in range(1, k))
        local = (2 ** n - 2 + 2.0 ** (-k * alpha)) / (2 ** n - 1)
        out[k] = delta * (outer + same + local + (N - k - 1))
    return out


def _point_annulus(ex: SharpExample, x: Sequence[int]) -> int:
    size = 1 << ex.N
    if len(x) != ex.n or any(c < 0 or c >= size for c in x):
        raise SharpnessError(f"point {tuple(x)} outside Q^N = [0, {size})^{ex.n}")
    return max(int(c).bit_length() for c in x)


def eval_A_closed(ex: SharpExample, x: Sequence[int]) -> float:
    return float(closed_values(ex)[_point_annulus(ex, x)])


def eval_A_printed(ex: SharpExample, x: Sequence[int]) -> float:
    return float(printed_values(ex)[_point_annulus(ex, x)])


def eval_A_direct(ex: SharpExample, x: Sequence[int]) -> float:
    """
    정의 그대로의 이중합: 고리 j 마다 셀 Q^{j,ℓ} 와 x 의 공통 조상 변 길이로
    δ ℓ(Q^0_x)^{α−n} + δ Σ_j (ℓ(Q^j)^{n−α}/|A_j|) Σ_ℓ ℓ(Q^{j,ℓ}_x)^{α−n}.
    """
    if not ex.dense:
        raise SharpnessError("direct evaluation needs the cell representation (N too large)")
    _point_annulus(ex, x)
    size = 1 << ex.N
    coords = np.indices((size,) * ex.n).reshape(ex.n, -1).T
    ann = annulus_index(coords)
    xa = np.array(x, dtype=np.int64)
    level = _bit_length(coords ^ xa).max(axis=1)
    kernel = 2.0 ** (-level * ex.s)

    value = ex.delta * float(kernel[ann == 0].sum())
    for j in range(1, ex.N + 1):
        weight = ex.delta * 2.0 ** (j * ex.s) / ex.annulus_cells[j]
        value += weight * float(kernel[ann == j].sum())
    return value


def _annulus_level_counts(ex: SharpExample) -> List[List[np.ndarray]]:
    """counts[j][m] = 레벨 m 큐브 안의 고리 j 셀 수 (레벨별 격자)."""
    size = 1 << ex.N
    coords = np.indices((size,) * ex.n).reshape(ex.n, -1).T
    ann = annulus_index(coords).reshape((size,) * ex.n)
    out = []
    for j in range(ex.N + 1):
        levels = [(ann == j).astype(np.int64)]
        for _ in range(ex.N):
            prev = levels[-1]
            m = prev.shape[0] // 2
            levels.append(prev.reshape(sum(((m, 2) for _ in range(ex.n)), ())).sum(axis=tuple(range(1, 2 * ex.n, 2))))
        out.append(levels)
    return out


def direct_field(ex: SharpExample) -> np.ndarray:
    """
    모든 셀에서 직접 합. 공통 조상 레벨이 정확히 m 인 고리 j 셀 수는
    |A_j ∩ Q_m(x)| − |A_j ∩ Q_{m−1}(x)| 이므로 (j, m) 쌍마다 배열 연산 한 번.
    """
    if not ex.dense:
        raise SharpnessError("direct field needs the cell representation (N too large)")
    size = 1 << ex.N
    grid = np.indices((size,) * ex.n)
    counts = _annulus_level_counts(ex)
    out = np.zeros((size,) * ex.n)
    for j in range(ex.N + 1):
        f_j = ex.annulus_density[j]
        prev = np.zeros((size,) * ex.n)
        for m in range(ex.N + 1):
            here = counts[j][m][tuple(g >> m for g in grid)].astype(np.float64)
            out += f_j * (here - prev) * 2.0 ** (-m * ex.s)
            prev = here
    return out


def closed_field(ex: SharpExample) -> np.ndarray:
    if not ex.dense:
        raise SharpnessError("closed field needs the cell representation (N too large)")
    size = 1 << ex.N
    coords = np.indices((size,) * ex.n).reshape(ex.n, -1).T
    return closed_values(ex)[annulus_index(coords)].reshape((size,) * ex.n)


def dyadic_maximal_per_annulus(ex: SharpExample) -> np.ndarray:
    """
    𝓜_α(f) 도 고리마다 상수: 고리 안쪽 큐브(레벨 < k)는 f_k 2^{mα},
    레벨 ≥ k 큐브는 Q^m 자신이다.
    """
    s, N = ex.s, ex.N
    prefix = np.cumsum(ex.annulus_density * ex.annulus_cells)
    outer = np.array([prefix[m] / 2.0 ** (m * s) for m in range(N + 1)])
    out = np.empty(N + 1)
    for k in range(N + 1):
        inner = ex.annulus_density[k] * 2.0 ** ((k - 1) * ex.alpha) if k >= 1 else 0.0
        out[k] = max(inner, float(outer[k:].max()))
    return out


# --- 보고서 ---

def k0_bound(ex: SharpExample) -> int:
    """𝒜_k ≤ δ(S_1 + S_2 + 2 + N − k) 에서 나오는 k_0 상한 (O(1/ε))."""
    return int(math.ceil(1.0 / ex.delta + 1.0 / (2.0 ** ex.s - 1.0) + 1.0 / (2.0 ** ex.alpha - 1.0) + 2.0))


def sharpness_report(ex: SharpExample, strict: bool = True, threads: Optional[int] = None) -> Dict[str, object]:
    eps, n, N = ex.epsilon, ex.n, ex.N
    A = closed_values(ex)
    mdy = dyadic_maximal_per_annulus(ex)
    cells = ex.annulus_cells
    failures: List[str] = []

    # (a) Q^0 에서 극대 함수 ≤ ε
    maximal_q0 = {"dyadic": float(mdy[0]), "bound": eps}
    if ex.dense:
        params = PotentialParams(n=n, alpha=ex.alpha, q=1.0, level_max=N)
        origin = check_points(ex.tree, [(0,) * n])
        ball = potential_field(ex.tree, params, "maximal_ball", points=origin, threads=threads).values[0]
        dy = potential_field(ex.tree, params, "maximal_dyadic", points=origin, threads=threads).values[0]
        maximal_q0.update({"ball": float(ball), "dyadic_lattice": float(dy)})
    check_a = all(v <= eps * (1 + REL_TOL) for k, v in maximal_q0.items() if k not in ("bound",))
    if not check_a:
        failures.append("(a) maximal function exceeds epsilon on Q^0")

    # (b) Q^0 ⊆ {𝒜 > 2, 𝓜 ≤ ε}
    check_b = A[0] > 2 and mdy[0] <= eps * (1 + REL_TOL)
    if not check_b:
        failures.append("(b) Q^0 not inside {A > 2, M <= eps}")

    # (c) {𝒜 > 1} ⊆ Q^{k0}
    above1 = [k for k in range(N + 1) if A[k] > 1]
    k0 = max(above1) if above1 else 0
    bound = k0_bound(ex)
    check_c = k0 <= bound
    if not check_c:
        failures.append(f"(c) k0={k0} exceeds bound {bound}")

    # (d) 비율 ≥ 2^{−n k0}
    good = [k for k in range(N + 1) if A[k] > 2 and mdy[k] <= eps * (1 + REL_TOL)]
    numerator = float(sum(cells[k] for k in good))
    denominator = float(sum(cells[k] for k in above1))
    ratio = numerator / denominator if denominator else 0.0
    check_d = denominator > 0 and ratio >= 2.0 ** (-n * k0)
    if not check_d:
        failures.append("(d) ratio below 2^(-n k0)")

    # k ≥ 1 에서 순감소
    monotone = bool(np.all(np.diff(A[1:]) < 0))
    if not monotone:
        failures.append("closed form is not strictly decreasing in k")

    report: Dict[str, object] = {
        "epsilon": eps,
        "n": n,
        "alpha": ex.alpha,
        "delta": ex.delta,
        "N": N,
        "representation": "cells" if ex.dense else "annuli",
        "total_mass": ex.total_mass,
        "annuli": [
            {
                "k": k,
                "cells": int(cells[k]),
                "density": float(ex.annulus_density[k]),
                "A_closed": float(A[k]),
                "A_printed": float(printed_values(ex)[k]),
                "dyadic_maximal": float(mdy[k]),
            }
            for k in range(N + 1)
        ],
        "monotone_in_k": monotone,
        "maximal_on_Q0": maximal_q0,
        "k0": k0,
        "k0_bound": bound,
        "k0_times_eps": k0 * eps,
        "k0_within_4_over_eps": k0 <= 4.0 / eps,
        "numerator_cells": numerator,
        "denominator_cells": denominator,
        "ratio": ratio,
        "ratio_lower_bound": 2.0 ** (-n * k0),
        "checks": {"a": check_a, "b": bool(check_b), "c": check_c, "d": check_d, "monotone": monotone},
    }

    if ex.dense:
        closed = closed_field(ex)
        direct = direct_field(ex)
        rel = np.abs(closed - direct) / closed
        report["closed_vs_direct_max_rel"] = float(rel.max())
        if rel.max() > REL_TOL:
            failures.append("closed form disagrees with the direct sum")
        pot = potential_field(ex.tree, PotentialParams(n=n, alpha=ex.alpha, q=1.0, level_max=N), "dyadic", threads=threads).as_grid()
        comp = pot / closed
        report["comparability_T_over_A"] = [float(comp.min()), float(comp.max())]

        # 고리마다 대표 셀 하나에서 정의 그대로의 합
        probes = []
        for k in range(N + 1):
            x = ((1 << (k - 1)) if k else 0,) + (0,) * (n - 1)
            literal = eval_A_direct(ex, x)
            probes.append({
                "k": k,
                "cell": list(x),
                "ancestor_level": common_ancestor_level(x, (0,) * n),
                "A_direct": literal,
                "A_closed": eval_A_closed(ex, x),
            })
            if abs(literal - A[k]) > REL_TOL * A[k] or probes[-1]["ancestor_level"] != k:
                failures.append(f"literal sum disagrees at annulus {k}")
        report["probes"] = probes

    report["failures"] = failures
    report["verdict"] = "FAIL" if failures else "PASS"
    logger.info("sharpness eps=%g n=%d alpha=%g: N=%d k0=%d ratio=%.6g verdict=%s",
                eps, n, ex.alpha, N, k0, ratio, report["verdict"])
    if failures and strict:
        raise SharpnessError("; ".join(failures), report)
    return report


def fit_sharpness_constants(reports: Sequence[Dict[str, object]]) -> Dict[str, float]:
    """
    ln ratio = ln c1 − c2/ε 를 최소제곱으로 맞추고, c1 은 하한 포락선에서
    한 격자 레벨(2^{−n})만큼 더 내린다 (k0 가 정수라 비율이 2^n 단위로 뛴다).
    """
    pts = [(1.0 / r["epsilon"], math.log(r["ratio"])) for r in reports if r["ratio"] > 0]
    if len(pts) < 2:
        raise SharpnessError("need at least two positive ratios to fit c1, c2")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    slope, _ = np.polyfit(xs, ys, 1)
    c2 = float(-slope)
    n = int(reports[0]["n"])
    log_c1 = float(np.min(ys + c2 * xs)) - n * math.log(2.0)
    return {"c1": math.exp(log_c1), "c2": c2, "points": len(pts)}


def ratio_lower_bound(fit: Dict[str, float], epsilon: float) -> float:
    return fit["c1"] * math.exp(-fit["c2"] / epsilon)


def write_sharpness_csv(report: Dict[str, object], path: str) -> None:
    save_rows_csv(path, report["annuli"], ["k", "cells", "density", "A_closed", "A_printed", "dyadic_maximal"])
