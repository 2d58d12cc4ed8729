"""
lattice/potentials.py

비선형 포텐셜과 분수 극대 함수.

    𝒯(μ)(x)   = ( Σ_{Q∋x} (μ(Q)/ℓ(Q)^{n−α})^q )^{1/q}          dyadic
    F(μ)(x)   = ( Σ_j (μ(B(x,2^j))/2^{j(n−α)})^q )^{1/q}         dyadic 반지름 공
    𝓜_α(μ)(x) = sup_{Q∋x} μ(Q)/ℓ(Q)^{n−α}
    M_α(μ)(x) = sup_j μ(B(x,2^j))/2^{j(n−α)}
    g_k(x)    = μ(Q_k(x))/2^{k(n−α)}

평가점은 최소 셀의 중심. 공 B(x,r) 은 "셀 중심과 x 의 거리 < r" 인
셀들의 합집합이고, 거리 비교는 정수 제곱거리로 정확히 한다.

단일 점 함수는 항상 한 점짜리 배열로 필드 커널을 그대로 호출한다.
그래서 필드 값과 단일 점 값은 비트 단위로 같다.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lattice.dyadic_core import LatticeError, MeasureTree

logger = logging.getLogger(__name__)

OPERATORS = ("dyadic", "ball", "maximal_dyadic", "maximal_ball", "continuous")
CHUNK_POINTS = 1 << 14


class ParamsError(ValueError):
    """포텐셜 파라미터 검증 실패."""


# --- 파라미터 ---

@dataclass(frozen=True)
class PotentialParams:
    n: int
    alpha: float
    q: float
    level_min: int = 0
    level_max: Optional[int] = None
    include_supercube_tail: bool = False

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ParamsError(f"n={self.n} not supported (1..3)")
        if not (0 < self.alpha < self.n):
            raise ParamsError(f"alpha must satisfy 0 < alpha < n (alpha={self.alpha}, n={self.n})")
        if math.isinf(self.q):
            raise ParamsError("q = inf is not accepted; use the maximal operators instead")
        if not (self.q > 0) or math.isnan(self.q):
            raise ParamsError(f"q must be a finite positive number (q={self.q})")
        if self.level_min < 0:
            raise ParamsError(f"level_min={self.level_min} must be >= 0")
        if self.level_max is not None and self.level_max < self.level_min:
            raise ParamsError(
                f"level_min={self.level_min} > level_max={self.level_max}"
            )

    @property
    def s(self) -> float:
        """지수 n − α."""
        return self.n - self.alpha

    def top_level(self, J: int, ball: bool) -> int:
        """
        합의 상한 레벨. 기본값은 dyadic 이면 J, 공이면 J+1
        (반지름 2^{J+1} 공은 n ≤ 3 에서 어느 셀에서든 루트 전체를 담는다).
        """
        top = self.level_max if self.level_max is not None else (J + 1 if ball else J)
        if top < self.level_min:
            raise ParamsError(f"level_min={self.level_min} exceeds level_max={top} (J={J})")
        return top

    def with_q(self, q: float) -> "PotentialParams":
        return PotentialParams(
            n=self.n,
            alpha=self.alpha,
            q=q,
            level_min=self.level_min,
            level_max=self.level_max,
            include_supercube_tail=self.include_supercube_tail,
        )


def _check_tree(tree: MeasureTree, params: PotentialParams) -> None:
    if tree.n != params.n:
        raise ParamsError(f"params.n={params.n} but measure has n={tree.n}")


def check_points(tree: MeasureTree, points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != tree.n:
        raise LatticeError(f"points must have shape (P, {tree.n}), got {pts.shape}")
    if pts.size and (pts.min() < 0 or pts.max() >= tree.size):
        raise LatticeError(f"evaluation point outside root [0, {tree.size})^{tree.n}")
    return pts


def all_points(tree: MeasureTree) -> np.ndarray:
    """모든 최소 셀 인덱스 (C 순서)."""
    if not tree.dense:
        raise LatticeError("a full field needs dense storage; pass explicit points instead")
    grids = np.indices((tree.size,) * tree.n).reshape(tree.n, -1)
    return grids.T.astype(np.int64)


# --- 항(term) 행렬 ---

def _level_scale(k: int, s: float) -> float:
    return 2.0 ** (k * s)


def dyadic_terms(tree: MeasureTree, params: PotentialParams, pts: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """(P, L) 행렬: 열 k 는 μ(Q_k(x))/2^{k(n−α)}. 루트 위 레벨은 전체 질량."""
    top = params.top_level(tree.J, ball=False)
    levels = list(range(params.level_min, top + 1))
    terms = np.empty((pts.shape[0], len(levels)), dtype=np.float64)
    for col, k in enumerate(levels):
        masses = tree.masses_at(k, pts >> k) if k <= tree.J else np.full(pts.shape[0], tree.total)
        terms[:, col] = masses / _level_scale(k, params.s)
    return terms, levels


def _leading_offsets(n: int, radius: int, size: int) -> List[Tuple[Tuple[int, ...], int]]:
    """선행 축 오프셋 d' 와 마지막 축 반폭 w (|d'|² + w² < r² 인 최대 w)."""
    r2 = radius * radius
    span = min(radius - 1, size - 1)
    out = []
    for d in product(range(-span, span + 1), repeat=n - 1):
        rest = r2 - sum(v * v for v in d)
        if rest >= 1:
            out.append((d, math.isqrt(rest - 1)))
    return out


def _ball_masses_dense(tree: MeasureTree, prefix: np.ndarray, pts: np.ndarray, radius: int) -> np.ndarray:
    n, size = tree.n, tree.size
    if radius * radius > n * (size - 1) ** 2:
        return np.full(pts.shape[0], tree.total)
    out = np.zeros(pts.shape[0], dtype=np.float64)
    lead = pts[:, :-1]
    last = pts[:, -1]
    for d, w in _leading_offsets(n, radius, size):
        rows = lead + np.array(d, dtype=np.int64)
        valid = np.all((rows >= 0) & (rows < size), axis=1)
        if not valid.any():
            continue
        lo = np.clip(last - w, 0, size)
        hi = np.clip(last + w + 1, 0, size)
        idx = tuple(rows[valid].T)
        out[valid] += prefix[idx + (hi[valid],)] - prefix[idx + (lo[valid],)]
    return out


def _ball_masses_atoms(atoms: np.ndarray, weights: np.ndarray, pts: np.ndarray, radius: int) -> np.ndarray:
    out = np.zeros(pts.shape[0], dtype=np.float64)
    if atoms.shape[0] == 0:
        return out
    r2 = radius * radius
    for i, x in enumerate(pts):
        d2 = ((atoms - x) ** 2).sum(axis=1)
        out[i] = weights[d2 < r2].sum()
    return out


def ball_terms(tree: MeasureTree, params: PotentialParams, pts: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """(P, L) 행렬: 열 j 는 μ(B(x,2^j))/2^{j(n−α)}."""
    top = params.top_level(tree.J, ball=True)
    levels = list(range(params.level_min, top + 1))
    terms = np.empty((pts.shape[0], len(levels)), dtype=np.float64)
    if tree.dense:
        finest = tree.finest
        zeros = np.zeros(finest.shape[:-1] + (1,), dtype=np.float64)
        prefix = np.concatenate([zeros, np.cumsum(finest, axis=-1)], axis=-1)
        masses_for = lambda r: _ball_masses_dense(tree, prefix, pts, r)
    else:
        support = tree.support()
        atoms = np.array([c for c, _ in support], dtype=np.int64).reshape(-1, tree.n)
        weights = np.array([m for _, m in support], dtype=np.float64)
        masses_for = lambda r: _ball_masses_atoms(atoms, weights, pts, r)
    for col, j in enumerate(levels):
        terms[:, col] = masses_for(1 << j) / _level_scale(j, params.s)
    return terms, levels


# --- ℓ^q 결합 ---

def _tail_first_term(tree: MeasureTree, params: PotentialParams, top: int) -> Tuple[int, float]:
    start = max(top, tree.J) + 1
    return start, tree.total / _level_scale(start, params.s)


def supercube_tail(tree: MeasureTree, params: PotentialParams, top: int) -> float:
    """
    Σ_{k ≥ K} (μ_total/2^{k(n−α)})^q, K = max(top, J)+1.
    닫힌 꼴: (μ_total 2^{−K s})^q / (1 − 2^{−qs}).
    """
    _, first = _tail_first_term(tree, params, top)
    return first ** params.q / (1.0 - 2.0 ** (-params.q * params.s))


def _combine(terms: np.ndarray, tree: MeasureTree, params: PotentialParams, top: int, maximal: bool) -> np.ndarray:
    """
    행별 ℓ^q 노름 또는 최댓값. 노름은 t_max·(Σ (t_k/t_max)^q)^{1/q} 로
    계산한다. 최대항이 정확히 1 로 더해지므로 𝓜 ≤ 𝒯 가 부동소수에서도 성립.
    """
    q = params.q
    tmax = terms.max(axis=1) if terms.shape[1] else np.zeros(terms.shape[0])
    first_tail = 0.0
    if params.include_supercube_tail:
        _, first_tail = _tail_first_term(tree, params, top)
        tmax = np.maximum(tmax, first_tail)
    if maximal:
        return tmax

    out = np.zeros(terms.shape[0], dtype=np.float64)
    pos = tmax > 0
    if not pos.any():
        return out
    tm = tmax[pos]
    acc = np.zeros(tm.shape[0], dtype=np.float64)
    for col in range(terms.shape[1]):
        acc += (terms[pos, col] / tm) ** q
    if params.include_supercube_tail:
        acc += (first_tail / tm) ** q / (1.0 - 2.0 ** (-q * params.s))
    out[pos] = tm * acc ** (1.0 / q)
    return out


# --- 연속 포텐셜 ---

def _continuous_values(tree: MeasureTree, params: PotentialParams, pts: np.ndarray) -> np.ndarray:
    """
    (∫_{r0}^∞ (μ(B(x,r))/r^{n−α})^q dr/r)^{1/q}, r0 = 2^{level_min}.
    μ(B(x,r)) 는 거리 껍질마다 바뀌는 계단 함수라 구간별 닫힌 꼴로 적분한다.
    """
    support = tree.support()
    out = np.zeros(pts.shape[0], dtype=np.float64)
    if not support:
        return out
    atoms = np.array([c for c, _ in support], dtype=np.int64)
    weights = np.array([m for _, m in support], dtype=np.float64)
    qs = params.q * params.s
    r0 = 2.0 ** params.level_min
    for i, x in enumerate(pts):
        d2 = ((atoms - x) ** 2).sum(axis=1)
        shells, inverse = np.unique(d2, return_inverse=True)
        cum = np.cumsum(np.bincount(inverse, weights=weights))
        radii = np.sqrt(shells.astype(np.float64))
        lower = np.maximum(radii, r0)
        upper = np.append(radii[1:], np.inf)
        live = upper > r0
        upper_pow = np.where(np.isinf(upper), 0.0, np.maximum(upper, r0) ** (-qs))
        pieces = cum[live] ** params.q * (lower[live] ** (-qs) - upper_pow[live]) / qs
        out[i] = pieces.sum() ** (1.0 / params.q)
    return out


# --- 커널 / 필드 ---

def _evaluate(tree: MeasureTree, params: PotentialParams, which: str, pts: np.ndarray) -> np.ndarray:
    if which == "continuous":
        return _continuous_values(tree, params, pts)
    ball = which in ("ball", "maximal_ball")
    terms, _ = (ball_terms if ball else dyadic_terms)(tree, params, pts)
    top = params.top_level(tree.J, ball=ball)
    return _combine(terms, tree, params, top, maximal=which.startswith("maximal"))


@dataclass
class Field:
    which: str
    n: int
    J: int
    points: np.ndarray   # (P, n)
    values: np.ndarray   # (P,)

    def as_grid(self) -> np.ndarray:
        """전체 격자 필드일 때 (2^J,)*n 배열."""
        if self.points.shape[0] != (1 << (self.J * self.n)):
            raise LatticeError("field does not cover every cell")
        grid = np.empty((1 << self.J,) * self.n, dtype=np.float64)
        grid[tuple(self.points.T)] = self.values
        return grid

    def to_csv(self, path: str) -> None:
        header = ",".join([f"i{a}" for a in range(self.n)] + [self.which])
        with open(path, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            for cell, value in zip(self.points, self.values):
                f.write(",".join(str(int(c)) for c in cell) + "," + format(float(value), ".17g") + "\n")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DYADLAB_THREADS", "1")))
    except ValueError:
        return 1


def potential_field(
    tree: MeasureTree,
    params: PotentialParams,
    which: str = "dyadic",
    points=None,
    threads: Optional[int] = None,
) -> Field:
    """
    여러 점에서 한 번에 평가. points=None 이면 모든 최소 셀.
    점 묶음(chunk)별로 스레드에 나눠도 값은 순차 평가와 같다.
    """
    if which not in OPERATORS:
        raise ParamsError(f"unknown operator {which!r} (choose from {', '.join(OPERATORS)})")
    _check_tree(tree, params)
    pts = all_points(tree) if points is None else check_points(tree, points)
    threads = threads or default_threads()

    chunks = [pts[i:i + CHUNK_POINTS] for i in range(0, pts.shape[0], CHUNK_POINTS)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _evaluate(tree, params, which, c), chunks))
    else:
        parts = [_evaluate(tree, params, which, c) for c in chunks]
    values = np.concatenate(parts) if parts else np.zeros(0)
    logger.debug("field %s: %d points, %d chunks, threads=%d", which, pts.shape[0], len(chunks), threads)
    return Field(which=which, n=tree.n, J=tree.J, points=pts, values=values)


def _single(tree: MeasureTree, params: PotentialParams, which: str, x: Sequence[int]) -> float:
    _check_tree(tree, params)
    return float(_evaluate(tree, params, which, check_points(tree, [tuple(x)]))[0])


def dyadic_potential(tree: MeasureTree, params: PotentialParams, x: Sequence[int]) -> float:
    return _single(tree, params, "dyadic", x)


def ball_potential_F(tree: MeasureTree, params: PotentialParams, x: Sequence[int]) -> float:
    return _single(tree, params, "ball", x)


def fractional_maximal_dyadic(tree: MeasureTree, params: PotentialParams, x: Sequence[int]) -> float:
    return _single(tree, params, "maximal_dyadic", x)


def fractional_maximal_ball(tree: MeasureTree, params: PotentialParams, x: Sequence[int]) -> float:
    return _single(tree, params, "maximal_ball", x)


def continuous_potential(tree: MeasureTree, params: PotentialParams, x: Sequence[int]) -> float:
    return _single(tree, params, "continuous", x)


def shell_function_g(tree: MeasureTree, params: PotentialParams, k: int, x: Sequence[int]) -> float:
    """g_k(x) = μ(Q_k(x))/2^{k(n−α)}: 레벨 k 에서 x 를 담는 큐브 하나만 남는다."""
    _check_tree(tree, params)
    top = params.top_level(tree.J, ball=False)
    if not (params.level_min <= k <= top):
        raise ParamsError(f"level k={k} outside [{params.level_min}, {top}]")
    pts = check_points(tree, [tuple(x)])
    mass = tree.masses_at(k, pts >> k)[0] if k <= tree.J else tree.total
    return float(mass / _level_scale(k, params.s))
