"""
lattice/whitney.py

셀 단위 열린 집합 G 의 두 가지 분해.

1) dyadic 극대 분해: G 에 담기는 dyadic 큐브 중 부모가 G 에 담기지 않는 것들
2) Whitney 분해: 위에서 아래로 내려가며 Q ⊆ G 이고
   diam(Q) ≤ dist(Q, G^c) 이면 채택 (G^c 는 루트 바깥 포함).
   최소 셀은 조건 없이 채택한다.

거리는 닫힌 상자 사이의 축별 간격으로 정수 제곱거리를 계산한다.
결과 큐브 목록은 (level, coords) 순으로 정렬해 돌려준다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from lattice.dyadic_core import CellSet, DyadicCube, double_slices

logger = logging.getLogger(__name__)

OVERLAP_BASE = 4


@dataclass
class LevelSetDecomposition:
    cubes: List[DyadicCube]
    flavor: str            # dyadic_maximal | whitney
    source_set: CellSet

    def to_rows(self) -> List[Tuple[int, ...]]:
        return [(c.level,) + c.coords for c in self.cubes]


# --- 블록 집계 ---

def _block_all(mask: np.ndarray, n: int) -> np.ndarray:
    m = mask.shape[0] // 2
    shaped = mask.reshape(sum(((m, 2) for _ in range(n)), ()))
    return shaped.all(axis=tuple(range(1, 2 * n, 2)))


def _block_any(mask: np.ndarray, n: int) -> np.ndarray:
    m = mask.shape[0] // 2
    shaped = mask.reshape(sum(((m, 2) for _ in range(n)), ()))
    return shaped.any(axis=tuple(range(1, 2 * n, 2)))


def _level_tables(G: CellSet, reducer) -> List[np.ndarray]:
    tables = [G.mask]
    for _ in range(G.J):
        tables.append(reducer(tables[-1], G.n))
    return tables


def _expand(arr: np.ndarray, n: int) -> np.ndarray:
    out = arr
    for axis in range(n):
        out = np.repeat(out, 2, axis=axis)
    return out


def _cubes_from_mask(mask: np.ndarray, level: int) -> List[DyadicCube]:
    return [DyadicCube(level, tuple(int(v) for v in row)) for row in np.argwhere(mask)]


# --- dyadic 극대 분해 ---

def dyadic_maximal_decomposition(G: CellSet) -> LevelSetDecomposition:
    full = _level_tables(G, _block_all)
    cubes: List[DyadicCube] = []
    for k in range(G.J, -1, -1):
        if k == G.J:
            selected = full[k]
        else:
            selected = full[k] & ~_expand(full[k + 1], G.n)
        cubes.extend(_cubes_from_mask(selected, k))
    cubes.sort()
    return LevelSetDecomposition(cubes=cubes, flavor="dyadic_maximal", source_set=G)


# --- 거리 ---

def distance_sq_to_complement(G: CellSet, cube: DyadicCube) -> int:
    """
    dist(Q, G^c)^2. G^c 는 G 밖의 최소 셀(닫힌 단위 큐브)과 루트 바깥.
    박스를 두 배씩 넓혀 가며 가장 가까운 여집합 셀을 찾는다.
    """
    size = 1 << G.J
    lo_corner = cube.lower_corner()
    hi_corner = tuple(a + cube.side for a in lo_corner)
    outside = min(min(a, size - b) for a, b in zip(lo_corner, hi_corner))
    best = outside * outside

    radius = max(cube.side, 1)
    while True:
        box = tuple(
            slice(max(a - radius, 0), min(b + radius, size))
            for a, b in zip(lo_corner, hi_corner)
        )
        holes = ~G.mask[box]
        covers_root = all(s.start == 0 and s.stop == size for s in box)
        if holes.any():
            cells = np.argwhere(holes) + np.array([s.start for s in box], dtype=np.int64)
            lo = np.array(lo_corner, dtype=np.int64)
            hi = np.array(hi_corner, dtype=np.int64)
            gaps = np.maximum(0, np.maximum(cells - hi, lo - (cells + 1)))
            nearest = int((gaps * gaps).sum(axis=1).min())
            if nearest <= radius * radius or covers_root:
                return min(best, nearest)
        if best <= radius * radius or covers_root:
            return best
        radius *= 2


# --- Whitney 분해 ---

def whitney_decomposition(G: CellSet) -> LevelSetDecomposition:
    full = _level_tables(G, _block_all)
    touched = _level_tables(G, _block_any)
    cubes: List[DyadicCube] = []

    stack = [DyadicCube(G.J, (0,) * G.n)]
    while stack:
        cube = stack.pop()
        if not touched[cube.level][cube.coords]:
            continue
        if full[cube.level][cube.coords]:
            if cube.level == 0:
                cubes.append(cube)
                continue
            diam_sq = G.n * cube.side * cube.side
            if diam_sq <= distance_sq_to_complement(G, cube):
                cubes.append(cube)
                continue
        stack.extend(cube.children())

    cubes.sort()
    logger.debug("whitney: %d cells -> %d cubes", G.count(), len(cubes))
    return LevelSetDecomposition(cubes=cubes, flavor="whitney", source_set=G)


# --- 검증 ---

def verify_decomposition(d: LevelSetDecomposition) -> Dict[str, object]:
    """
    타일링, 2배 큐브 겹침, 거리 비율, 부모 극대성을 셀 단위로 그대로 계산한다.
    거리 비율은 레벨 ≥ 1 큐브만, 최소 셀은 unit_cells 로 따로 센다.
    """
    G = d.source_set
    cover = np.zeros(G.mask.shape, dtype=np.int64)
    doubles = np.zeros(G.mask.shape, dtype=np.int64)
    full = _level_tables(G, _block_all)

    ratios: List[float] = []
    parent_ok = True
    unit_cells = 0
    for cube in d.cubes:
        cover[cube.slices()] += 1
        dbl, _ = double_slices(cube, G.J)
        doubles[dbl] += 1
        if cube.level == 0:
            unit_cells += 1
        else:
            dist = math.sqrt(distance_sq_to_complement(G, cube))
            ratios.append(dist / (math.sqrt(G.n) * cube.side))
        parent = cube.parent()
        if parent.level <= G.J and full[parent.level][parent.coords]:
            parent_ok = False

    tiles = bool(np.array_equal(cover, G.mask.astype(np.int64)))
    dist_range: Optional[List[float]] = [min(ratios), max(ratios)] if ratios else None
    return {
        "flavor": d.flavor,
        "cubes": len(d.cubes),
        "cells": G.count(),
        "tiles_exactly": tiles,
        "pairwise_disjoint": bool(cover.max(initial=0) <= 1),
        "max_overlap_of_doubles": int(doubles.max(initial=0)),
        "overlap_bound": OVERLAP_BASE ** G.n,
        "doubles_outside_set": int(((doubles > 0) & ~G.mask).sum()),
        "dist_ratio_range": dist_range,
        "unit_cells": unit_cells,
        "parent_maximality": parent_ok,
    }


def write_decomposition_csv(d: LevelSetDecomposition, path: str) -> None:
    n = d.source_set.n
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(["level"] + [f"k{a}" for a in range(n)]) + "\n")
        for row in d.to_rows():
            f.write(",".join(str(v) for v in row) + "\n")
