# 실험용 측도 카탈로그 (이름 → 생성 함수). 필요하면 항목만 늘리면 됨.
#
#   zero           : 질량 0
#   single-atom    : 셀 하나에 질량 1 (atom=i,j 로 위치 지정, 기본은 루트 중앙)
#   sparse-random  : atoms 개 무작위 셀에 (0, 1] 균등 질량
#   uniform        : 모든 셀 질량 1
#   remark-log     : p0 = (2^{J-1},..) 중심 반지름 R = 2^{J-2} 안에서 밀도 R/|x - p0|
#   sharp          : 최적성 구성의 f (epsilon, alpha 필요, 셀 표현이 가능할 때만)

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from lattice.dyadic_core import MeasureTree, axis_grids, build_measure, measure_from_array
from lattice.rng import Xorshift64Star
from analysis.sharpness import SharpnessError, build_sharp_example

DEFAULT_ATOMS = 64


class CatalogError(ValueError):
    """알 수 없는 생성기 이름 또는 옵션 오류."""


def _zero(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    return build_measure(n, J, [])


def _single_atom(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    if "atom" in options:
        cell = tuple(int(v) for v in options["atom"].split(","))
    else:
        cell = (1 << (J - 1),) * n if J >= 1 else (0,) * n
    return build_measure(n, J, [(cell, 1.0)])


def sparse_random_atoms(n: int, J: int, rng: Xorshift64Star, atoms: int) -> List[Tuple[Tuple[int, ...], float]]:
    size = 1 << J
    out = []
    for _ in range(atoms):
        cell = tuple(rng.randbelow(size) for _ in range(n))
        # (0, 1] 구간
        out.append((cell, 1.0 - rng.random()))
    return out


def _sparse_random(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    atoms = int(options.get("atoms", DEFAULT_ATOMS))
    if atoms < 1:
        raise CatalogError(f"sparse-random needs atoms >= 1 (atoms={atoms})")
    return build_measure(n, J, sparse_random_atoms(n, J, Xorshift64Star(seed), atoms))


def _uniform(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    return measure_from_array(np.ones((1 << J,) * n))


def remark_ball(n: int, J: int) -> Tuple[Tuple[float, ...], float]:
    """remark-log 측도의 중심(격자점)과 반지름."""
    if J < 3:
        raise CatalogError(f"remark-log needs J >= 3 (J={J})")
    return (float(1 << (J - 1)),) * n, float(1 << (J - 2))


def _remark_log(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    center, radius = remark_ball(n, J)
    size = 1 << J
    dist_sq = sum((g + 0.5 - c) ** 2 for g, c in zip(axis_grids(n, size), center))
    dist = np.sqrt(dist_sq)
    # 중심이 격자점이라 셀 중심까지 거리는 0.5 이상
    density = np.where(dist < radius, radius / dist, 0.0)
    return measure_from_array(np.broadcast_to(density, (size,) * n))


def _sharp(n: int, J: int, seed: int, options: Dict[str, str]) -> MeasureTree:
    try:
        epsilon = float(options["epsilon"])
        alpha = float(options["alpha"])
    except KeyError as e:
        raise CatalogError(f"sharp generator needs option {e.args[0]}") from e
    ex = build_sharp_example(epsilon, n, alpha)
    if ex.tree is None:
        raise SharpnessError(f"sharp example eps={epsilon} n={n} has no cell representation (N={ex.N})")
    if ex.N != J:
        raise CatalogError(f"sharp example eps={epsilon} lives on J={ex.N}, config says J={J}")
    return ex.tree


GENERATORS: Dict[str, Callable[[int, int, int, Dict[str, str]], MeasureTree]] = {
    "zero": _zero,
    "single-atom": _single_atom,
    "sparse-random": _sparse_random,
    "uniform": _uniform,
    "remark-log": _remark_log,
    "sharp": _sharp,
}


def generate(name: str, n: int, J: int, seed: int, options: Optional[Dict[str, str]] = None) -> MeasureTree:
    if name not in GENERATORS:
        raise CatalogError(f"unknown generator {name!r} (choose from {', '.join(GENERATORS)})")
    return GENERATORS[name](n, J, seed, dict(options or {}))


def battery(seed: int, count: int, n: int, J: int, atoms: int = DEFAULT_ATOMS) -> List[MeasureTree]:
    """시드 하나에서 split 으로 count 개의 독립 sparse-random 측도."""
    if count < 1:
        raise CatalogError(f"battery count must be >= 1 (count={count})")
    root = Xorshift64Star(seed)
    return [build_measure(n, J, sparse_random_atoms(n, J, root.split(i), atoms)) for i in range(count)]


def random_cell_sets(seed: int, count: int, n: int, J: int, density: float) -> List[np.ndarray]:
    """Whitney 검사용 무작위 셀 집합 (블록 단위로 뭉친 모양)."""
    if not (0 < density < 1):
        raise CatalogError(f"density must lie in (0, 1) (density={density})")
    root = Xorshift64Star(seed)
    size = 1 << J
    out = []
    for i in range(count):
        rng = root.split(i)
        block = 1 << rng.randbelow(max(1, J - 1))
        per_axis = size // block
        picks = np.array([rng.random() < density for _ in range(per_axis ** n)], dtype=bool).reshape((per_axis,) * n)
        mask = picks
        for axis in range(n):
            mask = np.repeat(mask, block, axis=axis)
        out.append(mask)
    return out


def describe(name: str) -> str:
    return {
        "zero": "zero measure",
        "single-atom": "unit atom",
        "sparse-random": "seeded sparse random atoms",
        "uniform": "unit mass per cell",
        "remark-log": "density R/|x - p0| on B(p0, R)",
        "sharp": "sharpness construction",
    }.get(name, name)
