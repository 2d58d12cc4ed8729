"""
lattice/dyadic_core.py

유한 이진(dyadic) 격자 위의 측도 저장소.

- 루트 큐브 [0, 2^J)^n, 최소 셀(레벨 0)은 단위 정육면체
- 레벨 k 큐브 = 변의 길이 2^k, 좌표 (k_1..k_n) → ∏[k_i 2^k, (k_i+1) 2^k)
- "점 x" 는 항상 정수 인덱스 x 를 가진 최소 셀의 중심을 뜻한다

MeasureTree 는 레벨별 질량표를 미리 모두 합산해 둔다.
2^{Jn} ≤ 2^24 이면 레벨별 numpy 배열(dense), 그보다 크면 0 이 아닌 셀만
담은 dict(sparse) 로 저장한다. 한번 만들어진 트리는 바꾸지 않는다.

측도 파일 형식:
    n=<dim> J=<root_level>
    <i_1> ... <i_n> <mass>      # 한 줄에 원자 하나, 같은 셀은 누적
"""

import logging
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_DIM = 3
DENSE_LIMIT_LOG2 = 24

Cell = Tuple[int, ...]


class LatticeError(ValueError):
    """격자/측도 입력 검증 실패."""


# --- 큐브 ---

@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    coords: Cell

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> int:
        return 1 << self.level

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(c >> 1 for c in self.coords))

    def ancestor(self, level: int) -> "DyadicCube":
        if level < self.level:
            raise LatticeError(f"ancestor level {level} below cube level {self.level}")
        shift = level - self.level
        return DyadicCube(level, tuple(c >> shift for c in self.coords))

    def children(self) -> List["DyadicCube"]:
        if self.level == 0:
            return []
        out = []
        for bits in range(1 << self.n):
            coords = tuple(
                2 * c + ((bits >> (self.n - 1 - i)) & 1)
                for i, c in enumerate(self.coords)
            )
            out.append(DyadicCube(self.level - 1, coords))
        return out

    def contains_cell(self, cell: Sequence[int]) -> bool:
        return all((x >> self.level) == c for x, c in zip(cell, self.coords))

    def contains(self, other: "DyadicCube") -> bool:
        if other.level > self.level:
            return False
        return other.ancestor(self.level) == self

    def lower_corner(self) -> Cell:
        return tuple(c << self.level for c in self.coords)

    def slices(self) -> Tuple[slice, ...]:
        s = self.side
        return tuple(slice(c * s, (c + 1) * s) for c in self.coords)


def double_slices(cube: DyadicCube, J: int) -> Tuple[Tuple[slice, ...], bool]:
    """
    동심 2배 큐브 2Q 의 셀 범위 (닫힌 2Q 안에 중심이 있는 셀), 루트로 잘라낸다.
    레벨 0 큐브는 3^n 블록. 두 번째 값은 잘림 여부.
    """
    size = 1 << J
    half = cube.side // 2 if cube.level >= 1 else 1
    out = []
    clipped = False
    for c in cube.coords:
        lo = c * cube.side - half
        hi = (c + 1) * cube.side + half
        if lo < 0 or hi > size:
            clipped = True
        out.append(slice(max(lo, 0), min(hi, size)))
    return tuple(out), clipped


def cube_of(cell: Sequence[int], level: int) -> DyadicCube:
    return DyadicCube(level, tuple(int(x) >> level for x in cell))


def common_ancestor_level(a, b) -> int:
    """
    두 셀(정수 튜플) 또는 두 큐브가 처음으로 같은 조상을 갖는 레벨.

    셀끼리라면 축별 XOR 의 bit_length 중 최댓값과 같다.
    대칭이고, 한쪽을 조상 큐브로 바꿔도 값이 줄지 않는다.
    """
    if isinstance(a, DyadicCube) or isinstance(b, DyadicCube):
        pa = a if isinstance(a, DyadicCube) else DyadicCube(0, tuple(a))
        pb = b if isinstance(b, DyadicCube) else DyadicCube(0, tuple(b))
        if pa.n != pb.n:
            raise LatticeError("dimension mismatch in common_ancestor_level")
        m = max(pa.level, pb.level)
        for x, y in zip(pa.lower_corner(), pb.lower_corner()):
            m = max(m, (x ^ y).bit_length())
        return m
    if len(a) != len(b):
        raise LatticeError("dimension mismatch in common_ancestor_level")
    return max((int(x) ^ int(y)).bit_length() for x, y in zip(a, b))


# --- 측도 트리 ---

@dataclass(frozen=True)
class MeasureTree:
    n: int
    J: int
    dense: bool
    levels: tuple  # levels[k]: ndarray (dense) 또는 dict (sparse)

    @property
    def size(self) -> int:
        return 1 << self.J

    @property
    def total(self) -> float:
        top = self.levels[self.J]
        if self.dense:
            return float(top.reshape(-1)[0])
        return float(top.get((0,) * self.n, 0.0))

    @property
    def finest(self) -> np.ndarray:
        if not self.dense:
            raise LatticeError("finest array is only available for dense trees")
        return self.levels[0]

    def level_array(self, k: int) -> np.ndarray:
        if not self.dense:
            raise LatticeError(
                f"level arrays need dense storage (2^(J*n) = 2^{self.J * self.n} cells)"
            )
        return self.levels[k]

    def support(self) -> List[Tuple[Cell, float]]:
        """질량이 0 보다 큰 최소 셀 목록 (좌표 정렬)."""
        if self.dense:
            arr = self.levels[0]
            idx = np.argwhere(arr > 0)
            return [(tuple(int(v) for v in row), float(arr[tuple(row)])) for row in idx]
        return sorted((c, m) for c, m in self.levels[0].items() if m > 0)

    def masses_at(self, level: int, coords: np.ndarray) -> np.ndarray:
        """
        coords: (P, n) 정수 배열. 레벨 level 큐브들의 질량을 한 번에 조회.
        level > J 는 루트를 품는 가상의 상위 큐브로 보고 전체 질량을 준다.
        """
        coords = np.asarray(coords, dtype=np.int64)
        if level > self.J:
            return np.full(coords.shape[0], self.total)
        table = self.levels[level]
        if self.dense:
            return table[tuple(coords.T)]
        return np.array([table.get(tuple(int(v) for v in row), 0.0) for row in coords])


def _check_dims(n: int, J: int) -> None:
    if n not in range(1, MAX_DIM + 1):
        raise LatticeError(f"dimension n={n} not supported (1..{MAX_DIM})")
    if J < 0:
        raise LatticeError(f"root level J={J} must be >= 0")


def _check_mass(mass, where: str) -> float:
    value = float(mass)
    if not math.isfinite(value) or value < 0:
        raise LatticeError(f"mass must be finite and >= 0 ({where}: {mass!r})")
    return value


def _check_cell(cell: Sequence[int], n: int, J: int) -> Cell:
    if len(cell) != n:
        raise LatticeError(f"cell {tuple(cell)} has {len(cell)} coordinates, expected {n}")
    out = tuple(int(c) for c in cell)
    size = 1 << J
    for c in out:
        if c < 0 or c >= size:
            raise LatticeError(f"cell {out} outside root [0, {size})^{n}")
    return out


def _aggregate_dense(arr: np.ndarray, n: int) -> np.ndarray:
    m = arr.shape[0] // 2
    shaped = arr.reshape(sum(((m, 2) for _ in range(n)), ()))
    return shaped.sum(axis=tuple(range(1, 2 * n, 2)))


def _aggregate_sparse(table: Dict[Cell, float]) -> Dict[Cell, float]:
    out: Dict[Cell, float] = {}
    for cell, mass in table.items():
        key = tuple(c >> 1 for c in cell)
        out[key] = out.get(key, 0.0) + mass
    return out


def _tree_from_finest(n: int, J: int, finest) -> MeasureTree:
    if isinstance(finest, np.ndarray):
        levels = [finest]
        for _ in range(J):
            levels.append(_aggregate_dense(levels[-1], n))
        for arr in levels:
            arr.flags.writeable = False
        return MeasureTree(n=n, J=J, dense=True, levels=tuple(levels))

    levels = [dict(finest)]
    for _ in range(J):
        levels.append(_aggregate_sparse(levels[-1]))
    return MeasureTree(n=n, J=J, dense=False, levels=tuple(MappingProxyType(t) for t in levels))


def axis_grids(n: int, size: int) -> List[np.ndarray]:
    """축별 인덱스 배열 (브로드캐스트용 모양)."""
    out = []
    for axis in range(n):
        shape = [1] * n
        shape[axis] = size
        out.append(np.arange(size, dtype=np.int64).reshape(shape))
    return out


def is_dense_size(n: int, J: int) -> bool:
    return J * n <= DENSE_LIMIT_LOG2


def build_measure(n: int, J: int, atoms: Iterable[Tuple[Sequence[int], float]]) -> MeasureTree:
    """
    원자 목록 [(cell, mass), ...] 로 측도 트리를 만든다.

    같은 셀의 원자는 누적. 음수/NaN/무한대 질량, 루트 밖 셀, n ∉ {1,2,3}
    은 LatticeError. 모든 레벨의 큐브 질량을 즉시 합산해 둔다.
    """
    _check_dims(n, J)
    if is_dense_size(n, J):
        finest = np.zeros((1 << J,) * n, dtype=np.float64)
        cells: List[Cell] = []
        masses: List[float] = []
        for i, (cell, mass) in enumerate(atoms):
            cells.append(_check_cell(cell, n, J))
            masses.append(_check_mass(mass, f"atom {i}"))
        if cells:
            idx = tuple(np.array(cells, dtype=np.int64).T)
            np.add.at(finest, idx, np.array(masses))
        return _tree_from_finest(n, J, finest)

    table: Dict[Cell, float] = {}
    for i, (cell, mass) in enumerate(atoms):
        key = _check_cell(cell, n, J)
        value = _check_mass(mass, f"atom {i}")
        if value > 0:
            table[key] = table.get(key, 0.0) + value
    logger.debug("sparse measure tree: n=%d J=%d atoms=%d", n, J, len(table))
    return _tree_from_finest(n, J, table)


def measure_from_array(finest: np.ndarray) -> MeasureTree:
    """최소 셀 질량 배열 (2^J,)*n 로부터 dense 트리."""
    arr = np.array(finest, dtype=np.float64)
    n = arr.ndim
    side = arr.shape[0]
    J = side.bit_length() - 1
    if any(s != side for s in arr.shape) or (1 << J) != side:
        raise LatticeError(f"array shape {arr.shape} is not (2^J,)*n")
    _check_dims(n, J)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise LatticeError("masses must be finite and >= 0")
    return _tree_from_finest(n, J, arr)


def cube_mass(tree: MeasureTree, cube: DyadicCube) -> float:
    """μ(Q). 루트보다 위 레벨은 루트를 품는 가상 큐브로 보고 전체 질량."""
    if cube.n != tree.n:
        raise LatticeError(f"cube dimension {cube.n} != measure dimension {tree.n}")
    if cube.level < 0:
        raise LatticeError(f"cube level {cube.level} < 0")
    if cube.level > tree.J:
        if any(c != 0 for c in cube.coords):
            return 0.0
        return tree.total
    limit = 1 << (tree.J - cube.level)
    if any(c < 0 or c >= limit for c in cube.coords):
        raise LatticeError(f"cube {cube} outside root level {tree.J}")
    table = tree.levels[cube.level]
    if tree.dense:
        return float(table[cube.coords])
    return float(table.get(cube.coords, 0.0))


def restrict_measure(tree: MeasureTree, cells: "CellSet") -> MeasureTree:
    """μ_E = χ_E dμ."""
    if (cells.n, cells.J) != (tree.n, tree.J):
        raise LatticeError("cell set and measure live on different lattices")
    return _tree_from_finest(tree.n, tree.J, np.where(cells.mask, tree.finest, 0.0))


def scale_measure(tree: MeasureTree, factor: float) -> MeasureTree:
    factor = _check_mass(factor, "scale factor")
    if tree.dense:
        return _tree_from_finest(tree.n, tree.J, tree.finest * factor)
    return _tree_from_finest(tree.n, tree.J, {c: m * factor for c, m in tree.levels[0].items()})


# --- 셀 집합 ---

class CellSet:
    """루트 안 최소 셀들의 집합 (읽기 전용 bool 배열)."""

    __slots__ = ("n", "J", "mask")

    def __init__(self, n: int, J: int, mask: np.ndarray):
        _check_dims(n, J)
        if not is_dense_size(n, J):
            raise LatticeError(f"cell sets need 2^(J*n) <= 2^{DENSE_LIMIT_LOG2}")
        mask = np.array(mask, dtype=bool)
        if mask.shape != (1 << J,) * n:
            raise LatticeError(f"mask shape {mask.shape} does not match n={n} J={J}")
        mask.flags.writeable = False
        self.n = n
        self.J = J
        self.mask = mask

    @classmethod
    def empty(cls, n: int, J: int) -> "CellSet":
        return cls(n, J, np.zeros((1 << J,) * n, dtype=bool))

    @classmethod
    def full(cls, n: int, J: int) -> "CellSet":
        return cls(n, J, np.ones((1 << J,) * n, dtype=bool))

    @classmethod
    def from_cells(cls, n: int, J: int, cells: Iterable[Sequence[int]]) -> "CellSet":
        mask = np.zeros((1 << J,) * n, dtype=bool)
        for cell in cells:
            mask[_check_cell(cell, n, J)] = True
        return cls(n, J, mask)

    @classmethod
    def from_cube(cls, n: int, J: int, cube: DyadicCube) -> "CellSet":
        mask = np.zeros((1 << J,) * n, dtype=bool)
        mask[cube.slices()] = True
        return cls(n, J, mask)

    @classmethod
    def ball(cls, n: int, J: int, center: Sequence[float], radius: float) -> "CellSet":
        """
        셀 중심(셀 i 의 중심은 i + 0.5)과 점 center 의 거리가 radius 보다 작은 셀.
        center 가 정수 또는 반정수 좌표면 비교는 정확하다.
        """
        grids = axis_grids(n, 1 << J)
        d2 = sum((g + 0.5 - float(c)) ** 2 for g, c in zip(grids, center))
        return cls(n, J, np.broadcast_to(d2 < radius * radius, (1 << J,) * n))

    def _same_lattice(self, other: "CellSet") -> None:
        if (self.n, self.J) != (other.n, other.J):
            raise LatticeError("cell sets live on different lattices")

    def __or__(self, other: "CellSet") -> "CellSet":
        self._same_lattice(other)
        return CellSet(self.n, self.J, self.mask | other.mask)

    def __and__(self, other: "CellSet") -> "CellSet":
        self._same_lattice(other)
        return CellSet(self.n, self.J, self.mask & other.mask)

    def __sub__(self, other: "CellSet") -> "CellSet":
        self._same_lattice(other)
        return CellSet(self.n, self.J, self.mask & ~other.mask)

    def __invert__(self) -> "CellSet":
        return CellSet(self.n, self.J, ~self.mask)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CellSet)
            and (self.n, self.J) == (other.n, other.J)
            and bool(np.array_equal(self.mask, other.mask))
        )

    def __contains__(self, cell) -> bool:
        return bool(self.mask[tuple(cell)])

    def count(self) -> int:
        return int(self.mask.sum())

    def cells(self) -> Iterator[Cell]:
        for row in np.argwhere(self.mask):
            yield tuple(int(v) for v in row)

    def is_subset(self, other: "CellSet") -> bool:
        self._same_lattice(other)
        return not bool(np.any(self.mask & ~other.mask))


# --- 측도 파일 ---

def _parse_header(line: str, path: str) -> Tuple[int, int]:
    fields = {}
    for token in line.split():
        if "=" not in token:
            raise LatticeError(f"{path}: malformed header token {token!r}")
        key, value = token.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        return int(fields["n"]), int(fields["J"])
    except (KeyError, ValueError):
        raise LatticeError(f"{path}: header must be 'n=<dim> J=<root_level>', got {line!r}")


def parse_mass(token: str, where: str) -> Decimal:
    try:
        value = Decimal(token)
    except InvalidOperation:
        raise LatticeError(f"{where}: mass {token!r} is not a decimal number")
    if not value.is_finite() or value < 0:
        raise LatticeError(f"{where}: mass {token!r} must be finite and >= 0")
    return value


def read_measure_file(path: str) -> MeasureTree:
    """
    측도 파일을 읽어 MeasureTree 로.
    질량은 Decimal 로 정확히 읽어 같은 셀끼리 더한 뒤 float 로 바꾼다.
    '#' 이후는 주석, 빈 줄은 무시.
    """
    header = None
    acc: Dict[Cell, Decimal] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                header = _parse_header(line, path)
                _check_dims(*header)
                continue
            n, J = header
            parts = line.split()
            where = f"{path}:{lineno}"
            if len(parts) != n + 1:
                raise LatticeError(f"{where}: expected {n} indices and a mass, got {line!r}")
            try:
                cell = _check_cell([int(p) for p in parts[:n]], n, J)
            except ValueError as e:
                if isinstance(e, LatticeError):
                    raise LatticeError(f"{where}: {e}")
                raise LatticeError(f"{where}: cell indices must be integers ({line!r})")
            acc[cell] = acc.get(cell, Decimal(0)) + parse_mass(parts[n], where)

    if header is None:
        raise LatticeError(f"{path}: empty measure file")
    n, J = header
    logger.info("measure file %s: n=%d J=%d atoms=%d", path, n, J, len(acc))
    return build_measure(n, J, ((c, float(m)) for c, m in acc.items()))


def write_measure_file(tree: MeasureTree, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"n={tree.n} J={tree.J}\n")
        for cell, mass in tree.support():
            f.write(" ".join(str(c) for c in cell) + " " + format(mass, ".17g") + "\n")
