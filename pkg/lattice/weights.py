"""
lattice/weights.py

가중치 σ (최소 셀별 밀도) 와 weak A∞ 반증기.

    |E|_σ / |2Q|_σ ≤ C_σ (|E|/|Q|)^θ      (E ⊂ Q, 모든 큐브 Q)

check_weak_ainfty 는 이 부등식을 표본 (Q, E) 에서 계산해 주장된 (θ, C_σ) 를
깨는 증인을 찾는다. 위반이 없다고 해서 소속이 증명되는 것은 아니다.

가중치 스펙 문법 (config 의 [weight] spec):
    constant [value=<v>]
    power gamma=<g> center=<c1,c2,...>
    half
    cell at=<i1,i2,...>
    file <path>
모든 종류 뒤에 theta=<t> C=<c> 를 붙여 주장 특성치를 줄 수 있다.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice.dyadic_core import CellSet, DyadicCube, LatticeError, axis_grids, double_slices, read_measure_file
from lattice.rng import Xorshift64Star

logger = logging.getLogger(__name__)

THETA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))
MAX_SUBCUBE_DEPTH = 4
MAX_WITNESSES = 10
RATIO_RTOL = 1e-12


class WeightError(ValueError):
    """가중치 스펙/값 검증 실패."""


@dataclass(frozen=True)
class Weight:
    n: int
    J: int
    density: np.ndarray
    kind: str                                  # constant | power | custom
    label: str
    claimed: Optional[Tuple[float, float]] = None   # (θ, C_σ)

    def __post_init__(self):
        if self.density.shape != (1 << self.J,) * self.n:
            raise WeightError(f"density shape {self.density.shape} does not match n={self.n} J={self.J}")
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0):
            raise WeightError(f"weight {self.label}: density must be finite and >= 0")
        self.density.flags.writeable = False


def _claim(claimed) -> Optional[Tuple[float, float]]:
    if claimed is None:
        return None
    theta, c = float(claimed[0]), float(claimed[1])
    if not (0 < theta <= 1) or not (c > 0) or not math.isfinite(c):
        raise WeightError(f"claimed character needs 0 < theta <= 1 and C > 0 (got {claimed})")
    return theta, c


# --- 생성자 ---

def constant_weight(n: int, J: int, value: float = 1.0, claimed=None) -> Weight:
    if not (value >= 0) or not math.isfinite(value):
        raise WeightError(f"constant weight value must be finite and >= 0 (value={value})")
    density = np.full((1 << J,) * n, float(value))
    return Weight(n, J, density, "constant", f"constant value={value:g}", _claim(claimed))


def power_weight(n: int, J: int, gamma: float, center: Sequence[float], claimed=None) -> Weight:
    """
    |x − center|^γ 를 셀 중심에서 평가 (중점 규칙).
    중심이 특이점과 겹치는 셀은 2^n 개 꼭짓점 값의 평균을 쓴다.
    """
    if len(center) != n:
        raise WeightError(f"power weight center {tuple(center)} needs {n} coordinates")
    if not (gamma > -n):
        raise WeightError(f"power weight needs gamma > -n for local integrability (gamma={gamma})")
    size = 1 << J
    grids = axis_grids(n, size)
    d2 = sum((g + 0.5 - float(c)) ** 2 for g, c in zip(grids, center))
    d2 = np.broadcast_to(d2, (size,) * n).astype(np.float64)

    singular = d2 == 0
    with np.errstate(divide="ignore"):
        density = np.where(singular, 0.0, d2 ** (gamma / 2.0))
    if singular.any():
        corners = [sum((0.5 * b) ** 2 for b in signs) for signs in product((-1, 1), repeat=n)]
        density[singular] = float(np.mean([c ** (gamma / 2.0) for c in corners]))
    label = f"power gamma={gamma:g} center={','.join(f'{c:g}' for c in center)}"
    return Weight(n, J, density, "power", label, _claim(claimed))


def half_weight(n: int, J: int, claimed=None) -> Weight:
    """루트의 축 0 방향 아래쪽 절반의 지시함수."""
    size = 1 << J
    density = np.zeros((size,) * n)
    density[: max(size // 2, 1)] = 1.0
    return Weight(n, J, density, "custom", "half", _claim(claimed))


def cell_weight(n: int, J: int, cell: Sequence[int], claimed=None) -> Weight:
    size = 1 << J
    cell = tuple(int(c) for c in cell)
    if len(cell) != n or any(c < 0 or c >= size for c in cell):
        raise WeightError(f"cell weight at {cell} outside root [0, {size})^{n}")
    density = np.zeros((size,) * n)
    density[cell] = 1.0
    return Weight(n, J, density, "custom", f"cell at={','.join(map(str, cell))}", _claim(claimed))


def weight_from_file(path: str, n: int, J: int, claimed=None) -> Weight:
    """측도 파일과 같은 형식: 각 줄의 값이 그 셀의 밀도."""
    try:
        tree = read_measure_file(path)
    except LatticeError as e:
        raise WeightError(f"weight file: {e}")
    if (tree.n, tree.J) != (n, J):
        raise WeightError(f"weight file {path} has n={tree.n} J={tree.J}, expected n={n} J={J}")
    return Weight(n, J, np.array(tree.finest), "custom", f"file {os.path.basename(path)}", _claim(claimed))


def _coords(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise WeightError(f"coordinates must be comma separated numbers, got {text!r}")


def parse_weight_spec(spec: str, n: int, J: int, base_dir: str = ".") -> Weight:
    tokens = spec.split()
    if not tokens:
        raise WeightError("empty weight spec")
    kind, rest = tokens[0].lower(), tokens[1:]

    opts: Dict[str, str] = {}
    positional: List[str] = []
    for tok in rest:
        if "=" in tok:
            key, value = tok.split("=", 1)
            opts[key.strip()] = value.strip()
        else:
            positional.append(tok)

    claimed = None
    if "theta" in opts or "C" in opts:
        if "theta" not in opts or "C" not in opts:
            raise WeightError("claimed character needs both theta=<t> and C=<c>")
        try:
            claimed = (float(opts.pop("theta")), float(opts.pop("C")))
        except ValueError:
            raise WeightError("theta and C must be numbers")

    def _number(key: str) -> float:
        try:
            return float(opts[key])
        except KeyError:
            raise WeightError(f"weight spec {kind!r} needs {key}=<value>")
        except ValueError:
            raise WeightError(f"weight spec {kind!r}: {key} must be a number")

    if kind == "constant":
        value = _number("value") if "value" in opts else 1.0
        return constant_weight(n, J, value, claimed)
    if kind == "power":
        if "center" not in opts:
            raise WeightError("power weight needs center=<coords>")
        return power_weight(n, J, _number("gamma"), _coords(opts["center"]), claimed)
    if kind == "half":
        return half_weight(n, J, claimed)
    if kind == "cell":
        if "at" not in opts:
            raise WeightError("cell weight needs at=<coords>")
        return cell_weight(n, J, [int(c) for c in _coords(opts["at"])], claimed)
    if kind == "file":
        if not positional:
            raise WeightError("file weight needs a path")
        path = positional[0]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return weight_from_file(path, n, J, claimed)
    raise WeightError(f"unknown weight kind {kind!r} (constant | power | half | cell | file)")


# --- σ 측도 ---

def sigma_measure(w: Weight, E: CellSet) -> float:
    """|E|_σ = Σ_{c∈E} σ(c) (셀 부피 1)."""
    if (E.n, E.J) != (w.n, w.J):
        raise WeightError("cell set and weight live on different lattices")
    return float(w.density[E.mask].sum())


# --- weak A∞ 반증 ---

@dataclass
class WeakAinftyReport:
    label: str
    samples: int
    pairs: int
    claimed: Optional[Tuple[float, float]]
    violations: int
    witnesses: List[dict]
    theta_grid: Tuple[float, ...]
    c_hat: List[float]
    fitted_theta: Optional[float]
    fitted_C: Optional[float]
    C_ref: float
    clipped_doubles: int
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "weight": self.label,
            "samples": self.samples,
            "pairs_evaluated": self.pairs,
            "claimed": list(self.claimed) if self.claimed else None,
            "violations": self.violations,
            "witnesses": self.witnesses,
            "theta_grid": list(self.theta_grid),
            "C_hat": self.c_hat,
            "fitted_theta": self.fitted_theta,
            "fitted_C": self.fitted_C,
            "C_ref": self.C_ref,
            "clipped_doubles": self.clipped_doubles,
            "notes": self.notes,
        }


@dataclass
class _CubeResult:
    cube: DyadicCube
    clipped: bool
    pairs: int
    c_hat: np.ndarray
    witnesses: List[dict]
    violations: int


def _random_union(rng: Xorshift64Star, cube: DyadicCube) -> np.ndarray:
    """Q 의 dyadic 부분큐브들의 무작위 합집합 (Q 상대 좌표 bool 배열)."""
    n = cube.n
    depth = 1 + rng.randbelow(min(cube.level, MAX_SUBCUBE_DEPTH))
    sub_side = cube.side >> depth
    per_axis = 1 << depth
    keep_prob = rng.random()
    picks = np.array([rng.random() < keep_prob for _ in range(per_axis ** n)], dtype=bool)
    if not picks.any():
        picks[rng.randbelow(picks.size)] = True
    picks = picks.reshape((per_axis,) * n)
    mask = picks
    for axis in range(n):
        mask = np.repeat(mask, sub_side, axis=axis)
    return mask


def _pair_check(ratio: np.ndarray, frac: np.ndarray, claimed, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(θ 격자별 최대 ratio/frac^θ, 주장 위반 bool 마스크)."""
    scaled = ratio[None, :] / frac[None, :] ** theta[:, None]
    c_hat = scaled.max(axis=1)
    if claimed is None:
        return c_hat, np.zeros(ratio.shape[0], dtype=bool)
    th, c = claimed
    return c_hat, ratio > c * frac ** th * (1.0 + RATIO_RTOL)


def _check_cube(w: Weight, cube: DyadicCube, rng: Xorshift64Star, theta: np.ndarray) -> _CubeResult:
    q_slices = cube.slices()
    dbl, clipped = double_slices(cube, w.J)
    sigma_2q = float(w.density[dbl].sum())
    local = w.density[q_slices]
    volume = local.size
    witnesses: List[dict] = []

    if sigma_2q == 0:
        return _CubeResult(cube, clipped, 0, np.zeros(theta.shape[0]), witnesses, 0)

    # 무작위 dyadic 합집합 E
    mask = _random_union(rng, cube)
    rand_ratio = np.array([float(local[mask].sum()) / sigma_2q])
    rand_frac = np.array([mask.sum() / volume])

    # 극값 집합: 무거운 셀부터 m 개 (|E| = m 에서 |E|_σ 최대)
    ordered = np.sort(local.reshape(-1))[::-1]
    cum = np.cumsum(ordered)
    ext_ratio = cum / sigma_2q
    ext_frac = np.arange(1, volume + 1) / volume

    ratio = np.concatenate([rand_ratio, ext_ratio])
    frac = np.concatenate([rand_frac, ext_frac])
    c_hat, bad = _pair_check(ratio, frac, w.claimed, theta)
    for idx in np.flatnonzero(bad)[:MAX_WITNESSES]:
        witnesses.append({
            "Q": {"level": cube.level, "coords": list(cube.coords)},
            "E": "random dyadic union" if idx == 0 else f"{idx} heaviest cells",
            "E_over_Q": float(frac[idx]),
            "sigma_ratio": float(ratio[idx]),
            "bound": float(w.claimed[1] * frac[idx] ** w.claimed[0]),
        })
    return _CubeResult(cube, clipped, int(ratio.shape[0]), c_hat, witnesses, int(bad.sum()))


def _candidate_cubes(w: Weight, samples: int, rng: Xorshift64Star) -> List[DyadicCube]:
    cubes = []
    for i in range(samples):
        r = rng.split(i)
        level = 1 + r.randbelow(w.J)
        per_axis = 1 << (w.J - level)
        cubes.append(DyadicCube(level, tuple(r.randbelow(per_axis) for _ in range(w.n))))
    # 가장 무거운 셀의 조상 사슬 (결정적 후보)
    heavy = np.unravel_index(int(np.argmax(w.density)), w.density.shape)
    cell = DyadicCube(0, tuple(int(v) for v in heavy))
    for level in range(1, w.J + 1):
        cubes.append(cell.ancestor(level))
    return cubes


def check_weak_ainfty(
    w: Weight,
    samples: int,
    rng_seed: int,
    theta_grid: Sequence[float] = THETA_GRID,
    threads: int = 1,
) -> WeakAinftyReport:
    """
    표본 큐브마다 무작위 E 하나와 극값 집합 전부를 검사한다.
    표본 i 는 rng.split(i) 스트림만 쓰므로 스레드 수와 무관하게 재현된다.
    """
    if samples < 1:
        raise WeightError(f"samples must be >= 1 (samples={samples})")
    if w.J < 1:
        raise WeightError("weak A-infinity check needs J >= 1")
    theta = np.array(sorted(theta_grid), dtype=np.float64)
    rng = Xorshift64Star(rng_seed)
    cubes = _candidate_cubes(w, samples, rng)
    streams = [rng.split(1_000_000 + i) for i in range(len(cubes))]

    jobs = list(zip(cubes, streams))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _check_cube(w, job[0], job[1], theta), jobs))
    else:
        results = [_check_cube(w, cube, stream, theta) for cube, stream in jobs]

    c_hat = np.zeros(theta.shape[0])
    witnesses: List[dict] = []
    violations = pairs = clipped = 0
    for res in results:
        c_hat = np.maximum(c_hat, res.c_hat)
        violations += res.violations
        pairs += res.pairs
        clipped += int(res.clipped)
        if len(witnesses) < MAX_WITNESSES:
            witnesses.extend(res.witnesses[: MAX_WITNESSES - len(witnesses)])

    c_ref = w.claimed[1] if w.claimed else float(2 ** w.n)
    ok = [i for i in range(theta.shape[0]) if c_hat[i] <= c_ref]
    fitted_theta = float(theta[max(ok)]) if ok else None
    fitted_c = float(c_hat[max(ok)]) if ok else None

    notes = []
    if clipped:
        notes.append(f"{clipped} doubled cubes clipped to the root (|2Q|_sigma shrinks, check is conservative)")
    if w.claimed is None:
        notes.append("no claimed character: violations are not counted, only the fit is reported")
    logger.info(
        "weak A-infinity %s: cubes=%d pairs=%d violations=%d theta_hat=%s",
        w.label, len(cubes), pairs, violations, fitted_theta,
    )
    return WeakAinftyReport(
        label=w.label,
        samples=len(cubes),
        pairs=pairs,
        claimed=w.claimed,
        violations=violations,
        witnesses=witnesses,
        theta_grid=tuple(float(t) for t in theta),
        c_hat=[float(v) for v in c_hat],
        fitted_theta=fitted_theta,
        fitted_C=fitted_c,
        C_ref=c_ref,
        clipped_doubles=clipped,
        notes=notes,
    )
