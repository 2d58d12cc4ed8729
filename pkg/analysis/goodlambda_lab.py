"""
analysis/goodlambda_lab.py

good-λ 부등식과 그 주변 결과를 격자 위에서 셀 단위로 검증한다.

    σ{𝒯 > τλ, 𝓜_α ≤ ελ} ≤ C 2^{−(α/ε^q)(2^q−1)} σ{𝒯 > λ}          (good-λ)
    σ{𝒯^q > (1+c′ε)λ, 𝓜_α^q ≤ ελ} ≤ C σ{𝒯^q > λ}, C < 1            (good-τ)
    ‖𝒯‖_{L^p(σ)} ≤ C ‖𝓜_α‖_{L^p(σ)}                                  (노름 비교)
    ∫_{2B} exp(c T(μ_B)^q) dσ ≤ C σ(2B)                               (지수 적분성)

상수 (c, C, τ, c′) 는 존재만 보장되므로 여기서는 적합/상한값으로만 다룬다.
레벨 집합의 σ 측도는 가중치 밀도의 정확한 셀 합이다 (표본 추출 없음).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice.dyadic_core import CellSet, MeasureTree, restrict_measure, scale_measure
from lattice.potentials import PotentialParams, dyadic_terms, potential_field
from lattice.weights import Weight
from lattice.whitney import dyadic_maximal_decomposition
from analysis.reports import combine_verdicts

logger = logging.getLogger(__name__)

DEFAULT_QUANTILES = (0.5, 0.75, 0.9, 0.99)
DEFAULT_EPS_GRID = tuple(2.0 ** -k for k in range(1, 13))
DEFAULT_CPRIME_GRID = tuple(float(2 ** k) for k in range(0, 17))
DEFAULT_C_TEST_GRID = tuple(round(0.05 * i, 2) for i in range(1, 41))
BETA_GRID = tuple(round(0.25 + 0.05 * i, 2) for i in range(0, 76))
MIN_LEVEL_CELLS = 8
REL_TOL = 1e-12


class LabError(ValueError):
    """실험 입력 검증 실패."""


@dataclass(frozen=True)
class GoodLambdaQuery:
    lam: float
    epsilon: float
    tau: float = 2.0
    flavor: str = "dyadic"
    weight: Optional[Weight] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.lam > 0) or not math.isfinite(self.lam):
            raise LabError(f"lambda must be a finite positive number (lambda={self.lam})")
        if not (0 < self.epsilon < 1):
            raise LabError(f"epsilon must lie in (0, 1) (epsilon={self.epsilon})")
        if not (self.tau > 1):
            raise LabError(f"tau must be > 1 (tau={self.tau})")
        if self.flavor not in ("dyadic", "ball"):
            raise LabError(f"flavor must be dyadic or ball (flavor={self.flavor!r})")


@dataclass
class LabFields:
    """한 측도에 대해 미리 계산해 둔 포텐셜 / 극대 함수 격자."""
    tree: MeasureTree
    params: PotentialParams
    flavor: str
    potential: np.ndarray
    maximal: np.ndarray


def compute_fields(tree: MeasureTree, params: PotentialParams, flavor: str = "dyadic", threads: Optional[int] = None) -> LabFields:
    if flavor not in ("dyadic", "ball"):
        raise LabError(f"flavor must be dyadic or ball (flavor={flavor!r})")
    pot = potential_field(tree, params, flavor, threads=threads).as_grid()
    mx = potential_field(tree, params, f"maximal_{flavor}", threads=threads).as_grid()
    return LabFields(tree=tree, params=params, flavor=flavor, potential=pot, maximal=mx)


def _density(weight: Optional[Weight], shape) -> np.ndarray:
    if weight is None:
        return np.ones(shape)
    if weight.density.shape != shape:
        raise LabError(f"weight lattice {weight.density.shape} does not match field lattice {shape}")
    return weight.density


def _sigma(density: np.ndarray, mask: np.ndarray) -> float:
    return float(density[mask].sum())


# --- 이론 상수 ---

def theorem_log2_bound(alpha: float, q: float, epsilon: float) -> float:
    """log2 of 2^{−(α/ε^q)(2^q−1)} (작은 ε 에서 underflow 하지 않도록 log 로)."""
    return -(alpha / epsilon ** q) * (2.0 ** q - 1.0)


def classical_bound(n: int, alpha: float, epsilon: float) -> float:
    """선형 포텐셜의 다항 감쇠 ε^{n/(n−α)}."""
    return epsilon ** (n / (n - alpha))


def m_choice(q: float, epsilon: float, tau: float = 2.0, flavor: str = "dyadic") -> int:
    if flavor == "ball":
        return int(math.floor(tau ** q * (1.0 - 2.0 ** -q) / epsilon ** q - 1.0))
    return int(math.floor((2.0 ** q - 1.0) / epsilon ** q - 1.0))


def lambda_values(values: np.ndarray, quantiles: Sequence[float]) -> List[Tuple[float, float]]:
    """양수 값들의 분위수로 λ 를 고른다. 양수 값이 없으면 빈 목록."""
    pos = values[values > 0]
    if pos.size == 0:
        return []
    return [(float(qt), float(np.quantile(pos, qt))) for qt in quantiles]


# --- good-λ ---

def good_lambda_sets(fields: LabFields, query: GoodLambdaQuery) -> Tuple[np.ndarray, np.ndarray]:
    """분자 집합 {pot > τλ, max ≤ ελ} 과 분모 집합 {pot > λ} (셀마다 bool)."""
    if query.flavor != fields.flavor:
        raise LabError(f"query flavor {query.flavor} does not match fields flavor {fields.flavor}")
    num_set = (fields.potential > query.tau * query.lam) & (fields.maximal <= query.epsilon * query.lam)
    den_set = fields.potential > query.lam
    return num_set, den_set


def good_lambda_ratio(fields: LabFields, query: GoodLambdaQuery) -> Dict[str, object]:
    """
    분자 σ{pot > τλ, max ≤ ελ}, 분모 σ{pot > λ}.
    분모가 0 이면 skipped 로 표시하고 나누지 않는다.
    """
    num_set, den_set = good_lambda_sets(fields, query)
    params = fields.params
    density = _density(query.weight, fields.potential.shape)
    num = _sigma(density, num_set)
    den = _sigma(density, den_set)
    log2_bound = theorem_log2_bound(params.alpha, params.q, query.epsilon)
    skipped = den == 0
    return {
        "epsilon": query.epsilon,
        "lambda": query.lam,
        "tau": query.tau,
        "numerator": num,
        "denominator": den,
        "ratio": None if skipped else num / den,
        "skipped": skipped,
        "theorem_bound": 2.0 ** log2_bound,
        "log2_theorem_bound": log2_bound,
        "classical_bound": classical_bound(params.n, params.alpha, query.epsilon),
        "m": m_choice(params.q, query.epsilon, query.tau, query.flavor),
    }


@dataclass
class SweepReport:
    rows: List[Dict[str, object]]
    fit: Optional[Dict[str, float]]
    constants: Dict[str, object]
    verdict: str
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "fit": self.fit,
            "constants": self.constants,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def _within_cap(row: Dict[str, object], c_cap: float) -> bool:
    ratio = row["ratio"]
    if row["skipped"] or ratio == 0:
        return True
    return math.log2(ratio) <= math.log2(c_cap) + row["log2_theorem_bound"] + REL_TOL


def fit_decay(rows: List[Dict[str, object]], q: float) -> Optional[Dict[str, float]]:
    """log2(ratio) = intercept + slope / ε^q 최소제곱 (ratio > 0 인 행만)."""
    usable = [r for r in rows if not r["skipped"] and r["ratio"] and r["ratio"] > 0]
    xs = np.array([1.0 / r["epsilon"] ** q for r in usable])
    if len(usable) < 2 or np.unique(xs).size < 2:
        return None
    ys = np.array([math.log2(r["ratio"]) for r in usable])
    slope, intercept = np.polyfit(xs, ys, 1)
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "fitted_c": float(-slope),
        "fitted_C": float(2.0 ** intercept),
        "rows_used": len(usable),
    }


def epsilon_sweep(
    fields: LabFields,
    weight: Optional[Weight],
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    lambda_quantiles: Sequence[float] = DEFAULT_QUANTILES,
    c_cap: float = 2.0 ** 10,
    tau: float = 2.0,
    threads: int = 1,
) -> SweepReport:
    """
    (ε, λ) 격자 전체에 대해 good_lambda_ratio 를 모은다.
    행은 (ε 입력 순서, λ 분위수) 순으로 고정해서 합친다.
    """
    lams = lambda_values(fields.potential, lambda_quantiles)
    queries = [
        (qt, GoodLambdaQuery(lam=lam, epsilon=eps, tau=tau, flavor=fields.flavor, weight=weight))
        for eps in eps_grid
        for qt, lam in lams
    ]

    def _row(item):
        qt, query = item
        row = good_lambda_ratio(fields, query)
        row["lambda_quantile"] = qt
        return row

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_row, queries))
    else:
        rows = [_row(item) for item in queries]

    notes: List[str] = []
    live = [r for r in rows if not r["skipped"]]
    if not live:
        notes.append("every row has an empty denominator level set")
        verdict = "INCONCLUSIVE"
    else:
        verdict = "PASS" if all(_within_cap(r, c_cap) for r in rows) else "FAIL"

    needed = [
        r["ratio"] / r["theorem_bound"]
        for r in live
        if r["ratio"] and r["theorem_bound"] > 0
    ]
    overflow = [r for r in live if r["ratio"] and r["theorem_bound"] == 0]
    if overflow:
        notes.append(f"{len(overflow)} rows have a theorem bound below float range with a positive ratio")
    constants = {
        "C_cap": c_cap,
        "C_needed": max(needed) if needed else 0.0,
        "theorem_constant": "2^(-(alpha/eps^q)(2^q-1))",
        "alpha": fields.params.alpha,
        "q": fields.params.q,
        "tau": tau,
    }
    fit = fit_decay(rows, fields.params.q)
    logger.info("epsilon sweep: rows=%d live=%d verdict=%s", len(rows), len(live), verdict)
    return SweepReport(rows=rows, fit=fit, constants=constants, verdict=verdict, notes=notes)


# --- 국소 추정 (극대 큐브 위) ---

def local_estimates_check(fields: LabFields, lam: float, epsilon: float, gammas: int = 4) -> Dict[str, object]:
    """
    G = {𝒯 > λ} 의 극대 dyadic 큐브 Q_j 마다
      (a) Σ_{Q ⊋ Q_j} (μ(Q)/ℓ(Q)^{n−α})^q ≤ λ^q
      (b) 𝓜_α ≤ ελ 인 점을 품는 Q_j 에서
          |{x∈Q_j : g_k(x) > γ}| ≤ (ελ/γ) 2^{(k−j0)α} |Q_j|,  γ = ελ 2^{(k−j0)α} 2^i
    를 확인한다. 둘 다 정의에서 바로 나오는 부등식이라 위반은 버그다.
    """
    if fields.flavor != "dyadic":
        raise LabError("local estimates are stated for the dyadic operator")
    tree, params = fields.tree, fields.params
    q, s, alpha = params.q, params.s, params.alpha
    G = CellSet(tree.n, tree.J, fields.potential > lam)
    decomposition = dyadic_maximal_decomposition(G)

    tail_checks = tail_bad = shell_checks = shell_bad = 0
    worst_tail = 0.0
    top = params.top_level(tree.J, ball=False)
    for cube in decomposition.cubes:
        j0 = cube.level
        # 루트 자체가 극대 큐브면 부모 안에 𝒯 ≤ λ 인 점이 없다
        if j0 < tree.J:
            corner = np.array([cube.lower_corner()], dtype=np.int64)
            terms, levels = dyadic_terms(tree, params, corner)
            tail = sum(float(terms[0, col]) ** q for col, k in enumerate(levels) if k > j0)
            if params.include_supercube_tail:
                start = max(top, tree.J) + 1
                tail += (tree.total / 2.0 ** (start * s)) ** q / (1.0 - 2.0 ** (-q * s))
            tail_checks += 1
            worst_tail = max(worst_tail, tail / lam ** q)
            if tail > lam ** q * (1.0 + REL_TOL):
                tail_bad += 1

        if not np.any(fields.maximal[cube.slices()] <= epsilon * lam):
            continue
        block = tree.finest[cube.slices()]
        for k in range(params.level_min, j0 + 1):
            side = 1 << k
            m = block.shape[0] // side
            shaped = block.reshape(sum(((m, side) for _ in range(tree.n)), ()))
            sub = shaped.sum(axis=tuple(range(1, 2 * tree.n, 2)))
            g = sub / 2.0 ** (k * s)
            for i in range(gammas):
                gamma = epsilon * lam * 2.0 ** ((k - j0) * alpha) * 2.0 ** i
                measure = float((g > gamma).sum()) * side ** tree.n
                bound = (epsilon * lam / gamma) * 2.0 ** ((k - j0) * alpha) * cube.side ** tree.n
                shell_checks += 1
                if measure > bound * (1.0 + REL_TOL):
                    shell_bad += 1

    verdict = "PASS" if tail_bad == 0 and shell_bad == 0 else "FAIL"
    if not decomposition.cubes:
        verdict = "INCONCLUSIVE"
    return {
        "lambda": lam,
        "epsilon": epsilon,
        "maximal_cubes": len(decomposition.cubes),
        "tail_checks": tail_checks,
        "tail_violations": tail_bad,
        "worst_tail_over_lambda_q": worst_tail,
        "shell_checks": shell_checks,
        "shell_violations": shell_bad,
        "verdict": verdict,
    }


# --- good-τ ---

def good_tau_check(
    fields: LabFields,
    weight: Optional[Weight],
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    cprime_grid: Sequence[float] = DEFAULT_CPRIME_GRID,
    lambda_quantiles: Sequence[float] = DEFAULT_QUANTILES,
    target: float = 0.5,
) -> Dict[str, object]:
    """
    P = pot^q, Mq = max^q 로 σ{P > (1+c′ε)λ, Mq ≤ ελ} / σ{P > λ} 를 계산하고
    모든 λ 분위수에서 비율 ≤ target 이 되는 가장 작은 c′ 를 ε 별로 찾는다.
    """
    if not eps_grid or not cprime_grid:
        raise LabError("good-tau check needs nonempty epsilon and c' grids")
    q = fields.params.q
    P = fields.potential ** q
    Mq = fields.maximal ** q
    density = _density(weight, P.shape)
    lams = lambda_values(P, lambda_quantiles)
    cgrid = sorted(float(c) for c in cprime_grid)

    per_eps = []
    for eps in eps_grid:
        curve = []
        for c in cgrid:
            worst = None
            for _, lam in lams:
                den = _sigma(density, P > lam)
                if den == 0:
                    continue
                num = _sigma(density, (P > (1.0 + c * eps) * lam) & (Mq <= eps * lam))
                worst = num / den if worst is None else max(worst, num / den)
            curve.append({"c_prime": c, "worst_ratio": worst})
        found = next((pt["c_prime"] for pt in curve if pt["worst_ratio"] is not None and pt["worst_ratio"] <= target), None)
        live = any(pt["worst_ratio"] is not None for pt in curve)
        per_eps.append({
            "epsilon": eps,
            "smallest_c_prime": found,
            "verdict": "PASS" if found is not None else "INCONCLUSIVE",
            "status": "ok" if found is not None else ("no c' in grid reaches the target" if live else "empty level sets"),
            "curve": curve,
        })

    notes = []
    if not lams:
        notes.append("potential field has no positive values")
        verdict = "INCONCLUSIVE"
    else:
        verdict = combine_verdicts([row["verdict"] for row in per_eps])
    return {
        "lambdas": [{"quantile": qt, "lambda": lam} for qt, lam in lams],
        "target_ratio": target,
        "per_epsilon": per_eps,
        "verdict": verdict,
        "notes": notes,
    }


# --- 노름 비교 ---

def norm_comparison(fields: LabFields, weight: Optional[Weight], p: float) -> Dict[str, object]:
    if not (p > 0) or not math.isfinite(p):
        raise LabError(f"p must be a finite positive number (p={p})")
    density = _density(weight, fields.potential.shape)
    lhs = float((density * fields.potential ** p).sum()) ** (1.0 / p)
    rhs = float((density * fields.maximal ** p).sum()) ** (1.0 / p)
    if lhs == 0 and rhs == 0:
        return {"p": p, "lhs_norm": 0.0, "rhs_norm": 0.0, "ratio": None, "status": "trivial", "verdict": "INCONCLUSIVE"}
    if rhs == 0:
        return {"p": p, "lhs_norm": lhs, "rhs_norm": 0.0, "ratio": math.inf, "status": "violation", "verdict": "FAIL"}
    ratio = lhs / rhs
    # 점별로 𝓜 ≤ 𝒯 이므로 비율은 1 이상이어야 한다
    verdict = "PASS" if ratio >= 1.0 - REL_TOL else "FAIL"
    return {"p": p, "lhs_norm": lhs, "rhs_norm": rhs, "ratio": ratio, "status": "ok", "verdict": verdict}


# --- 지수 적분성 ---

def containment_constant(n: int, alpha: float, q: float) -> Dict[str, float]:
    """
    2B 밖에서 F(μ_B) ≤ const · μ(B)/R^{n−α} 의 상수.
    증명에 적힌 ((n−α)q)^{1/q} 와 dyadic 반지름 합에서 바로 나오는
    (1 − 2^{−(n−α)q})^{−1/q} 중 큰 쪽을 문턱으로 쓴다.
    """
    sq = (n - alpha) * q
    stated = sq ** (1.0 / q)
    exact = (1.0 - 2.0 ** (-sq)) ** (-1.0 / q)
    return {"stated": stated, "operator_exact": exact, "used": max(stated, exact)}


def _fit_beta(lams: np.ndarray, fracs: np.ndarray) -> Optional[Dict[str, float]]:
    """−ln frac = a + b λ^β 를 β 격자에서 최소제곱으로 맞춘다."""
    if lams.size < 4:
        return None
    y = -np.log(fracs)
    best = None
    for beta in BETA_GRID:
        X = np.column_stack([np.ones_like(lams), lams ** beta])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        sse = float(((X @ coef - y) ** 2).sum())
        if best is None or sse < best["sse"]:
            best = {"beta": float(beta), "a": float(coef[0]), "b": float(coef[1]), "sse": sse}
    return best


def exp_integrability_check(
    tree: MeasureTree,
    params: PotentialParams,
    weight: Optional[Weight],
    center: Sequence[float],
    radius: float,
    c_test_grid: Sequence[float] = DEFAULT_C_TEST_GRID,
    c_target: float = 10.0,
    log_profile: bool = False,
    induction_levels: int = 3,
    threads: Optional[int] = None,
) -> Dict[str, object]:
    """
    μ_B 를 ‖M_α(μ_B)‖_{L∞(B)} 로 정규화한 뒤 2B 위에서
      - {F > λ} ⊂ 2B (λ > 문턱)
      - σ{F > 2λ} ≤ e^{−cλ^q} σ{F > λ} 의 c 적합
      - exp(c F^q) 평균이 c_target 이하인 최대 c
      - 분포 함수 감쇠 지수 β̂ (q + 0.5 미만이어야 함)
      - 귀납 사슬 비율, (선택) log 프로파일
    을 계산한다. F 는 dyadic 반지름 공 포텐셜.
    """
    n, J = tree.n, tree.J
    if radius <= 0:
        raise LabError(f"ball radius must be positive (radius={radius})")
    q, s = params.q, params.s
    B = CellSet.ball(n, J, center, radius)
    B2 = CellSet.ball(n, J, center, 2 * radius)
    mu_B = restrict_measure(tree, B)

    mx = potential_field(mu_B, params, "maximal_ball", threads=threads).as_grid()
    norm = float(mx[B.mask].max()) if B.count() else 0.0
    report: Dict[str, object] = {
        "center": list(center),
        "radius": radius,
        "cells_in_B": B.count(),
        "cells_in_2B": B2.count(),
        "maximal_norm_on_B": norm,
    }
    if norm == 0:
        report.update({"verdict": "INCONCLUSIVE", "notes": ["maximal norm on B is zero"]})
        return report

    mu = scale_measure(mu_B, 1.0 / norm)
    F = potential_field(mu, params, "ball", threads=threads).as_grid()
    density = _density(weight, F.shape)
    in2B = B2.mask
    sigma_2B = _sigma(density, in2B)

    # 포함 관계
    const = containment_constant(n, params.alpha, q)
    threshold = const["used"] * mu.total / radius ** s
    outside_max = float(F[~in2B].max()) if (~in2B).any() else 0.0
    containment_ok = outside_max <= threshold * (1.0 + REL_TOL)
    report["containment"] = {
        "constants": const,
        "threshold": threshold,
        "max_outside_2B": outside_max,
        "holds": containment_ok,
    }

    # 레벨 집합 반감
    halving = []
    lam = threshold
    for _ in range(400):
        den = _sigma(density, (F > lam) & in2B)
        if den == 0:
            break
        num = _sigma(density, (F > 2 * lam) & in2B)
        ratio = num / den
        c_lam = -math.log(ratio) / lam ** q if ratio > 0 else math.inf
        halving.append({"lambda": lam, "numerator": num, "denominator": den, "ratio": ratio, "c_lambda": c_lam})
        lam *= 2.0 ** 0.25
    finite_c = [row["c_lambda"] for row in halving]
    fitted_c = min(finite_c) if finite_c else None
    halving_verdict = "INCONCLUSIVE" if fitted_c is None else ("PASS" if fitted_c > 0 else "FAIL")
    report["halving"] = {"rows": halving, "fitted_c": fitted_c, "verdict": halving_verdict}

    # exp 평균
    P = F ** q
    averages = []
    with np.errstate(over="ignore"):
        for c in c_test_grid:
            avg = float((density[in2B] * np.exp(c * P[in2B])).sum()) / sigma_2B if sigma_2B > 0 else math.inf
            averages.append({"c_test": float(c), "average": avg})
    admissible = [row["c_test"] for row in averages if row["average"] <= c_target]
    report["exp_average"] = {
        "C_target": c_target,
        "rows": averages,
        "largest_c_test": max(admissible) if admissible else None,
    }

    # 감쇠 지수
    values = np.sort(F[in2B & (F > threshold)])
    beta_fit = None
    if values.size >= MIN_LEVEL_CELLS and sigma_2B > 0:
        grid = np.linspace(threshold, float(values[-MIN_LEVEL_CELLS]), 40)
        fracs = np.array([_sigma(density, (F > t) & in2B) / sigma_2B for t in grid])
        keep = fracs > 0
        beta_fit = _fit_beta(grid[keep], fracs[keep])
    decay_verdict = None
    if beta_fit is not None:
        decay_verdict = "PASS" if beta_fit["beta"] < q + 0.5 else "FAIL"
    report["decay_exponent"] = {"fit": beta_fit, "limit": q + 0.5, "verdict": decay_verdict}

    # 귀납 사슬 (ε = 1/(2^k c))
    base = threshold ** q
    chain = []
    for k in range(induction_levels + 1):
        worst = None
        for l in range(1, 2 ** k + 1):
            den = _sigma(density, (P > (1 + (l - 1) * 2.0 ** -k) * 2 ** k * base) & in2B)
            if den == 0:
                continue
            num = _sigma(density, (P > (1 + l * 2.0 ** -k) * 2 ** k * base) & in2B)
            worst = num / den if worst is None else max(worst, num / den)
        chain.append({"k": k, "epsilon_scale": 2.0 ** -k, "worst_ratio": worst})
    report["induction_chain"] = chain

    verdicts = ["PASS" if containment_ok else "FAIL", halving_verdict]
    if decay_verdict is not None:
        verdicts.append(decay_verdict)

    if log_profile:
        grids = np.indices(F.shape).reshape(n, -1).T + 0.5
        dist = np.sqrt(((grids - np.array(center, dtype=np.float64)) ** 2).sum(axis=1)).reshape(F.shape)
        rel = dist / radius
        window = (rel >= 2.0 ** -8) & (rel <= 2.0 ** -2)
        if window.any():
            ratios = P[window] / np.log(1.0 / rel[window])
            lo, hi = float(ratios.min()), float(ratios.max())
            ok = lo >= 0.1 and hi <= 10.0
            report["log_profile"] = {"cells": int(window.sum()), "ratio_min": lo, "ratio_max": hi, "holds": ok}
            verdicts.append("PASS" if ok else "FAIL")
        else:
            report["log_profile"] = {"cells": 0, "holds": None}

    report["verdict"] = combine_verdicts(verdicts)
    logger.info(
        "exp integrability: threshold=%.6g fitted_c=%s beta=%s verdict=%s",
        threshold, fitted_c, beta_fit["beta"] if beta_fit else None, report["verdict"],
    )
    return report
