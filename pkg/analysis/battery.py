"""
analysis/battery.py

시드 고정 무작위 측도 묶음(battery)에 대한 일괄 검사.

- good-λ: 측도마다 ε 스윕, 행마다 필요한 상수 log2(ratio / 정리 상한).
  앞쪽 절반(과 최적성 구성 측도)으로 C_cap 을 맞추고 뒤쪽 절반이 2 배 안에 드는지 본다.
- good-τ: 측도 × ε 마다 유한한 c′ 가 있는지.
- 노름 비교: 측도 × 가중치 × p, 그리고 μ → 2μ 에서 비율이 그대로인지.
- 감사(audit): 𝓜 ≤ 𝒯 (셀마다, 정확히), c ∈ {0.5, 2, 10} 동차성.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice.dyadic_core import MeasureTree, scale_measure
from lattice.potentials import PotentialParams, potential_field
from lattice.weights import Weight
from analysis.goodlambda_lab import (
    DEFAULT_CPRIME_GRID,
    DEFAULT_EPS_GRID,
    DEFAULT_QUANTILES,
    compute_fields,
    epsilon_sweep,
    good_tau_check,
    norm_comparison,
)
from analysis.reports import combine_verdicts

logger = logging.getLogger(__name__)

HOMOGENEITY_FACTORS = (0.5, 2.0, 10.0)
HOMOGENEITY_RTOL = 1e-12
HELD_OUT_FACTOR_LOG2 = 1.0


def audit_measure(tree: MeasureTree, params: PotentialParams, threads: Optional[int] = None) -> Dict[str, object]:
    out: Dict[str, object] = {}
    ok = True
    for flavor in ("dyadic", "ball"):
        pot = potential_field(tree, params, flavor, threads=threads).values
        mx = potential_field(tree, params, f"maximal_{flavor}", threads=threads).values
        bad = int((mx > pot).sum())
        out[f"domination_{flavor}_violations"] = bad
        ok = ok and bad == 0

        worst = 0.0
        for c in HOMOGENEITY_FACTORS:
            scaled = potential_field(scale_measure(tree, c), params, flavor, threads=threads).values
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.where(pot > 0, np.abs(scaled - c * pot) / (c * pot), np.abs(scaled))
            worst = max(worst, float(rel.max(initial=0.0)))
        out[f"homogeneity_{flavor}_max_rel"] = worst
        ok = ok and worst <= HOMOGENEITY_RTOL
    out["verdict"] = "PASS" if ok else "FAIL"
    return out


def _needed_log2(row: Dict[str, object]) -> Optional[float]:
    if row["skipped"] or not row["ratio"]:
        return None
    return math.log2(row["ratio"]) - row["log2_theorem_bound"]


def _sweep_member(
    tree: MeasureTree,
    params: PotentialParams,
    flavor: str,
    weight: Optional[Weight],
    eps_grid: Sequence[float],
    lambda_quantiles: Sequence[float],
    tau: float,
    threads: Optional[int],
) -> Tuple[List[Dict[str, object]], Dict[str, object]]:
    fields = compute_fields(tree, params, flavor, threads=threads)
    sweep = epsilon_sweep(fields, weight, eps_grid, lambda_quantiles, c_cap=math.inf, tau=tau, threads=threads or 1)
    needed = [v for v in (_needed_log2(r) for r in sweep.rows) if v is not None]
    return sweep.rows, {
        "live_rows": sum(1 for r in sweep.rows if not r["skipped"]),
        "max_log2_needed": max(needed) if needed else None,
        "fit": sweep.fit,
    }


def battery_sweep(
    trees: Sequence[MeasureTree],
    params: PotentialParams,
    flavor: str = "dyadic",
    weight: Optional[Weight] = None,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    lambda_quantiles: Sequence[float] = DEFAULT_QUANTILES,
    tau: float = 2.0,
    threads: Optional[int] = None,
    extra: Sequence[Tuple[str, MeasureTree]] = (),
) -> Dict[str, object]:
    """
    C_cap 은 log2 로만 다룬다 (q 가 크면 정리 상한이 float 범위 밖).
    extra 의 (이름, 측도) 는 최적성 구성 같은 고정 측도로, 항상 적합 쪽에 들어간다.
    가중치는 무작위 측도의 격자에만 쓰고 격자가 다른 extra 에는 르베그 측도를 쓴다.
    적합 쪽에 양수 비율이 하나도 없으면 log2 C_cap = 0.
    """
    if len(trees) < 2:
        raise ValueError("a battery needs at least two measures")
    half = len(trees) // 2
    per_measure: List[Dict[str, object]] = []
    all_rows: List[Dict[str, object]] = []
    audits_ok = []
    for i, tree in enumerate(trees):
        rows, entry = _sweep_member(tree, params, flavor, weight, eps_grid, lambda_quantiles, tau, threads)
        audit = audit_measure(tree, params, threads)
        audits_ok.append(audit["verdict"])
        for r in rows:
            r["measure"] = i
        all_rows.extend(rows)
        per_measure.append({"measure": i, "label": "random", "split": "fit" if i < half else "held_out", **entry, "audit": audit})

    for j, (label, tree) in enumerate(extra):
        i = len(trees) + j
        w = weight if weight is not None and (weight.n, weight.J) == (tree.n, tree.J) else None
        rows, entry = _sweep_member(tree, params, flavor, w, eps_grid, lambda_quantiles, tau, threads)
        for r in rows:
            r["measure"] = i
        all_rows.extend(rows)
        per_measure.append({"measure": i, "label": label, "split": "fit", **entry, "audit": None})

    fit_vals = [m["max_log2_needed"] for m in per_measure if m["split"] == "fit" and m["max_log2_needed"] is not None]
    held_vals = [m["max_log2_needed"] for m in per_measure if m["split"] == "held_out" and m["max_log2_needed"] is not None]
    log2_cap = max(fit_vals) if fit_vals else 0.0
    log2_held = max(held_vals) if held_vals else None
    live = any(m["live_rows"] for m in per_measure)
    if not live:
        cap_verdict = "INCONCLUSIVE"
    else:
        cap_verdict = "PASS" if log2_held is None or log2_held <= log2_cap + HELD_OUT_FACTOR_LOG2 else "FAIL"

    logger.info("battery sweep: measures=%d extra=%d log2_C_cap=%.4g held_out=%s verdict=%s",
                len(trees), len(extra), log2_cap, log2_held, cap_verdict)
    return {
        "measures": len(trees),
        "extra_measures": {m["label"]: m["max_log2_needed"] for m in per_measure[len(trees):]},
        "log2_C_cap_fit": log2_cap,
        "log2_C_needed_held_out": log2_held,
        "held_out_factor": 2.0 ** HELD_OUT_FACTOR_LOG2,
        "cap_verdict": cap_verdict,
        "audit_verdict": combine_verdicts(audits_ok),
        "per_measure": per_measure,
        "rows": all_rows,
        "verdict": combine_verdicts([cap_verdict, combine_verdicts(audits_ok)]),
    }


def battery_good_tau(
    trees: Sequence[MeasureTree],
    params: PotentialParams,
    weight: Optional[Weight] = None,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    cprime_grid: Sequence[float] = DEFAULT_CPRIME_GRID,
    lambda_quantiles: Sequence[float] = DEFAULT_QUANTILES,
    target: float = 0.5,
    threads: Optional[int] = None,
) -> Dict[str, object]:
    results = []
    worst_c = 0.0
    for i, tree in enumerate(trees):
        fields = compute_fields(tree, params, "dyadic", threads=threads)
        res = good_tau_check(fields, weight, eps_grid, cprime_grid, lambda_quantiles, target)
        found = [row["smallest_c_prime"] for row in res["per_epsilon"] if row["smallest_c_prime"] is not None]
        if found:
            worst_c = max(worst_c, max(found))
        results.append({
            "measure": i,
            "verdict": res["verdict"],
            "smallest_c_prime": {str(row["epsilon"]): row["smallest_c_prime"] for row in res["per_epsilon"]},
        })
    verdict = combine_verdicts([r["verdict"] for r in results])
    logger.info("battery good-tau: measures=%d worst c'=%g verdict=%s", len(trees), worst_c, verdict)
    return {"measures": len(trees), "worst_c_prime": worst_c, "per_measure": results, "verdict": verdict}


def battery_norms(
    trees: Sequence[MeasureTree],
    params: PotentialParams,
    weights: Sequence[Optional[Weight]],
    p_grid: Sequence[float],
    flavor: str = "dyadic",
    threads: Optional[int] = None,
) -> Dict[str, object]:
    rows = []
    verdicts = []
    for i, tree in enumerate(trees):
        fields = compute_fields(tree, params, flavor, threads=threads)
        doubled = compute_fields(scale_measure(tree, 2.0), params, flavor, threads=threads)
        for w in weights:
            for p in p_grid:
                res = norm_comparison(fields, w, p)
                res2 = norm_comparison(doubled, w, p)
                invariant = res["ratio"] == res2["ratio"] or (
                    res["ratio"] is not None and res2["ratio"] is not None
                    and math.isfinite(res["ratio"])
                    and abs(res["ratio"] - res2["ratio"]) <= HOMOGENEITY_RTOL * res["ratio"]
                )
                finite = res["ratio"] is None or math.isfinite(res["ratio"])
                verdict = res["verdict"] if invariant and finite else "FAIL"
                verdicts.append(verdict)
                rows.append({
                    "measure": i,
                    "weight": w.label if w is not None else "lebesgue",
                    "p": p,
                    "lhs_norm": res["lhs_norm"],
                    "rhs_norm": res["rhs_norm"],
                    "ratio": res["ratio"],
                    "scale_invariant": invariant,
                    "verdict": verdict,
                })
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None and math.isfinite(r["ratio"])]
    return {
        "rows": rows,
        "ratio_range": [min(ratios), max(ratios)] if ratios else None,
        "verdict": combine_verdicts(verdicts),
    }
