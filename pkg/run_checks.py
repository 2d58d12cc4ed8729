"""
run_checks.py

설정 파일 기반 실험 실행기.

    python3 run_checks.py <kind> --config <path> [--seed N] [--out DIR] [--threads K] [--no-ledger]
    python3 run_checks.py run --config <path>        (kind 는 설정 파일에서)

kind:
    potential-field   포텐셜 / 극대 함수 필드, 지배·동차성·단일점 일치 검사
    goodlambda-sweep  ε 스윕 (단일 측도 또는 battery), 국소 추정
    goodtau           c′ 탐색
    norms             ‖𝒯‖_{L^p(σ)} / ‖𝓜‖_{L^p(σ)}
    expint            공 위 지수 적분성
    sharpness         최적성 구성의 포함 관계와 상수 적합
    whitney           레벨 집합 분해 검증
    ainfty-check      weak A∞ 반증기

검사마다 stdout 에 한 줄씩

    [<kind>] <check>: PASS|FAIL|INCONCLUSIVE (<detail>)

을 찍고 (batch.py 가 이 줄을 센다), 결과는 <out>/<config 이름>/ 아래
report.json 과 CSV 표로 남긴다.

종료 코드: 0 PASS, 1 FAIL, 2 INCONCLUSIVE, 3 사용법/설정 오류.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import catalog
from config import KINDS, ConfigError, RunConfig, load_config, load_settings
from models import open_ledger, record_run
from lattice.dyadic_core import (
    CellSet,
    LatticeError,
    MeasureTree,
    cube_mass,
    cube_of,
    read_measure_file,
)
from lattice.potentials import (
    ball_potential_F,
    continuous_potential,
    dyadic_potential,
    fractional_maximal_ball,
    fractional_maximal_dyadic,
    potential_field,
    shell_function_g,
)
from lattice.weights import check_weak_ainfty, sigma_measure
from lattice.whitney import (
    dyadic_maximal_decomposition,
    verify_decomposition,
    whitney_decomposition,
    write_decomposition_csv,
)
from analysis.battery import HOMOGENEITY_RTOL, audit_measure, battery_good_tau, battery_norms, battery_sweep
from analysis.goodlambda_lab import (
    compute_fields,
    epsilon_sweep,
    exp_integrability_check,
    good_tau_check,
    lambda_values,
    local_estimates_check,
)
from analysis.reports import combine_verdicts, save_rows_csv, verdict_line, write_json
from analysis.sharpness import (
    SharpnessError,
    build_sharp_example,
    fit_sharpness_constants,
    ratio_lower_bound,
    sharpness_report,
    write_sharpness_csv,
)

logger = logging.getLogger("run_checks")

EXIT_CODES = {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 2}
EXIT_USAGE = 3
PROBE_RTOL = 1e-12


# ---------------------------------------------------------------------------
#   출력 (모든 파일 쓰기는 Emitter 한 곳을 거친다)
# ---------------------------------------------------------------------------

@dataclass
class Emitter:
    kind: str
    out_dir: str
    checks: List[Dict[str, str]] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    def check(self, name: str, verdict: str, detail: str = "") -> str:
        line = verdict_line(self.kind, name, verdict, detail)
        print(line, flush=True)
        self.checks.append({"check": name, "verdict": verdict, "detail": detail})
        return verdict

    def _path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def csv(self, name: str, rows: List[dict], columns: Optional[Sequence[str]] = None) -> None:
        if rows:
            save_rows_csv(self._path(name), rows, columns)

    def field(self, name: str, fld) -> None:
        os.makedirs(self.out_dir, exist_ok=True)
        fld.to_csv(self._path(name))

    def decomposition(self, name: str, d) -> None:
        os.makedirs(self.out_dir, exist_ok=True)
        write_decomposition_csv(d, self._path(name))

    def sharpness(self, name: str, report: dict) -> None:
        write_sharpness_csv(report, self._path(name))

    def report(self, report: dict) -> str:
        return write_json(report, self._path("report.json"))

    @property
    def verdict(self) -> str:
        if not self.checks:
            return "INCONCLUSIVE"
        return combine_verdicts([c["verdict"] for c in self.checks])


@dataclass
class RunResult:
    exit_code: int
    verdict: str
    report: dict
    out_dir: Optional[str]
    report_digest: Optional[str] = None


# ---------------------------------------------------------------------------
#   측도 불러오기
# ---------------------------------------------------------------------------

def load_measure(cfg: RunConfig) -> MeasureTree:
    if cfg.measure_source == "file":
        try:
            tree = read_measure_file(cfg.measure_path)
        except LatticeError as e:
            raise ConfigError(str(e), "measure", "path") from e
        if (tree.n, tree.J) != (cfg.n, cfg.J):
            raise ConfigError(
                f"measure file has n={tree.n} J={tree.J}, config says n={cfg.n} J={cfg.J}", "measure", "path"
            )
        return tree
    if cfg.measure_source == "battery":
        raise ConfigError(f"{cfg.kind} needs a single measure (source = generator or file)", "measure", "source")
    try:
        return catalog.generate(cfg.generator, cfg.n, cfg.J, cfg.seed, cfg.measure_options)
    except ValueError as e:
        raise ConfigError(str(e), "measure", "generator") from e


def load_measures(cfg: RunConfig) -> List[MeasureTree]:
    if cfg.measure_source == "battery":
        try:
            return catalog.battery(cfg.seed, cfg.battery_count, cfg.n, cfg.J, cfg.battery_atoms)
        except ValueError as e:
            raise ConfigError(str(e), "measure", "count") from e
    return [load_measure(cfg)]


def load_sharp_extras(cfg: RunConfig) -> List[Tuple[str, MeasureTree]]:
    """battery 적합에 함께 넣을 최적성 구성 측도들."""
    extras = []
    for eps in cfg.battery_sharp_eps:
        ex = build_sharp_example(eps, cfg.n, cfg.alpha)
        if ex.tree is None:
            raise ConfigError(f"sharp example eps={eps:g} has no cell representation", "measure", "sharp_epsilon")
        extras.append((f"sharp eps={eps:g}", ex.tree))
    return extras


def _measure_summary(cfg: RunConfig, trees: Sequence[MeasureTree]) -> dict:
    label = os.path.basename(cfg.measure_path) if cfg.measure_source == "file" else catalog.describe(cfg.generator)
    if cfg.measure_source == "battery":
        label = f"battery of {cfg.battery_count} x {cfg.battery_atoms} atoms"
    return {
        "source": cfg.measure_source,
        "label": label,
        "count": len(trees),
        "total_mass": [t.total for t in trees],
    }


# ---------------------------------------------------------------------------
#   실험별 실행 함수
# ---------------------------------------------------------------------------

def _probe_points(tree: MeasureTree, fld_values: np.ndarray, points: np.ndarray) -> List[Tuple[int, ...]]:
    """필드 최댓값 셀, 원점 셀, 루트 중앙 셀."""
    probes = [tuple(int(v) for v in points[int(np.argmax(fld_values))]), (0,) * tree.n]
    probes.append((tree.size // 2,) * tree.n)
    return list(dict.fromkeys(probes))


def run_potential_field(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    tree = load_measure(cfg)
    params = cfg.params()
    results: dict = {"measure": _measure_summary(cfg, [tree]), "operators": {}}

    fields = {}
    for op in cfg.operators:
        fld = potential_field(tree, params, op, threads=threads)
        fields[op] = fld
        em.field(f"field_{op}.csv", fld)
        results["operators"][op] = {
            "min": float(fld.values.min(initial=0.0)),
            "max": float(fld.values.max(initial=0.0)),
            "sum": float(fld.values.sum()),
        }

    audit = audit_measure(tree, params, threads)
    results["audit"] = audit
    em.check("domination", "PASS" if audit["domination_dyadic_violations"] == 0 and audit["domination_ball_violations"] == 0 else "FAIL",
             f"dyadic={audit['domination_dyadic_violations']} ball={audit['domination_ball_violations']} violations")
    hom = max(audit["homogeneity_dyadic_max_rel"], audit["homogeneity_ball_max_rel"])
    em.check("homogeneity", "PASS" if hom <= HOMOGENEITY_RTOL else "FAIL", f"max rel {hom:.3g}")

    # 단일점 API 와 필드 값, 그리고 g_k 의 ℓ^q 합이 𝒯 와 같은지
    if tree.total > 0:
        base = fields["dyadic"] if "dyadic" in fields else potential_field(tree, params, "dyadic", threads=threads)
        probe_rows = []
        worst = 0.0
        for x in _probe_points(tree, base.values, base.points):
            row = {
                "cell": list(x),
                "dyadic": dyadic_potential(tree, params, x),
                "ball": ball_potential_F(tree, params, x),
                "maximal_dyadic": fractional_maximal_dyadic(tree, params, x),
                "maximal_ball": fractional_maximal_ball(tree, params, x),
            }
            if "continuous" in fields:
                row["continuous"] = continuous_potential(tree, params, x)
            top = params.top_level(tree.J, ball=False)
            shells = [shell_function_g(tree, params, k, x) for k in range(params.level_min, top + 1)]
            row["shell_sum"] = sum(g ** params.q for g in shells) ** (1.0 / params.q)
            # k ≤ J 에서 g_k = μ(Q_k(x)) / 2^{k(n−α)}
            for k, g in zip(range(params.level_min, top + 1), shells):
                if k <= tree.J:
                    expected = cube_mass(tree, cube_of(x, k)) / 2.0 ** (k * params.s)
                    if expected > 0:
                        worst = max(worst, abs(g - expected) / expected)
            flat = int(np.ravel_multi_index(x, (tree.size,) * tree.n))
            for op, fld in fields.items():
                if op in row and fld.values[flat] > 0:
                    worst = max(worst, abs(row[op] - fld.values[flat]) / fld.values[flat])
            if not params.include_supercube_tail and row["dyadic"] > 0:
                worst = max(worst, abs(row["shell_sum"] - row["dyadic"]) / row["dyadic"])
            probe_rows.append(row)
        results["probes"] = probe_rows
        em.check("single-point probes", "PASS" if worst <= PROBE_RTOL else "FAIL", f"max rel {worst:.3g}")

    if "continuous" in fields:
        full = potential_field(tree, cfg.params(include_supercube_tail=True), "ball", threads=threads).values
        T = fields["continuous"].values
        live = full > 0
        if live.any():
            sq = params.s * params.q
            ratio = T[live] ** params.q / full[live] ** params.q
            lo, hi = 2.0 ** (-sq) * math.log(2.0), 2.0 ** sq * math.log(2.0)
            rmin, rmax = float(ratio.min()), float(ratio.max())
            results["continuous_vs_ball"] = {"ratio_min": rmin, "ratio_max": rmax, "bounds": [lo, hi]}
            ok = rmin >= lo * (1 - 1e-9) and rmax <= hi * (1 + 1e-9)
            em.check("continuous comparable", "PASS" if ok else "FAIL", f"T^q/F^q in [{rmin:.4g}, {rmax:.4g}]")
    return results


def run_goodlambda_sweep(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    weight = cfg.weights[0] if cfg.weights else None
    params = cfg.params()
    if cfg.measure_source == "battery":
        trees = load_measures(cfg)
        extras = load_sharp_extras(cfg)
        res = battery_sweep(trees, params, cfg.flavor, weight, cfg.eps_grid, cfg.lambda_quantiles, cfg.tau, threads,
                            extra=extras)
        em.csv("sweep_rows.csv", res.pop("rows"))
        em.check("C_cap held-out", res["cap_verdict"],
                 f"log2 C_cap={res['log2_C_cap_fit']:.4g} held-out={res['log2_C_needed_held_out']}")
        em.check("domination/homogeneity", res["audit_verdict"], f"{res['measures']} measures")
        res["measure"] = _measure_summary(cfg, trees)
        return res

    tree = load_measure(cfg)
    fields = compute_fields(tree, params, cfg.flavor, threads=threads)
    sweep = epsilon_sweep(fields, weight, cfg.eps_grid, cfg.lambda_quantiles, cfg.c_cap, cfg.tau, threads or 1)
    em.csv("sweep_rows.csv", sweep.rows)
    live = sum(1 for r in sweep.rows if not r["skipped"])
    em.check("ratio <= C_cap * bound", sweep.verdict, f"{live}/{len(sweep.rows)} live rows, C_cap={cfg.c_cap:g}")
    results = {"measure": _measure_summary(cfg, [tree]), "sweep": sweep.to_dict()}

    if cfg.flavor == "dyadic":
        lams = lambda_values(fields.potential, cfg.lambda_quantiles)
        if lams:
            local = local_estimates_check(fields, lams[0][1], cfg.eps_grid[0])
            results["local_estimates"] = local
            em.check("local estimates", local["verdict"],
                     f"tail {local['tail_violations']}/{local['tail_checks']}, shell {local['shell_violations']}/{local['shell_checks']}")
        else:
            em.check("local estimates", "INCONCLUSIVE", "potential has no positive values")
    return results


def run_goodtau(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    weight = cfg.weights[0] if cfg.weights else None
    params = cfg.params()
    trees = load_measures(cfg)
    if cfg.measure_source == "battery":
        res = battery_good_tau(trees, params, weight, cfg.eps_grid, cfg.cprime_grid, cfg.lambda_quantiles, cfg.target, threads)
        em.check("finite c'", res["verdict"], f"worst c'={res['worst_c_prime']:g} over {res['measures']} measures")
        res["measure"] = _measure_summary(cfg, trees)
        return res

    fields = compute_fields(trees[0], params, "dyadic", threads=threads)
    res = good_tau_check(fields, weight, cfg.eps_grid, cfg.cprime_grid, cfg.lambda_quantiles, cfg.target)
    curve_rows = [
        {"epsilon": row["epsilon"], "c_prime": pt["c_prime"], "worst_ratio": pt["worst_ratio"]}
        for row in res["per_epsilon"]
        for pt in row["curve"]
    ]
    em.csv("goodtau_curve.csv", curve_rows)
    found = [row["smallest_c_prime"] for row in res["per_epsilon"] if row["smallest_c_prime"] is not None]
    em.check("finite c'", res["verdict"], f"{len(found)}/{len(res['per_epsilon'])} epsilons")
    res["measure"] = _measure_summary(cfg, trees)
    return res


def run_norms(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    trees = load_measures(cfg)
    weights = cfg.weights or [None]
    res = battery_norms(trees, cfg.params(), weights, cfg.p_grid, cfg.flavor, threads)
    em.csv("norms.csv", res["rows"])
    rng = res["ratio_range"]
    em.check("norm ratio finite, >= 1, scale invariant", res["verdict"],
             f"ratio in [{rng[0]:.4g}, {rng[1]:.4g}]" if rng else "all norms zero")
    res["measure"] = _measure_summary(cfg, trees)
    return res


def run_expint(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    tree = load_measure(cfg)
    center, radius = cfg.expint_center, cfg.expint_radius
    if center is None or radius is None:
        if cfg.measure_source == "generator" and cfg.generator == "remark-log":
            center, radius = catalog.remark_ball(cfg.n, cfg.J)
        else:
            raise ConfigError("center and radius are required for this measure", "expint")
    weight = cfg.weights[0] if cfg.weights else None
    res = exp_integrability_check(
        tree, cfg.params(), weight, center, radius,
        c_test_grid=cfg.c_test_grid, c_target=cfg.c_target, log_profile=cfg.log_profile,
        induction_levels=cfg.induction_levels, threads=threads,
    )
    if "containment" not in res:
        em.check("exp integrability", res["verdict"], "; ".join(res.get("notes", [])))
        return res
    em.csv("halving.csv", res["halving"]["rows"])
    em.csv("exp_average.csv", res["exp_average"]["rows"])
    c = res["containment"]
    em.check("{F > lambda} inside 2B", "PASS" if c["holds"] else "FAIL",
             f"max outside {c['max_outside_2B']:.4g} <= {c['threshold']:.4g}")
    h = res["halving"]
    em.check("level-set halving", h["verdict"], f"fitted c={h['fitted_c']}")
    d = res["decay_exponent"]
    if d["verdict"] is not None:
        em.check("decay exponent", d["verdict"], f"beta={d['fit']['beta']:.3g} < {d['limit']:.3g}")
    if "log_profile" in res and res["log_profile"].get("holds") is not None:
        lp = res["log_profile"]
        em.check("log profile", "PASS" if lp["holds"] else "FAIL",
                 f"T/log(R/|x|) in [{lp['ratio_min']:.3g}, {lp['ratio_max']:.3g}]")
    res["measure"] = _measure_summary(cfg, [tree])
    return res


def run_sharpness(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    reports = []
    for eps in cfg.sharp_eps:
        ex = build_sharp_example(eps, cfg.n, cfg.alpha)
        try:
            rep = sharpness_report(ex, strict=True, threads=threads)
        except SharpnessError as e:
            rep = e.report or {"epsilon": eps, "failures": [str(e)], "verdict": "FAIL"}
            logger.error("sharpness eps=%g: %s", eps, e)
        reports.append(rep)
        if "annuli" in rep:
            em.sharpness(f"sharpness_eps{eps:g}.csv", rep)
        em.check(f"containments eps={eps:g}", rep["verdict"],
                 f"N={rep.get('N')} k0={rep.get('k0')} ratio={rep.get('ratio', 0):.6g}")

    results: dict = {"reports": reports}
    usable = [r for r in reports if r.get("ratio")]
    if len(usable) >= 2:
        fit = fit_sharpness_constants(usable)
        results["fit"] = fit
        fits_all = all(r["ratio"] >= ratio_lower_bound(fit, r["epsilon"]) * (1 - 1e-12) for r in usable)
        em.check("c1 exp(-c2/eps) envelope", "PASS" if fits_all else "FAIL",
                 f"c1={fit['c1']:.4g} c2={fit['c2']:.4g}")
        if cfg.held_out is not None:
            held = sharpness_report(build_sharp_example(cfg.held_out, cfg.n, cfg.alpha), strict=False, threads=threads)
            bound = ratio_lower_bound(fit, cfg.held_out)
            results["held_out"] = {"epsilon": cfg.held_out, "ratio": held["ratio"], "predicted_lower_bound": bound}
            em.check(f"held-out eps={cfg.held_out:g}", "PASS" if held["ratio"] >= bound else "FAIL",
                     f"ratio={held['ratio']:.4g} >= {bound:.4g}")
    return results


def run_whitney(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    sets: List[CellSet] = []
    source: dict = {"set": cfg.whitney_set}
    if cfg.whitney_set == "level-set":
        tree = load_measure(cfg)
        pot = potential_field(tree, cfg.params(), "dyadic", threads=threads).as_grid()
        lams = lambda_values(pot, (cfg.whitney_quantile,))
        if lams:
            source["lambda"] = lams[0][1]
            sets.append(CellSet(cfg.n, cfg.J, pot > lams[0][1]))
    else:
        masks = catalog.random_cell_sets(cfg.seed, cfg.whitney_count, cfg.n, cfg.J, cfg.whitney_density)
        sets.extend(CellSet(cfg.n, cfg.J, m) for m in masks)

    rows = []
    for i, G in enumerate(sets):
        for build in (dyadic_maximal_decomposition, whitney_decomposition):
            d = build(G)
            if i == 0:
                em.decomposition(f"{d.flavor}.csv", d)
            v = verify_decomposition(d)
            v["set"] = i
            rows.append(v)
    em.csv("decompositions.csv", rows, [
        "set", "flavor", "cells", "cubes", "tiles_exactly", "pairwise_disjoint",
        "max_overlap_of_doubles", "overlap_bound", "doubles_outside_set", "unit_cells", "parent_maximality",
    ])

    live = [r for r in rows if r["cells"] > 0]
    if not live:
        em.check("tiling", "INCONCLUSIVE", "every set is empty")
        return {"source": source, "sets": len(sets), "rows": rows}
    tiles = all(r["tiles_exactly"] and r["pairwise_disjoint"] for r in live)
    em.check("tiling", "PASS" if tiles else "FAIL", f"{len(sets)} sets")
    maximal = all(r["parent_maximality"] for r in live if r["flavor"] == "dyadic_maximal")
    em.check("dyadic maximality", "PASS" if maximal else "FAIL")
    wh = [r for r in live if r["flavor"] == "whitney"]
    overlap = max(r["max_overlap_of_doubles"] for r in wh)
    em.check("overlap of doubles", "PASS" if overlap <= wh[0]["overlap_bound"] else "FAIL",
             f"max {overlap} <= {wh[0]['overlap_bound']}")
    ranges = [r["dist_ratio_range"] for r in wh if r["dist_ratio_range"]]
    window = [min(r[0] for r in ranges), max(r[1] for r in ranges)] if ranges else None
    return {"source": source, "sets": len(sets), "dist_ratio_window": window, "rows": rows}


def run_ainfty(cfg: RunConfig, em: Emitter, threads: Optional[int]) -> dict:
    w = cfg.weights[0]
    rep = check_weak_ainfty(w, cfg.samples, cfg.seed, threads=threads or 1).to_dict()
    rep["sigma_root"] = sigma_measure(w, CellSet.full(w.n, w.J))
    if w.claimed is None:
        verdict = "INCONCLUSIVE"
    elif cfg.expect == "holds":
        verdict = "PASS" if rep["violations"] == 0 else "FAIL"
    else:
        verdict = "PASS" if rep["violations"] > 0 and rep["witnesses"] else "FAIL"
    em.csv("witnesses.csv", [
        {"level": wt["Q"]["level"], "coords": " ".join(map(str, wt["Q"]["coords"])), "E": wt["E"],
         "E_over_Q": wt["E_over_Q"], "sigma_ratio": wt["sigma_ratio"], "bound": wt["bound"]}
        for wt in rep["witnesses"]
    ])
    em.check(f"weak A-infinity ({cfg.expect})", verdict,
             f"{rep['violations']} violations over {rep['pairs_evaluated']} pairs, theta_hat={rep['fitted_theta']}")
    return rep


RUNNERS: Dict[str, Callable[[RunConfig, Emitter, Optional[int]], dict]] = {
    "potential-field": run_potential_field,
    "goodlambda-sweep": run_goodlambda_sweep,
    "goodtau": run_goodtau,
    "norms": run_norms,
    "expint": run_expint,
    "sharpness": run_sharpness,
    "whitney": run_whitney,
    "ainfty-check": run_ainfty,
}

# 실험 종류 → 그 실행이 도달하는 모듈 연산 (커버리지 점검용)
EXPERIMENT_OPERATIONS: Dict[str, Tuple[str, ...]] = {
    "potential-field": (
        "build_measure", "read_measure_file", "cube_mass", "potential_field", "dyadic_potential",
        "shell_function_g", "ball_potential_F", "fractional_maximal_dyadic", "fractional_maximal_ball",
        "continuous_potential", "scale_measure",
    ),
    "goodlambda-sweep": ("compute_fields", "good_lambda_sets", "good_lambda_ratio", "epsilon_sweep", "local_estimates_check", "battery_sweep"),
    "goodtau": ("good_tau_check", "battery_good_tau"),
    "norms": ("norm_comparison", "battery_norms"),
    "expint": ("restrict_measure", "exp_integrability_check"),
    "sharpness": (
        "build_sharp_example", "eval_A_closed", "eval_A_direct", "common_ancestor_level",
        "direct_field", "closed_field", "sharpness_report", "fit_sharpness_constants",
    ),
    "whitney": ("dyadic_maximal_decomposition", "whitney_decomposition", "verify_decomposition"),
    "ainfty-check": ("parse_weight_spec", "sigma_measure", "check_weak_ainfty"),
}


# ---------------------------------------------------------------------------
#   run_config
# ---------------------------------------------------------------------------

def _ledger_url(out_root: str, override: Optional[str]) -> str:
    return override or "sqlite:///" + os.path.join(os.path.abspath(out_root), "runs.db")


def run_config(
    path: str,
    kind: Optional[str] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    ledger: bool = True,
) -> RunResult:
    """
    설정 하나를 실행한다. 설정/전제조건 오류(ConfigError)는 계산 전에 exit 3 으로 끝난다.
    계산이 시작된 뒤의 실패는 exit 1 (FAIL). 같은 (설정, seed) 면 report.json 바이트가 같다.
    """
    try:
        settings = load_settings()
        cfg = load_config(path, kind=kind, seed=seed)
    except ValueError as e:
        logger.error("config rejected: %s", e)
        return RunResult(EXIT_USAGE, "USAGE", {"error": str(e)}, None)

    threads = threads or settings.threads
    out_root = out or settings.out or cfg.out_dir or "out"
    out_dir = os.path.join(out_root, cfg.stem)
    em = Emitter(kind=cfg.kind, out_dir=out_dir)
    logger.info("%s: config=%s seed=%d out=%s", cfg.kind, path, cfg.seed, out_dir)

    try:
        results = RUNNERS[cfg.kind](cfg, em, threads)
    except ConfigError as e:
        logger.error("precondition failed: %s", e)
        return RunResult(EXIT_USAGE, "USAGE", {"error": str(e)}, None)
    except ValueError as e:
        logger.error("%s failed after computation started: %s", cfg.kind, e)
        print(f"[run_checks] {cfg.kind}: FAIL ({e})", flush=True)
        return RunResult(EXIT_CODES["FAIL"], "FAIL", {"error": str(e)}, out_dir)

    verdict = em.verdict
    report = {
        "kind": cfg.kind,
        "config": os.path.basename(path),
        "config_digest": cfg.digest,
        "seed": cfg.seed,
        "params": {"n": cfg.n, "J": cfg.J, "alpha": cfg.alpha, "q": cfg.q,
                   "level_min": cfg.level_min, "level_max": cfg.level_max, "tail": cfg.tail},
        "checks": em.checks,
        "results": results,
        "verdict": verdict,
    }
    digest = em.report(report)
    exit_code = EXIT_CODES[verdict]
    print(f"[run_checks] {cfg.kind}: {verdict} (report {os.path.join(out_dir, 'report.json')})", flush=True)

    if ledger:
        factory = open_ledger(_ledger_url(out_root, settings.db_url))
        record_run(factory, cfg.kind, os.path.abspath(path), cfg.digest, cfg.seed, verdict, exit_code, digest)
    return RunResult(exit_code, verdict, report, out_dir, digest)


# ---------------------------------------------------------------------------
#   명령행
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not (0 <= value < 1 << 64):
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer (got {text})")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1 (got {text})")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="run_checks.py", description="dyadic potential / good-lambda experiment runner")
    sub = parser.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for name in ("run",) + KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=_u64)
        p.add_argument("--out")
        p.add_argument("--threads", type=_positive)
        p.add_argument("--no-ledger", action="store_true")
    return parser


def setup_logging() -> None:
    level = os.environ.get("DYADLAB_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="[%(name)s] %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    kind = None if args.kind == "run" else args.kind
    result = run_config(args.config, kind=kind, seed=args.seed, out=args.out,
                        threads=args.threads, ledger=not args.no_ledger)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
