import math

import numpy as np
import pytest

import catalog
from lattice.dyadic_core import build_measure
from lattice.potentials import PotentialParams
from lattice.weights import constant_weight, power_weight
from analysis.goodlambda_lab import (
    GoodLambdaQuery,
    LabError,
    compute_fields,
    containment_constant,
    epsilon_sweep,
    exp_integrability_check,
    fit_decay,
    good_lambda_ratio,
    good_lambda_sets,
    good_tau_check,
    lambda_values,
    local_estimates_check,
    m_choice,
    norm_comparison,
    theorem_log2_bound,
)
from analysis.sharpness import build_sharp_example

PARAMS_2D = PotentialParams(n=2, alpha=1.0, q=1.0)


@pytest.fixture(scope="module")
def atom_fields():
    tree = build_measure(2, 6, [((20, 37), 1.0)])
    return compute_fields(tree, PARAMS_2D)


@pytest.fixture(scope="module")
def random_fields():
    tree = catalog.battery(2024, 1, 2, 6, atoms=30)[0]
    return compute_fields(tree, PARAMS_2D)


def test_query_validation():
    with pytest.raises(LabError):
        GoodLambdaQuery(lam=0.0, epsilon=0.5)
    with pytest.raises(LabError):
        GoodLambdaQuery(lam=1.0, epsilon=1.0)
    with pytest.raises(LabError):
        GoodLambdaQuery(lam=1.0, epsilon=0.5, tau=1.0)
    with pytest.raises(LabError):
        GoodLambdaQuery(lam=1.0, epsilon=0.5, flavor="riesz")


def test_theorem_constants():
    assert theorem_log2_bound(1.0, 1.0, 0.5) == -2.0
    assert theorem_log2_bound(1.0, 2.0, 0.5) == -12.0
    assert m_choice(1.0, 0.5) == 1
    assert m_choice(2.0, 0.5) == 11
    c = containment_constant(2, 1.0, 1.0)
    assert c["stated"] == 1.0 and c["operator_exact"] == 2.0 and c["used"] == 2.0


def test_zero_measure_is_inconclusive():
    fields = compute_fields(build_measure(2, 4, []), PARAMS_2D)
    assert lambda_values(fields.potential, (0.5,)) == []
    row = good_lambda_ratio(fields, GoodLambdaQuery(lam=1.0, epsilon=0.5))
    assert row["skipped"] and row["ratio"] is None
    assert epsilon_sweep(fields, None, (0.5, 0.25)).verdict == "INCONCLUSIVE"
    assert good_tau_check(fields, None, (0.5,), (1.0, 2.0))["verdict"] == "INCONCLUSIVE"
    assert norm_comparison(fields, None, 1.0)["verdict"] == "INCONCLUSIVE"


def test_single_atom_numerator_vanishes(atom_fields):
    """원자 하나면 𝒯 < 2𝓜 라서 {𝒯 > 2λ, 𝓜 ≤ ελ} 는 비어 있다."""
    lam = float(np.median(atom_fields.potential[atom_fields.potential > 0]))
    row = good_lambda_ratio(atom_fields, GoodLambdaQuery(lam=lam, epsilon=0.01))
    assert row["numerator"] == 0
    assert row["ratio"] == 0


def test_sharp_example_numerator_positive():
    ex = build_sharp_example(0.5, 1, 0.5)
    fields = compute_fields(ex.tree, PotentialParams(n=1, alpha=0.5, q=1.0))
    row = good_lambda_ratio(fields, GoodLambdaQuery(lam=1.0, epsilon=0.5))
    assert row["numerator"] >= 1.0
    assert fields.maximal[0] <= 0.5
    assert fields.potential[0] > 2.0


def test_sweep_rows_and_cap(random_fields):
    eps = (0.5, 0.25, 0.125)
    rep = epsilon_sweep(random_fields, None, eps, (0.5, 0.9), c_cap=2.0 ** 10)
    assert len(rep.rows) == len(eps) * 2
    assert [r["epsilon"] for r in rep.rows] == [0.5, 0.5, 0.25, 0.25, 0.125, 0.125]
    assert rep.verdict == "PASS"
    for r in rep.rows:
        assert r["ratio"] is None or 0 <= r["ratio"] <= 1


def test_sweep_threads_same_rows(random_fields):
    a = epsilon_sweep(random_fields, None, (0.5, 0.25), threads=1).rows
    b = epsilon_sweep(random_fields, None, (0.5, 0.25), threads=4).rows
    assert a == b


def test_fit_decay_recovers_line():
    rows = [
        {"epsilon": e, "ratio": 2.0 ** (1.0 - 3.0 / e), "skipped": False}
        for e in (0.5, 0.25, 0.2)
    ]
    fit = fit_decay(rows, 1.0)
    assert fit["fitted_c"] == pytest.approx(3.0)
    assert fit["fitted_C"] == pytest.approx(2.0)
    assert fit_decay(rows[:1], 1.0) is None


def test_weight_lattice_must_match(random_fields):
    with pytest.raises(LabError):
        good_lambda_ratio(random_fields, GoodLambdaQuery(lam=1.0, epsilon=0.5, weight=constant_weight(2, 5)))


def test_good_tau_single_atom(atom_fields):
    res = good_tau_check(atom_fields, constant_weight(2, 6), (0.5, 0.25), (1.0, 2.0, 4.0))
    assert res["verdict"] == "PASS"
    assert all(row["smallest_c_prime"] is not None for row in res["per_epsilon"])


def test_norm_ratio_at_least_one(random_fields):
    for w in (None, power_weight(2, 6, 1.0, (32.0, 32.0))):
        for p in (0.5, 1.0, 2.0):
            res = norm_comparison(random_fields, w, p)
            assert res["verdict"] == "PASS"
            assert res["ratio"] >= 1.0


def test_local_estimates_hold(random_fields):
    lams = lambda_values(random_fields.potential, (0.5, 0.9))
    for _, lam in lams:
        res = local_estimates_check(random_fields, lam, 0.25)
        assert res["verdict"] == "PASS"
        assert res["tail_violations"] == 0 and res["shell_violations"] == 0


def test_exp_integrability_containment():
    tree = catalog.generate("remark-log", 2, 6, 0)
    center, radius = catalog.remark_ball(2, 6)
    res = exp_integrability_check(tree, PARAMS_2D, None, center, radius, induction_levels=2)
    assert res["maximal_norm_on_B"] > 0
    assert res["containment"]["holds"]
    assert res["containment"]["max_outside_2B"] <= res["containment"]["threshold"] * (1 + 1e-12)
    assert len(res["induction_chain"]) == 3


def test_exp_integrability_empty_ball():
    tree = build_measure(2, 5, [((0, 0), 1.0)])
    res = exp_integrability_check(tree, PARAMS_2D, None, (24.0, 24.0), 3.0)
    assert res["verdict"] == "INCONCLUSIVE"
    with pytest.raises(LabError):
        exp_integrability_check(tree, PARAMS_2D, None, (24.0, 24.0), 0.0)


@pytest.fixture(scope="module")
def sharp_fields():
    ex = build_sharp_example(0.5, 1, 0.5)
    return compute_fields(ex.tree, PotentialParams(n=1, alpha=0.5, q=1.0))


def _subset(small, big):
    return bool(np.all(~small | big))


@pytest.mark.parametrize("which", ["random", "sharp"])
def test_numerator_set_shrinks(which, random_fields, sharp_fields):
    """ε 가 줄거나 τ 가 커지면 분자 집합은 셀 단위로 작아진다."""
    fields = random_fields if which == "random" else sharp_fields
    for _, lam in lambda_values(fields.potential, (0.25, 0.5, 0.9)):
        masks = [good_lambda_sets(fields, GoodLambdaQuery(lam=lam, epsilon=e))[0] for e in (0.5, 0.25, 0.125, 2.0 ** -6)]
        for big, small in zip(masks, masks[1:]):
            assert _subset(small, big)
        masks = [good_lambda_sets(fields, GoodLambdaQuery(lam=lam, epsilon=0.5, tau=t))[0] for t in (1.5, 2.0, 4.0)]
        for big, small in zip(masks, masks[1:]):
            assert _subset(small, big)


@pytest.mark.parametrize("which", ["random", "sharp"])
def test_denominator_never_grows_with_lambda(which, random_fields, sharp_fields):
    fields = random_fields if which == "random" else sharp_fields
    weight = constant_weight(2, 6, 3.0) if which == "random" else None
    lams = [lam for _, lam in lambda_values(fields.potential, (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0))]
    dens = [good_lambda_ratio(fields, GoodLambdaQuery(lam=lam, epsilon=0.5, weight=weight))["denominator"] for lam in lams]
    assert all(b <= a for a, b in zip(dens, dens[1:]))
    assert dens[-1] == 0.0
