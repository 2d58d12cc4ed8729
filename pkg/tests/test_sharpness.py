import math

import numpy as np
import pytest

from lattice.dyadic_core import common_ancestor_level
from analysis.sharpness import (
    SharpnessError,
    annulus_index,
    build_sharp_example,
    closed_field,
    closed_values,
    direct_field,
    dyadic_maximal_per_annulus,
    eval_A_closed,
    eval_A_direct,
    eval_A_printed,
    fit_sharpness_constants,
    k0_bound,
    printed_values,
    ratio_lower_bound,
    sharpness_report,
    write_sharpness_csv,
)

# (ε, δ, N, k0, log2 ratio)  n=1, α=0.5
ONE_D = [
    (0.4, 0.117157, 17, 13, -10),
    (0.5, 0.146447, 13, 10, -8),
    (0.6, 0.175736, 11, 10, -7),
    (0.7, 0.205025, 9, 8, -6),
]


@pytest.fixture(scope="module")
def reports():
    return {eps: sharpness_report(build_sharp_example(eps, 1, 0.5)) for eps, *_ in ONE_D}


@pytest.mark.parametrize("eps, delta, N, k0, log2_ratio", ONE_D)
def test_one_dimensional_values(reports, eps, delta, N, k0, log2_ratio):
    rep = reports[eps]
    assert rep["delta"] == pytest.approx(delta, abs=1e-6)
    assert rep["N"] == N
    assert rep["k0"] == k0
    assert rep["ratio"] == 2.0 ** log2_ratio
    assert rep["verdict"] == "PASS"
    assert all(rep["checks"].values())
    assert rep["k0_within_4_over_eps"]
    assert rep["k0"] <= rep["k0_bound"]


def test_closed_form_against_hand_value():
    ex = build_sharp_example(0.5, 1, 0.5)
    A = closed_values(ex)
    assert A[0] == pytest.approx(ex.delta * 14)
    assert A[1] == pytest.approx(2.068020, abs=1e-6)
    assert printed_values(ex)[1] == pytest.approx(1.818039, abs=1e-6)
    # 인용식과의 차이는 δ(1 + 2^{-kα})
    for k in range(1, ex.N + 1):
        assert A[k] - printed_values(ex)[k] == pytest.approx(ex.delta * (1 + 2.0 ** (-k * 0.5)), rel=1e-12)


def test_closed_equals_direct_field():
    for eps, n, alpha in [(0.5, 1, 0.5), (0.7, 1, 0.25), (0.5, 2, 1.0)]:
        ex = build_sharp_example(eps, n, alpha)
        np.testing.assert_allclose(direct_field(ex), closed_field(ex), rtol=1e-9)


def test_literal_sum_on_probes():
    ex = build_sharp_example(0.7, 1, 0.5)
    for k in range(ex.N + 1):
        x = ((1 << (k - 1)) if k else 0,)
        assert common_ancestor_level(x, (0,)) == k
        assert eval_A_direct(ex, x) == pytest.approx(eval_A_closed(ex, x), rel=1e-9)
    assert eval_A_printed(ex, (3,)) < eval_A_closed(ex, (3,))
    with pytest.raises(SharpnessError):
        eval_A_closed(ex, (1 << ex.N,))


def test_two_dimensional_example():
    ex = build_sharp_example(0.5, 2, 1.0)
    assert ex.delta == 0.25
    assert ex.N == 8
    rep = sharpness_report(ex)
    assert rep["k0"] == 6
    assert rep["k0_bound"] == 8
    assert rep["ratio"] == 2.0 ** -8
    assert rep["numerator_cells"] == 4 ** 2
    assert rep["closed_vs_direct_max_rel"] <= 1e-9


def test_annulus_geometry():
    ex = build_sharp_example(0.5, 2, 1.0)
    assert ex.annulus_cells.sum() == 4 ** ex.N
    assert np.asarray(ex.tree.finest).sum() == pytest.approx(ex.total_mass, rel=1e-12)
    assert list(annulus_index(np.array([[0, 0], [1, 0], [1, 1], [2, 3], [0, 4]]))) == [0, 1, 1, 2, 3]


def test_maximal_constant_on_annuli_and_small_on_origin():
    ex = build_sharp_example(0.5, 1, 0.5)
    mdy = dyadic_maximal_per_annulus(ex)
    assert mdy[0] <= ex.epsilon
    rep = sharpness_report(ex)
    assert rep["maximal_on_Q0"]["dyadic_lattice"] == pytest.approx(mdy[0], rel=1e-12)
    assert rep["maximal_on_Q0"]["ball"] <= ex.epsilon


def test_closed_values_decrease_outward():
    ex = build_sharp_example(0.4, 1, 0.5)
    A = closed_values(ex)
    assert np.all(np.diff(A[1:]) < 0)
    assert k0_bound(ex) >= max(k for k in range(ex.N + 1) if A[k] > 1)


def test_annuli_only_for_large_N():
    ex = build_sharp_example(0.1, 3, 1.0)
    assert not ex.dense
    rep = sharpness_report(ex)
    assert rep["representation"] == "annuli"
    assert rep["verdict"] == "PASS"
    with pytest.raises(SharpnessError):
        direct_field(ex)


@pytest.mark.parametrize("eps, n, alpha", [(0.0, 1, 0.5), (1.5, 1, 0.5), (0.5, 1, 1.0), (0.5, 4, 1.0)])
def test_bad_arguments(eps, n, alpha):
    with pytest.raises(SharpnessError):
        build_sharp_example(eps, n, alpha)


def test_fit_and_held_out(reports):
    fit = fit_sharpness_constants([reports[e] for e in (0.4, 0.5, 0.7)])
    assert fit["c2"] == pytest.approx(3.7279 * math.log(2), abs=5e-3)
    assert math.log2(fit["c1"]) == pytest.approx(-1.6802, abs=5e-3)
    for e in (0.4, 0.5, 0.7):
        assert reports[e]["ratio"] >= ratio_lower_bound(fit, e)
    held = reports[0.6]["ratio"]
    assert held >= ratio_lower_bound(fit, 0.6)
    assert math.log2(ratio_lower_bound(fit, 0.6)) == pytest.approx(-7.89, abs=0.01)


def test_fit_needs_two_points(reports):
    with pytest.raises(SharpnessError):
        fit_sharpness_constants([reports[0.5]])


def test_csv(tmp_path, reports):
    path = tmp_path / "annuli.csv"
    write_sharpness_csv(reports[0.7], str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,cells,density,A_closed,A_printed,dyadic_maximal"
    assert len(lines) == 1 + 10


def test_report_checks_monotone(reports):
    assert all(rep["checks"]["monotone"] for rep in reports.values())


def test_non_monotone_closed_form_fails_report(monkeypatch):
    """닫힌 꼴이 k 에 대해 순감소하지 않으면 보고서가 FAIL."""
    import analysis.sharpness as sharpness

    original = sharpness.closed_values

    def bumped(ex):
        A = original(ex).copy()
        A[1], A[2] = A[2], A[1]
        return A

    monkeypatch.setattr(sharpness, "closed_values", bumped)
    ex = build_sharp_example(0.1, 3, 1.0)
    rep = sharpness_report(ex, strict=False)
    assert rep["checks"]["monotone"] is False
    assert rep["monotone_in_k"] is False
    assert rep["verdict"] == "FAIL"
    assert any("strictly decreasing" in f for f in rep["failures"])
    with pytest.raises(SharpnessError) as exc:
        sharpness_report(ex)
    assert exc.value.report["checks"]["monotone"] is False
