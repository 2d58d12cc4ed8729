import numpy as np
import pytest

from lattice.dyadic_core import CellSet
from lattice.rng import Xorshift64Star
from lattice.weights import (
    WeightError,
    cell_weight,
    check_weak_ainfty,
    constant_weight,
    half_weight,
    parse_weight_spec,
    power_weight,
    sigma_measure,
)


def test_sigma_examples():
    one = constant_weight(1, 3)
    assert sigma_measure(one, CellSet.from_cells(1, 3, [(2,)])) == 1.0
    h = half_weight(1, 3)
    assert sigma_measure(h, CellSet.from_cells(1, 3, [(6,), (7,)])) == 0.0
    p = power_weight(1, 3, 1.0, (0.0,))
    assert sigma_measure(p, CellSet.from_cells(1, 3, [(0,)])) == 0.5


def test_sigma_counts_cells_for_constant_weight():
    w = constant_weight(2, 4)
    rng = Xorshift64Star(1)
    for _ in range(20):
        mask = np.array([rng.random() < 0.3 for _ in range(256)]).reshape(16, 16)
        E = CellSet(2, 4, mask)
        assert sigma_measure(w, E) == E.count()


def test_sigma_is_additive():
    w = power_weight(2, 4, -1.0, (8.0, 8.0))
    rng = Xorshift64Star(2)
    for _ in range(100):
        labels = np.array([rng.randbelow(3) for _ in range(256)]).reshape(16, 16)
        E = CellSet(2, 4, labels == 0)
        F = CellSet(2, 4, labels == 1)
        assert sigma_measure(w, E | F) == pytest.approx(sigma_measure(w, E) + sigma_measure(w, F), rel=1e-12)


def test_power_weight_singular_cell_uses_corners():
    # 특이점 (0.5, 0.5) 이 셀 (0,0) 중심과 겹침: 꼭짓점 거리 sqrt(0.5)
    w = power_weight(2, 2, 2.0, (0.5, 0.5))
    assert w.density[0, 0] == pytest.approx(0.5)
    assert w.density[1, 0] == pytest.approx(1.0)


def test_power_weight_rejects_non_integrable():
    with pytest.raises(WeightError):
        power_weight(2, 3, -2.0, (0.0, 0.0))


@pytest.mark.parametrize("spec", [
    "",
    "constant value=-1",
    "power gamma=1",
    "cell at=9",
    "cell",
    "constant theta=0.5",
    "constant theta=2 C=1",
    "gaussian",
])
def test_bad_specs(spec):
    with pytest.raises(WeightError):
        parse_weight_spec(spec, 1, 3)


def test_spec_parsing():
    w = parse_weight_spec("power gamma=0.5 center=1,2 theta=0.5 C=3", 2, 3)
    assert w.kind == "power"
    assert w.claimed == (0.5, 3.0)
    assert parse_weight_spec("half", 2, 3).claimed is None
    assert parse_weight_spec("cell at=1,1", 2, 3).density.sum() == 1.0


def test_spec_file(tmp_path):
    (tmp_path / "w.txt").write_text("n=1 J=2\n0 2\n3 0.5\n", encoding="utf-8")
    w = parse_weight_spec("file w.txt", 1, 2, str(tmp_path))
    assert list(w.density) == [2.0, 0.0, 0.0, 0.5]
    with pytest.raises(WeightError):
        parse_weight_spec("file w.txt", 1, 3, str(tmp_path))


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_constant_weight_never_violates(seed):
    w = constant_weight(2, 5, claimed=(1.0, 1.0))
    rep = check_weak_ainfty(w, 60, seed)
    assert rep.violations == 0
    assert rep.pairs > 0
    assert rep.fitted_theta == 1.0


def test_half_weight_with_2n_constant():
    w = half_weight(2, 5, claimed=(1.0, 4.0))
    rep = check_weak_ainfty(w, 100, 3)
    assert rep.violations == 0


def test_single_cell_weight_is_falsified():
    w = cell_weight(2, 6, (5, 9), claimed=(1.0, 1.0))
    rep = check_weak_ainfty(w, 20, 4)
    assert rep.violations > 0
    wit = rep.witnesses[0]
    assert wit["sigma_ratio"] > wit["bound"]
    # 조상 사슬 위 증인: E 는 무거운 셀 하나
    chain = [x for x in rep.witnesses if x["E"] == "1 heaviest cells"]
    assert chain
    assert all(x["sigma_ratio"] == 1.0 for x in chain)


def test_no_claim_reports_fit_only():
    w = power_weight(1, 6, 0.5, (0.0,))
    rep = check_weak_ainfty(w, 30, 9)
    assert rep.claimed is None
    assert rep.violations == 0
    assert rep.notes


def test_seed_and_threads_reproducible():
    w = power_weight(2, 5, -0.5, (3.0, 7.0), claimed=(0.5, 2.0))
    a = check_weak_ainfty(w, 40, 77, threads=1).to_dict()
    b = check_weak_ainfty(w, 40, 77, threads=4).to_dict()
    assert a == b


def test_samples_must_be_positive():
    with pytest.raises(WeightError):
        check_weak_ainfty(constant_weight(1, 3), 0, 1)
