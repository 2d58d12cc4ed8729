import math

import numpy as np
import pytest

from lattice.dyadic_core import CellSet, build_measure, measure_from_array, restrict_measure, scale_measure
from lattice.potentials import (
    OPERATORS,
    ParamsError,
    PotentialParams,
    ball_potential_F,
    ball_terms,
    check_points,
    continuous_potential,
    dyadic_potential,
    fractional_maximal_ball,
    fractional_maximal_dyadic,
    potential_field,
    shell_function_g,
    supercube_tail,
)
from lattice.rng import Xorshift64Star

# Σ_{k=0}^{10} 2^{-k/2}
GEOMETRIC_Q1 = (1.0 - 2.0 ** -5.5) / (1.0 - 2.0 ** -0.5)


def _random_tree(seed, n=2, J=4, atoms=12):
    rng = Xorshift64Star(seed)
    size = 1 << J
    return build_measure(n, J, [
        (tuple(rng.randbelow(size) for _ in range(n)), 1.0 - rng.random())
        for _ in range(atoms)
    ])


def _brute_dyadic(tree, params, x):
    """정의 그대로: 레벨마다 x 를 담는 큐브의 셀을 직접 더한다."""
    finest = np.asarray(tree.finest)
    top = params.top_level(tree.J, ball=False)
    terms = []
    for k in range(params.level_min, top + 1):
        sl = tuple(slice((c >> k) << k, ((c >> k) + 1) << k) for c in x)
        terms.append(float(finest[sl].sum()) / 2.0 ** (k * params.s))
    return sum(t ** params.q for t in terms) ** (1.0 / params.q), max(terms)


def _brute_ball(tree, params, x):
    finest = np.asarray(tree.finest)
    idx = np.indices(finest.shape)
    d2 = sum((g - c) ** 2 for g, c in zip(idx, x))
    top = params.top_level(tree.J, ball=True)
    terms = [float(finest[d2 < 4 ** j].sum()) / 2.0 ** (j * params.s) for j in range(params.level_min, top + 1)]
    return sum(t ** params.q for t in terms) ** (1.0 / params.q), max(terms)


# --- 파라미터 ---

@pytest.mark.parametrize("kwargs", [
    dict(n=1, alpha=1.0, q=1.0),
    dict(n=2, alpha=2.5, q=1.0),
    dict(n=2, alpha=0.0, q=1.0),
    dict(n=2, alpha=1.0, q=math.inf),
    dict(n=2, alpha=1.0, q=0.0),
    dict(n=2, alpha=1.0, q=1.0, level_min=3, level_max=2),
    dict(n=4, alpha=1.0, q=1.0),
])
def test_params_rejected(kwargs):
    with pytest.raises(ParamsError):
        PotentialParams(**kwargs)


def test_unknown_operator():
    tree = build_measure(1, 2, [])
    with pytest.raises(ParamsError):
        potential_field(tree, PotentialParams(n=1, alpha=0.5, q=1.0), "riesz")


def test_point_outside_root():
    tree = build_measure(1, 2, [((0,), 1.0)])
    with pytest.raises(ValueError):
        dyadic_potential(tree, PotentialParams(n=1, alpha=0.5, q=1.0), (4,))


# --- 손으로 계산한 값 ---

@pytest.mark.parametrize("which", OPERATORS)
def test_zero_measure_gives_zero(which):
    tree = build_measure(2, 3, [])
    fld = potential_field(tree, PotentialParams(n=2, alpha=1.0, q=2.0), which)
    assert not fld.values.any()


def test_unit_atom_dyadic_q1():
    tree = build_measure(1, 10, [((0,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=1.0)
    assert dyadic_potential(tree, params, (0,)) == pytest.approx(GEOMETRIC_Q1, rel=1e-12)
    assert GEOMETRIC_Q1 == pytest.approx(3.338770, abs=1e-6)


def test_unit_atom_dyadic_q2():
    tree = build_measure(1, 10, [((0,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=2.0)
    value = dyadic_potential(tree, params, (0,))
    assert value == pytest.approx(math.sqrt(2.0 - 2.0 ** -10), rel=1e-12)
    assert value == pytest.approx(1.413869, abs=1e-6)


def test_unit_atom_ball_same_sum():
    tree = build_measure(1, 10, [((0,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=1.0, level_max=10)
    assert ball_potential_F(tree, params, (0,)) == pytest.approx(GEOMETRIC_Q1, rel=1e-12)


def test_ball_terms_vanish_inside_distance():
    """거리 5 의 원자: 2^j ≤ 5 인 반지름에는 안 들어온다."""
    tree = build_measure(1, 4, [((5,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=1.0)
    terms, levels = ball_terms(tree, params, check_points(tree, [(0,)]))
    first = next(j for j, t in zip(levels, terms[0]) if t > 0)
    assert first == 3
    assert all(t == 0 for j, t in zip(levels, terms[0]) if j <= 2)


def test_shell_function_g():
    tree = build_measure(1, 4, [((1,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=1.0)
    assert shell_function_g(tree, params, 2, (3,)) == pytest.approx(0.5, rel=1e-15)
    assert shell_function_g(tree, params, 2, (4,)) == 0
    assert shell_function_g(build_measure(1, 4, []), params, 2, (3,)) == 0
    with pytest.raises(ParamsError):
        shell_function_g(tree, params, 5, (3,))


def test_shell_sum_is_dyadic_potential():
    tree = _random_tree(3)
    params = PotentialParams(n=2, alpha=1.0, q=1.5)
    x = (5, 9)
    total = sum(shell_function_g(tree, params, k, x) ** 1.5 for k in range(tree.J + 1)) ** (1 / 1.5)
    assert total == pytest.approx(dyadic_potential(tree, params, x), rel=1e-12)


def test_maximal_examples():
    params = PotentialParams(n=1, alpha=0.5, q=1.0)
    atom = build_measure(1, 10, [((0,), 1.0)])
    assert fractional_maximal_dyadic(atom, params, (0,)) == 1.0
    assert fractional_maximal_ball(atom, params, (0,)) == 1.0
    uniform = measure_from_array(np.ones(1 << 10))
    assert fractional_maximal_dyadic(uniform, params, (17,)) == pytest.approx(32.0, rel=1e-12)


def test_maximal_ball_far_from_support():
    tree = measure_from_array(np.ones((32, 32)))
    params = PotentialParams(n=2, alpha=1.0, q=1.0)
    B = CellSet.ball(2, 5, (4.0, 4.0), 3.0)
    mu_B = restrict_measure(tree, B)
    atoms = np.array([c for c, _ in mu_B.support()], dtype=np.float64)
    for x in [(20, 20), (31, 0), (0, 31), (25, 8)]:
        d = float(np.sqrt(((atoms - np.array(x)) ** 2).sum(axis=1)).min())
        value = fractional_maximal_ball(mu_B, params, x)
        assert value <= mu_B.total / d ** params.s * (1 + 1e-12)
        assert value == pytest.approx(_brute_ball(mu_B, params, x)[1], rel=1e-12)


# --- 성질 ---

@pytest.mark.parametrize("seed", range(10))
def test_against_brute_force(seed):
    tree = _random_tree(seed, n=1 + seed % 2, J=4)
    params = PotentialParams(n=tree.n, alpha=0.5, q=1.0 + seed % 3)
    rng = Xorshift64Star(1000 + seed)
    for _ in range(10):
        x = tuple(rng.randbelow(tree.size) for _ in range(tree.n))
        dy, mdy = _brute_dyadic(tree, params, x)
        ba, mba = _brute_ball(tree, params, x)
        assert dyadic_potential(tree, params, x) == pytest.approx(dy, rel=1e-12, abs=1e-300)
        assert fractional_maximal_dyadic(tree, params, x) == pytest.approx(mdy, rel=1e-12, abs=1e-300)
        assert ball_potential_F(tree, params, x) == pytest.approx(ba, rel=1e-12, abs=1e-300)
        assert fractional_maximal_ball(tree, params, x) == pytest.approx(mba, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 7.0])
def test_maximal_below_potential(q):
    for seed in range(5):
        tree = _random_tree(seed, n=2, J=4)
        params = PotentialParams(n=2, alpha=1.5, q=q)
        for flavor in ("dyadic", "ball"):
            pot = potential_field(tree, params, flavor).values
            mx = potential_field(tree, params, f"maximal_{flavor}").values
            assert np.all(mx <= pot)


@pytest.mark.parametrize("c", [0.0, 0.5, 2.0, 10.0])
def test_homogeneity(c):
    tree = _random_tree(7)
    params = PotentialParams(n=2, alpha=1.0, q=2.0)
    for which in OPERATORS:
        base = potential_field(tree, params, which).values
        scaled = potential_field(scale_measure(tree, c), params, which).values
        np.testing.assert_allclose(scaled, c * base, rtol=1e-12, atol=0)


def test_monotone_in_measure():
    small = _random_tree(21, atoms=6)
    extra = build_measure(2, 4, [((1, 2), 0.5), ((14, 3), 2.0)])
    big = measure_from_array(np.asarray(small.finest) + np.asarray(extra.finest))
    params = PotentialParams(n=2, alpha=1.0, q=1.5)
    for which in ("dyadic", "ball", "maximal_dyadic", "maximal_ball"):
        lo = potential_field(small, params, which).values
        hi = potential_field(big, params, which).values
        assert np.all(lo <= hi * (1 + 1e-12))


def test_field_matches_single_points():
    tree = _random_tree(5, n=2, J=5, atoms=40)
    params = PotentialParams(n=2, alpha=1.0, q=1.0)
    rng = Xorshift64Star(99)
    pts = [tuple(rng.randbelow(tree.size) for _ in range(2)) for _ in range(100)]
    single = {
        "dyadic": dyadic_potential,
        "ball": ball_potential_F,
        "maximal_dyadic": fractional_maximal_dyadic,
        "maximal_ball": fractional_maximal_ball,
    }
    for which, fn in single.items():
        grid = potential_field(tree, params, which).as_grid()
        for x in pts:
            assert grid[x] == pytest.approx(fn(tree, params, x), rel=1e-14)


def test_threads_do_not_change_values():
    tree = _random_tree(8, n=3, J=5, atoms=50)
    params = PotentialParams(n=3, alpha=2.0, q=1.0)
    one = potential_field(tree, params, "dyadic", threads=1).values
    many = potential_field(tree, params, "dyadic", threads=4).values
    assert np.array_equal(one, many)


def test_supercube_tail_matches_many_levels():
    tree = _random_tree(2, n=1, J=4)
    with_tail = PotentialParams(n=1, alpha=0.5, q=1.0, include_supercube_tail=True)
    long_sum = PotentialParams(n=1, alpha=0.5, q=1.0, level_max=tree.J + 200)
    a = potential_field(tree, with_tail, "dyadic").values
    b = potential_field(tree, long_sum, "dyadic").values
    np.testing.assert_allclose(a, b, rtol=1e-12)
    # 닫힌 꼴: (μ 2^{-Ks})^q / (1 - 2^{-qs}),  K = J + 1
    expected = (tree.total * 2.0 ** (-(tree.J + 1) * 0.5)) / (1 - 2.0 ** -0.5)
    assert supercube_tail(tree, with_tail, tree.J) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_continuous_comparable_to_ball_sum(q):
    tree = _random_tree(13, n=2, J=4)
    params = PotentialParams(n=2, alpha=1.0, q=q, include_supercube_tail=True)
    F = potential_field(tree, params, "ball").values
    rng = Xorshift64Star(4)
    sq = params.s * q
    for _ in range(20):
        x = tuple(rng.randbelow(tree.size) for _ in range(2))
        flat = x[0] * tree.size + x[1]
        T = continuous_potential(tree, params, x)
        ratio = T ** q / F[flat] ** q
        assert 2.0 ** -sq * math.log(2) * (1 - 1e-9) <= ratio <= 2.0 ** sq * math.log(2) * (1 + 1e-9)


def test_continuous_single_atom_closed_form():
    """원자 하나가 x 에 있으면 ∫_1^∞ r^{-sq} dr/r = 1/(sq)."""
    tree = build_measure(1, 3, [((2,), 1.0)])
    params = PotentialParams(n=1, alpha=0.5, q=2.0)
    assert continuous_potential(tree, params, (2,)) == pytest.approx((1.0 / (0.5 * 2.0)) ** 0.5, rel=1e-12)
