import os

import numpy as np
import pytest

import catalog
from config import ConfigError, load_config, load_settings, parse_bool, parse_grid
from lattice.dyadic_core import DyadicCube, cube_mass

from conftest import CONFIG_DIR


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


BASE = """
[experiment]
kind = goodlambda-sweep
seed = 3

[measure]
source = generator
generator = sparse-random
atoms = 10

[params]
n = 2
J = 5
alpha = 1
q = 1
"""


# --- catalog ---

def test_generators_are_seeded():
    a = catalog.generate("sparse-random", 2, 5, 7, {"atoms": "12"})
    b = catalog.generate("sparse-random", 2, 5, 7, {"atoms": "12"})
    c = catalog.generate("sparse-random", 2, 5, 8, {"atoms": "12"})
    assert np.array_equal(a.finest, b.finest)
    assert not np.array_equal(a.finest, c.finest)


def test_battery_members_independent():
    trees = catalog.battery(1, 4, 2, 5, atoms=8)
    assert len(trees) == 4
    assert len({t.total for t in trees}) == 4
    again = catalog.battery(1, 4, 2, 5, atoms=8)
    assert [t.total for t in trees] == [t.total for t in again]


def test_single_atom_and_zero():
    tree = catalog.generate("single-atom", 2, 4, 0, {"atom": "3,5"})
    assert cube_mass(tree, DyadicCube(0, (3, 5))) == 1.0
    assert catalog.generate("zero", 1, 3, 0).total == 0.0


def test_remark_measure():
    center, radius = catalog.remark_ball(2, 5)
    assert center == (16.0, 16.0) and radius == 8.0
    tree = catalog.generate("remark-log", 2, 5, 0)
    finest = np.asarray(tree.finest)
    # 중심 옆 셀: 거리 sqrt(0.5)
    assert finest[15, 15] == pytest.approx(8.0 / np.sqrt(0.5))
    assert finest[0, 0] == 0.0
    with pytest.raises(catalog.CatalogError):
        catalog.remark_ball(2, 2)


def test_sharp_generator_needs_matching_J():
    tree = catalog.generate("sharp", 1, 13, 0, {"epsilon": "0.5", "alpha": "0.5"})
    assert tree.J == 13
    with pytest.raises(catalog.CatalogError):
        catalog.generate("sharp", 1, 12, 0, {"epsilon": "0.5", "alpha": "0.5"})
    with pytest.raises(catalog.CatalogError):
        catalog.generate("sharp", 1, 13, 0, {"alpha": "0.5"})


def test_unknown_generator():
    with pytest.raises(catalog.CatalogError):
        catalog.generate("gaussian", 1, 3, 0)


def test_random_cell_sets_shape():
    masks = catalog.random_cell_sets(5, 3, 2, 4, 0.5)
    assert len(masks) == 3
    assert all(m.shape == (16, 16) and m.dtype == bool for m in masks)


# --- 값 파서 ---

def test_parse_grid():
    assert parse_grid("2^-1..2^-3", "grids", "epsilon") == (0.5, 0.25, 0.125)
    assert parse_grid("0.4, 0.5,0.7", "sharpness", "epsilon") == (0.4, 0.5, 0.7)
    with pytest.raises(ConfigError):
        parse_grid(" , ", "grids", "p")
    with pytest.raises(ConfigError):
        parse_grid("0.5, x", "grids", "p")


def test_parse_bool():
    assert parse_bool("Yes", "expint", "log_profile") is True
    with pytest.raises(ConfigError):
        parse_bool("maybe", "expint", "log_profile")


def test_settings_from_environment():
    s = load_settings({"DYADLAB_THREADS": "4", "DYADLAB_LOG_LEVEL": "debug"})
    assert s.threads == 4 and s.log_level == "DEBUG" and s.out is None
    with pytest.raises(ConfigError):
        load_settings({"DYADLAB_THREADS": "zero"})
    with pytest.raises(ConfigError):
        load_settings({"DYADLAB_THREADS": "0"})


# --- load_config ---

def test_load_base_config(tmp_path):
    cfg = load_config(_write(tmp_path, BASE))
    assert cfg.kind == "goodlambda-sweep"
    assert (cfg.n, cfg.J, cfg.alpha, cfg.q, cfg.seed) == (2, 5, 1.0, 1.0, 3)
    assert cfg.measure_options["atoms"] == "10"
    assert cfg.stem == "exp"
    assert cfg.params().s == 1.0


def test_seed_and_kind_overrides(tmp_path):
    path = _write(tmp_path, BASE)
    assert load_config(path, seed=99).seed == 99
    with pytest.raises(ConfigError):
        load_config(path, kind="sharpness")
    with pytest.raises(ConfigError):
        load_config(path, seed=-1)


@pytest.mark.parametrize("old, new, where", [
    ("alpha = 1", "alpha = 2", "[params]"),
    ("alpha = 1", "alpha = one", "[params] alpha"),
    ("q = 1", "q = inf", "[params] q"),
    ("J = 5", "J = -1", "[params] J"),
    ("generator = sparse-random", "generator = gaussian", "[measure] generator"),
    ("atoms = 10", "atoms = 10\nshape = round", "[measure] shape"),
    ("kind = goodlambda-sweep", "kind = fourier", "[experiment] kind"),
])
def test_bad_values_name_section_and_key(tmp_path, old, new, where):
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, BASE.replace(old, new)))
    assert where in str(exc.value)


def test_syntax_error_reports_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, BASE + "\nthis line is not ini\n"))
    assert exc.value.line is not None


def test_missing_files_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))
    text = BASE.replace("source = generator", "source = file\npath = missing.txt")
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, text))
    assert "[measure] path" in str(exc.value)


def test_weights_parsed(tmp_path):
    text = BASE + "\n[weight]\nspecs = constant; half; power gamma=1 center=16,16  # 세 가지\n"
    cfg = load_config(_write(tmp_path, text))
    assert [w.kind for w in cfg.weights] == ["constant", "custom", "power"]


def test_ainfty_needs_one_weight(tmp_path):
    text = BASE.replace("goodlambda-sweep", "ainfty-check")
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_epsilon_range_checked(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, BASE + "\n[grids]\nepsilon = 0.5, 1.5\n"))


def test_sharpness_config_without_J():
    cfg = load_config(os.path.join(CONFIG_DIR, "sharpness.cfg"))
    assert cfg.J is None
    assert cfg.sharp_eps == (0.4, 0.5, 0.7)
    assert cfg.held_out == 0.6


def test_shipped_configs_load():
    names = sorted(f for f in os.listdir(CONFIG_DIR) if f.endswith(".cfg"))
    assert names
    for name in names:
        cfg = load_config(os.path.join(CONFIG_DIR, name))
        assert cfg.kind


def test_unknown_operator_rejected(tmp_path):
    text = BASE.replace("q = 1", "q = 1\noperators = dyadic, wolff")
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, text))
    assert "[params] operators" in str(exc.value)
    ok = load_config(_write(tmp_path, BASE.replace("q = 1", "q = 1\noperators = dyadic, continuous")))
    assert ok.operators == ("dyadic", "continuous")


def test_battery_sharp_epsilon(tmp_path):
    battery = BASE.replace("generator = sparse-random", "source = battery\ncount = 4").replace("source = generator\n", "")
    cfg = load_config(_write(tmp_path, battery.replace("atoms = 10", "atoms = 10\nsharp_epsilon = 0.5, 0.4")))
    assert cfg.battery_sharp_eps == (0.5, 0.4)
    assert load_config(_write(tmp_path, battery)).battery_sharp_eps == ()
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, BASE.replace("atoms = 10", "atoms = 10\nsharp_epsilon = 0.5")))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, battery.replace("atoms = 10", "atoms = 10\nsharp_epsilon = 0.01")))


def test_shipped_battery_requests_sharp_examples():
    cfg = load_config(os.path.join(CONFIG_DIR, "goodlambda_battery.cfg"))
    assert cfg.battery_sharp_eps == (0.5, 0.4)
