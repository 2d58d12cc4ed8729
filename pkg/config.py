"""
config.py

실험 설정 파일(INI 형식) 파싱과 DYADLAB_* 환경변수.

설정 파일 예:

    [experiment]
    kind = goodlambda-sweep
    seed = 7

    [measure]
    source = generator          # generator | file | battery
    generator = sparse-random
    atoms = 64

    [params]
    n = 2
    J = 8
    alpha = 1
    q = 1

    [grids]
    epsilon = 2^-1..2^-8

실수 값은 전부 decimal.Decimal 로 먼저 읽어 형식을 검사한 뒤 float 로 바꾼다.
참조하는 파일은 파싱 시점에 존재해야 하고, 모듈 전제조건(α < n 등)도
여기서 검사해서 계산을 시작하기 전에 거절한다.

환경변수:
    DYADLAB_THREADS     작업 스레드 수
    DYADLAB_OUT         출력 디렉터리
    DYADLAB_DB_URL      실행 기록 DB (기본: sqlite:///<out>/runs.db)
    DYADLAB_LOG_LEVEL   로그 레벨 (기본 INFO)
"""

import configparser
import hashlib
import os
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Dict, List, Mapping, Optional, Tuple

from catalog import GENERATORS
from lattice.dyadic_core import DENSE_LIMIT_LOG2
from lattice.potentials import OPERATORS, PotentialParams
from lattice.weights import Weight, parse_weight_spec
from analysis.sharpness import sharp_levels
from analysis.goodlambda_lab import (
    DEFAULT_CPRIME_GRID,
    DEFAULT_C_TEST_GRID,
    DEFAULT_EPS_GRID,
    DEFAULT_QUANTILES,
)

KINDS = (
    "potential-field",
    "goodlambda-sweep",
    "goodtau",
    "norms",
    "expint",
    "sharpness",
    "whitney",
    "ainfty-check",
)
MEASURE_SOURCES = ("generator", "file", "battery")
MAX_SEED = (1 << 64) - 1

KNOWN_KEYS: Dict[str, Tuple[str, ...]] = {
    "experiment": ("kind", "seed"),
    "measure": ("source", "generator", "path", "atoms", "count", "atom", "epsilon", "sharp_epsilon"),
    "params": ("n", "j", "alpha", "q", "level_min", "level_max", "tail", "flavor", "operators"),
    "weight": ("spec", "specs", "samples", "expect"),
    "grids": ("epsilon", "lambda_quantiles", "c_prime", "p", "tau", "c_cap", "target"),
    "sharpness": ("epsilon", "held_out"),
    "expint": ("center", "radius", "c_target", "c_test", "log_profile", "induction_levels"),
    "whitney": ("set", "lambda_quantile", "count", "density"),
    "output": ("dir",),
}

_POW2_RANGE = re.compile(r"^2\^(-?\d+)\.\.2\^(-?\d+)$")


class ConfigError(ValueError):
    """설정 파일 오류. 어느 섹션/키(또는 줄)에서 났는지 메시지에 붙인다."""

    def __init__(self, message: str, section: Optional[str] = None, key: Optional[str] = None, line: Optional[int] = None):
        self.section = section
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(f"{' '.join(where)}: {message}" if where else message)


# --- 환경변수 ---

@dataclass
class Settings:
    threads: Optional[int] = None
    out: Optional[str] = None
    db_url: Optional[str] = None
    log_level: str = "INFO"


def load_settings(environ: Optional[Mapping[str, str]] = None) -> Settings:
    env = os.environ if environ is None else environ
    threads = None
    if env.get("DYADLAB_THREADS"):
        try:
            threads = int(env["DYADLAB_THREADS"])
        except ValueError:
            raise ConfigError(f"DYADLAB_THREADS must be an integer (got {env['DYADLAB_THREADS']!r})")
        if threads < 1:
            raise ConfigError(f"DYADLAB_THREADS must be >= 1 (got {threads})")
    return Settings(
        threads=threads,
        out=env.get("DYADLAB_OUT") or None,
        db_url=env.get("DYADLAB_DB_URL") or None,
        log_level=(env.get("DYADLAB_LOG_LEVEL") or "INFO").upper(),
    )


# --- 값 파서 ---

def parse_decimal(text: str, section: str, key: str) -> float:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise ConfigError(f"not a decimal number: {text!r}", section, key)
    if not value.is_finite():
        raise ConfigError(f"value must be finite: {text!r}", section, key)
    return float(value)


def parse_grid(text: str, section: str, key: str) -> Tuple[float, ...]:
    """쉼표 목록 또는 2^a..2^b (지수를 1씩)."""
    text = text.strip()
    m = _POW2_RANGE.match(text.replace(" ", ""))
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        step = 1 if b >= a else -1
        return tuple(2.0 ** k for k in range(a, b + step, step))
    items = [t for t in (part.strip() for part in text.split(",")) if t]
    if not items:
        raise ConfigError("empty list", section, key)
    return tuple(parse_decimal(t, section, key) for t in items)


def parse_int(text: str, section: str, key: str, low: Optional[int] = None, high: Optional[int] = None) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}", section, key)
    if low is not None and value < low:
        raise ConfigError(f"must be >= {low} (got {value})", section, key)
    if high is not None and value > high:
        raise ConfigError(f"must be <= {high} (got {value})", section, key)
    return value


def parse_bool(text: str, section: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}", section, key)


# --- RunConfig ---

@dataclass
class RunConfig:
    path: str
    digest: str
    kind: str
    seed: int
    n: int
    alpha: float
    q: float = 1.0
    J: Optional[int] = None
    level_min: int = 0
    level_max: Optional[int] = None
    tail: bool = False
    flavor: str = "dyadic"
    operators: Tuple[str, ...] = ("dyadic", "maximal_dyadic", "ball", "maximal_ball")

    measure_source: str = "generator"
    generator: str = "sparse-random"
    measure_path: Optional[str] = None
    measure_options: Dict[str, str] = field(default_factory=dict)
    battery_count: int = 50
    battery_atoms: int = 64
    battery_sharp_eps: Tuple[float, ...] = ()

    weights: List[Weight] = field(default_factory=list)
    samples: int = 10_000
    expect: str = "holds"

    eps_grid: Tuple[float, ...] = DEFAULT_EPS_GRID
    lambda_quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    cprime_grid: Tuple[float, ...] = DEFAULT_CPRIME_GRID
    p_grid: Tuple[float, ...] = (0.5, 1.0, 2.0)
    tau: float = 2.0
    c_cap: float = 2.0 ** 10
    target: float = 0.5

    sharp_eps: Tuple[float, ...] = (0.5,)
    held_out: Optional[float] = None

    expint_center: Optional[Tuple[float, ...]] = None
    expint_radius: Optional[float] = None
    c_target: float = 10.0
    c_test_grid: Tuple[float, ...] = DEFAULT_C_TEST_GRID
    log_profile: bool = False
    induction_levels: int = 3

    whitney_set: str = "level-set"
    whitney_quantile: float = 0.9
    whitney_count: int = 100
    whitney_density: float = 0.5

    out_dir: Optional[str] = None

    def params(self, **overrides) -> PotentialParams:
        values = dict(
            n=self.n,
            alpha=self.alpha,
            q=self.q,
            level_min=self.level_min,
            level_max=self.level_max,
            include_supercube_tail=self.tail,
        )
        values.update(overrides)
        return PotentialParams(**values)

    @property
    def stem(self) -> str:
        return os.path.splitext(os.path.basename(self.path))[0]


def _read_parser(path: str) -> Tuple[configparser.ConfigParser, str]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        text = f.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("missing section header", line=e.lineno) from e
    except configparser.DuplicateOptionError as e:
        raise ConfigError("duplicate key", e.section, e.option, line=e.lineno) from e
    except configparser.DuplicateSectionError as e:
        raise ConfigError("duplicate section", e.section, line=e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("unparseable line", line=line) from e
    return parser, text


def _check_keys(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigError(f"unknown section (known: {', '.join(KNOWN_KEYS)})", section)
        for key in parser[section]:
            if key not in KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key (known: {', '.join(KNOWN_KEYS[section])})", section, key)


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def load_config(path: str, kind: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """
    설정 파일을 읽어 RunConfig 로. kind/seed 는 명령행 값이 우선한다.
    하위 명령과 파일의 kind 가 다르면 ConfigError.
    """
    parser, text = _read_parser(path)
    _check_keys(parser)
    base_dir = os.path.dirname(os.path.abspath(path))

    def get(section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    file_kind = get("experiment", "kind")
    if kind and file_kind and kind != file_kind:
        raise ConfigError(f"subcommand {kind!r} does not match config kind {file_kind!r}", "experiment", "kind")
    kind = kind or file_kind
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r} (choose from {', '.join(KINDS)})", "experiment", "kind")

    if seed is None:
        seed = parse_int(get("experiment", "seed", "0"), "experiment", "seed", 0, MAX_SEED)
    elif not (0 <= seed <= MAX_SEED):
        raise ConfigError(f"seed must be an unsigned 64-bit integer (seed={seed})", "experiment", "seed")

    if get("params", "n") is None or get("params", "alpha") is None:
        raise ConfigError("n and alpha are required", "params")
    cfg = RunConfig(
        path=path,
        digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        kind=kind,
        seed=seed,
        n=parse_int(get("params", "n"), "params", "n", 1, 3),
        alpha=parse_decimal(get("params", "alpha"), "params", "alpha"),
        q=parse_decimal(get("params", "q", "1"), "params", "q"),
    )

    # --- params ---
    if get("params", "j") is not None:
        cfg.J = parse_int(get("params", "j"), "params", "J", 0)
    elif kind != "sharpness":
        raise ConfigError("J is required", "params", "J")
    cfg.level_min = parse_int(get("params", "level_min", "0"), "params", "level_min", 0)
    if get("params", "level_max") is not None:
        cfg.level_max = parse_int(get("params", "level_max"), "params", "level_max", 0)
    cfg.tail = parse_bool(get("params", "tail", "false"), "params", "tail")
    cfg.flavor = get("params", "flavor", "dyadic").strip()
    if cfg.flavor not in ("dyadic", "ball"):
        raise ConfigError(f"flavor must be dyadic or ball (got {cfg.flavor!r})", "params", "flavor")
    if get("params", "operators") is not None:
        cfg.operators = tuple(t.strip() for t in get("params", "operators").split(",") if t.strip())
        unknown = [op for op in cfg.operators if op not in OPERATORS]
        if unknown or not cfg.operators:
            raise ConfigError(f"unknown operators {unknown} (choose from {', '.join(OPERATORS)})", "params", "operators")
    try:
        cfg.params()
    except ValueError as e:
        raise ConfigError(str(e), "params") from e

    # --- measure ---
    cfg.measure_source = get("measure", "source", "generator").strip()
    if cfg.measure_source not in MEASURE_SOURCES:
        raise ConfigError(f"source must be one of {', '.join(MEASURE_SOURCES)}", "measure", "source")
    if cfg.measure_source == "file":
        if get("measure", "path") is None:
            raise ConfigError("path is required for source = file", "measure", "path")
        cfg.measure_path = _resolve(base_dir, get("measure", "path").strip())
        if not os.path.isfile(cfg.measure_path):
            raise ConfigError(f"measure file not found: {cfg.measure_path}", "measure", "path")
    cfg.generator = get("measure", "generator", "sparse-random").strip()
    if cfg.measure_source == "generator" and cfg.generator not in GENERATORS:
        raise ConfigError(f"unknown generator {cfg.generator!r} (choose from {', '.join(GENERATORS)})", "measure", "generator")
    cfg.measure_options = {k: v for k, v in parser["measure"].items()} if parser.has_section("measure") else {}
    if cfg.generator == "sharp":
        cfg.measure_options.setdefault("alpha", str(cfg.alpha))
    cfg.battery_atoms = parse_int(get("measure", "atoms", "64"), "measure", "atoms", 1)
    cfg.battery_count = parse_int(get("measure", "count", "50"), "measure", "count", 2 if cfg.measure_source == "battery" else 1)
    if get("measure", "sharp_epsilon") is not None:
        if cfg.measure_source != "battery" or kind != "goodlambda-sweep":
            raise ConfigError("sharp_epsilon only applies to goodlambda-sweep batteries", "measure", "sharp_epsilon")
        cfg.battery_sharp_eps = parse_grid(get("measure", "sharp_epsilon"), "measure", "sharp_epsilon")
        for eps in cfg.battery_sharp_eps:
            if not (0 < eps <= 1):
                raise ConfigError("epsilon values must lie in (0, 1]", "measure", "sharp_epsilon")
            if cfg.n * sharp_levels(eps, cfg.n, cfg.alpha) > DENSE_LIMIT_LOG2:
                raise ConfigError(f"sharp example eps={eps:g} has no cell representation for n={cfg.n}", "measure", "sharp_epsilon")

    # --- weight ---
    cfg.samples = parse_int(get("weight", "samples", "10000"), "weight", "samples", 1)
    cfg.expect = get("weight", "expect", "holds").strip()
    if cfg.expect not in ("holds", "falsified"):
        raise ConfigError("expect must be holds or falsified", "weight", "expect")
    if cfg.J is not None:
        specs: List[Tuple[str, str]] = []
        if get("weight", "spec") is not None:
            specs.append(("spec", get("weight", "spec")))
        if get("weight", "specs") is not None:
            specs.extend(("specs", s) for s in get("weight", "specs").split(";") if s.strip())
        for key, spec in specs:
            try:
                cfg.weights.append(parse_weight_spec(spec.strip(), cfg.n, cfg.J, base_dir))
            except ValueError as e:
                raise ConfigError(str(e), "weight", key) from e
    if kind == "ainfty-check" and len(cfg.weights) != 1:
        raise ConfigError("ainfty-check needs exactly one weight spec", "weight", "spec")

    # --- grids ---
    if get("grids", "epsilon") is not None:
        cfg.eps_grid = parse_grid(get("grids", "epsilon"), "grids", "epsilon")
        if any(not (0 < e < 1) for e in cfg.eps_grid):
            raise ConfigError("epsilon values must lie in (0, 1)", "grids", "epsilon")
    if get("grids", "lambda_quantiles") is not None:
        cfg.lambda_quantiles = parse_grid(get("grids", "lambda_quantiles"), "grids", "lambda_quantiles")
        if any(not (0 <= v <= 1) for v in cfg.lambda_quantiles):
            raise ConfigError("quantiles must lie in [0, 1]", "grids", "lambda_quantiles")
    if get("grids", "c_prime") is not None:
        cfg.cprime_grid = parse_grid(get("grids", "c_prime"), "grids", "c_prime")
    if get("grids", "p") is not None:
        cfg.p_grid = parse_grid(get("grids", "p"), "grids", "p")
        if any(p <= 0 for p in cfg.p_grid):
            raise ConfigError("p values must be positive", "grids", "p")
    cfg.tau = parse_decimal(get("grids", "tau", "2"), "grids", "tau")
    if cfg.tau <= 1:
        raise ConfigError("tau must be > 1", "grids", "tau")
    cfg.c_cap = parse_decimal(get("grids", "c_cap", "1024"), "grids", "c_cap")
    cfg.target = parse_decimal(get("grids", "target", "0.5"), "grids", "target")
    if not (0 < cfg.target < 1):
        raise ConfigError("target must lie in (0, 1)", "grids", "target")

    # --- sharpness ---
    if get("sharpness", "epsilon") is not None:
        cfg.sharp_eps = parse_grid(get("sharpness", "epsilon"), "sharpness", "epsilon")
    if any(not (0 < e <= 1) for e in cfg.sharp_eps):
        raise ConfigError("epsilon values must lie in (0, 1]", "sharpness", "epsilon")
    if get("sharpness", "held_out") is not None:
        cfg.held_out = parse_decimal(get("sharpness", "held_out"), "sharpness", "held_out")

    # --- expint ---
    if get("expint", "center") is not None:
        cfg.expint_center = parse_grid(get("expint", "center"), "expint", "center")
        if len(cfg.expint_center) != cfg.n:
            raise ConfigError(f"center needs {cfg.n} coordinates", "expint", "center")
    if get("expint", "radius") is not None:
        cfg.expint_radius = parse_decimal(get("expint", "radius"), "expint", "radius")
        if cfg.expint_radius <= 0:
            raise ConfigError("radius must be positive", "expint", "radius")
    cfg.c_target = parse_decimal(get("expint", "c_target", "10"), "expint", "c_target")
    if get("expint", "c_test") is not None:
        cfg.c_test_grid = parse_grid(get("expint", "c_test"), "expint", "c_test")
    cfg.log_profile = parse_bool(get("expint", "log_profile", "false"), "expint", "log_profile")
    cfg.induction_levels = parse_int(get("expint", "induction_levels", "3"), "expint", "induction_levels", 0, 12)

    # --- whitney ---
    cfg.whitney_set = get("whitney", "set", "level-set").strip()
    if cfg.whitney_set not in ("level-set", "random"):
        raise ConfigError("set must be level-set or random", "whitney", "set")
    cfg.whitney_quantile = parse_decimal(get("whitney", "lambda_quantile", "0.9"), "whitney", "lambda_quantile")
    cfg.whitney_count = parse_int(get("whitney", "count", "100"), "whitney", "count", 1)
    cfg.whitney_density = parse_decimal(get("whitney", "density", "0.5"), "whitney", "density")

    if get("output", "dir") is not None:
        cfg.out_dir = _resolve(base_dir, get("output", "dir").strip())
    return cfg
