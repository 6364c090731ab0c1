"""Configuration: environment settings and YAML run configurations."""
from __future__ import annotations

from dataclasses import dataclass, field
import copy
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from dotenv import load_dotenv
import numpy as np
import yaml

from src.errors import ConfigValidationError
from src.integration.engine import IntegratorConfig
from src.problem.model import Problem
from src.problem.nonlinearity import NonlinearitySpec
from src.problem.weights import WeightSpec
from src.solvers.orbits import SearchWindow, ShootingConfig

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent
CONFIGS_DIR = BASE_DIR / "configs"

load_dotenv()


@dataclass
class ComputeSettings:
    """Worker threads for multi-start searches, grid scans and seed rings."""

    threads: int = 1


@dataclass
class DatabaseSettings:
    """Run-ledger connection configuration."""

    database_url: str = "sqlite:///data/runs.db"


@dataclass
class OutputSettings:
    results_dir: str = "results"


@dataclass
class Settings:
    compute: ComputeSettings = field(default_factory=ComputeSettings)
    database: DatabaseSettings = field(default_factory=DatabaseSettings)
    output: OutputSettings = field(default_factory=OutputSettings)


def _env_threads() -> int:
    raw = os.getenv("MINKOWSKI_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        logger.warning("MINKOWSKI_THREADS=%r is not an integer; using 1", raw)
        return 1
    return max(1, threads)


def load_settings() -> Settings:
    return Settings(
        compute=ComputeSettings(threads=_env_threads()),
        database=DatabaseSettings(
            database_url=os.getenv("DATABASE_URL", "sqlite:///data/runs.db"),
        ),
        output=OutputSettings(
            results_dir=os.getenv("RESULTS_DIR", "results"),
        ),
    )


settings = load_settings()


# run configurations ------------------------------------------------------------


def _get(section: Dict[str, Any], key: str, default: Any, where: str) -> Any:
    value = section.get(key, default)
    if value is None:
        raise ConfigValidationError(f"missing required key {where}.{key}", key=f"{where}.{key}")
    return value


def _number(
    section: Dict[str, Any],
    key: str,
    default: Any,
    where: str,
    *,
    low: Optional[float] = None,
    strict_low: bool = False,
    high: Optional[float] = None,
) -> float:
    value = _get(section, key, default, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{where}.{key} must be a number", key=f"{where}.{key}", value=value)
    value = float(value)
    if math.isnan(value):
        raise ConfigValidationError(f"{where}.{key} is NaN", key=f"{where}.{key}")
    if low is not None and (value < low or (strict_low and value == low)):
        bound = ">" if strict_low else ">="
        raise ConfigValidationError(f"{where}.{key} must be {bound} {low}", key=f"{where}.{key}", value=value)
    if high is not None and value > high:
        raise ConfigValidationError(f"{where}.{key} must be <= {high}", key=f"{where}.{key}", value=value)
    return value


def _integer(section: Dict[str, Any], key: str, default: Any, where: str, *, low: int = 0) -> int:
    value = _get(section, key, default, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(f"{where}.{key} must be an integer", key=f"{where}.{key}", value=value)
    if value < low:
        raise ConfigValidationError(f"{where}.{key} must be >= {low}", key=f"{where}.{key}", value=value)
    return value


def _choice(section: Dict[str, Any], key: str, default: str, where: str, options: Sequence[str]) -> str:
    value = _get(section, key, default, where)
    if value not in options:
        raise ConfigValidationError(f"{where}.{key} must be one of {list(options)}", key=f"{where}.{key}", value=value)
    return value


def _section(document: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = document.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigValidationError(f"section {name} must be a mapping", section=name)
    return value


def _numbers(values: Any, where: str) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ConfigValidationError(f"{where} must be a list of numbers", key=where)
    return tuple(float(v) for v in values)


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    result = copy.deepcopy(document)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigValidationError("override must look like section.key=value", override=item)
        parts = key.split(".")
        target = result
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigValidationError("override path crosses a scalar", override=item)
            target = node
        target[parts[-1]] = yaml.safe_load(raw)
    return result


def parse_weight(block: Dict[str, Any], period: float) -> WeightSpec:
    kind = _choice(block, "kind", "trig", "problem.weight", ("trig", "piecewise"))
    if kind == "trig":
        return WeightSpec.trig(
            amplitude=_number(block, "amplitude", None, "problem.weight", low=0.0),
            phase=_number(block, "phase", 0.0, "problem.weight"),
            offset=_number(block, "offset", 0.0, "problem.weight"),
            period=period,
        )
    breakpoints = _numbers(_get(block, "breakpoints", None, "problem.weight"), "problem.weight.breakpoints")
    values = _numbers(_get(block, "values", None, "problem.weight"), "problem.weight.values")
    return WeightSpec.piecewise(breakpoints, values, period)


def parse_nonlinearity(block: Dict[str, Any]) -> NonlinearitySpec:
    kind = _choice(block, "kind", "power", "problem.nonlinearity", ("power", "saturated"))
    p = _number(block, "exponent_p", None, "problem.nonlinearity", low=1.0, strict_low=True)
    if kind == "power":
        return NonlinearitySpec.power(p)
    q = _number(block, "exponent_q", None, "problem.nonlinearity", low=0.0, high=1.0)
    return NonlinearitySpec.saturated(p, q)


@dataclass(frozen=True)
class ScanSettings:
    grid: Tuple[float, ...]


@dataclass(frozen=True)
class BranchSettings:
    start: str
    lambda_min: float
    lambda_max: float
    direction: float
    initial_step: float
    min_step: float
    max_step: float
    max_steps: int


@dataclass(frozen=True)
class AsymptoticSettings:
    branch: str
    schedule: Tuple[float, ...]


@dataclass(frozen=True)
class SpectrumSettings:
    source: str
    period: float
    p_value: float
    q_constant: float
    q_cos: Tuple[float, ...]
    q_sin: Tuple[float, ...]
    k_max: int
    gap_csv: bool
    oracle_modes: int


@dataclass(frozen=True)
class SubharmonicSettings:
    k: Optional[int]
    j: int
    k_max: int
    seed_budget: int


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration; command blocks are parsed on demand."""

    source: Path
    raw_bytes: bytes
    document: Dict[str, Any]
    overrides: Tuple[str, ...]
    problem: Problem
    integrator: IntegratorConfig
    shooting: ShootingConfig
    window: SearchWindow
    lam: Optional[float]
    k: int

    @classmethod
    def from_file(cls, path: Path, overrides: Sequence[str] = ()) -> "RunConfig":
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ConfigValidationError("cannot read config file", path=str(path), reason=str(exc)) from exc
        try:
            document = yaml.safe_load(raw.decode("utf-8")) or {}
        except (yaml.YAMLError, UnicodeDecodeError) as exc:
            raise ConfigValidationError("config is not valid YAML", path=str(path), reason=str(exc)) from exc
        if not isinstance(document, dict):
            raise ConfigValidationError("config root must be a mapping", path=str(path))
        return cls.from_document(apply_overrides(document, overrides), source=path, raw_bytes=raw, overrides=overrides)

    @classmethod
    def from_document(
        cls,
        document: Dict[str, Any],
        *,
        source: Path = Path("<memory>"),
        raw_bytes: bytes = b"",
        overrides: Sequence[str] = (),
    ) -> "RunConfig":
        problem_block = _section(document, "problem")
        period = _number(problem_block, "period_T", 2 * math.pi, "problem", low=0.0, strict_low=True)
        problem = Problem(
            parse_weight(_section(problem_block, "weight"), period),
            parse_nonlinearity(_section(problem_block, "nonlinearity")),
        )

        integ = _section(document, "integrator")
        integrator = IntegratorConfig(
            rel_tol=_number(integ, "rel_tol", 1e-10, "integrator", low=0.0, strict_low=True, high=1e-2),
            abs_tol=_number(integ, "abs_tol", 1e-12, "integrator", low=0.0, strict_low=True, high=1e-2),
            max_step=_number(integ, "max_step", math.inf, "integrator", low=0.0, strict_low=True),
            lambda_aware_cap=bool(integ.get("lambda_aware_cap", True)),
            method=_choice(integ, "method", "DOP853", "integrator", ("RK45", "DOP853")),
        )

        solver = _section(document, "solver")
        shooting = ShootingConfig(
            newton_tol=_number(solver, "newton_tol", 1e-9, "solver", low=0.0, strict_low=True),
            max_newton_iter=_integer(solver, "max_newton_iter", 40, "solver", low=1),
            jacobian=_choice(solver, "jacobian", "variational", "solver", ("variational", "finite-difference")),
            fd_step=_number(solver, "fd_step", 1e-7, "solver", low=0.0, strict_low=True),
            delta_dup=_number(solver, "delta_dup", 1e-4, "solver", low=0.0, strict_low=True),
            segments=_integer(solver, "segments", 1, "solver", low=1),
            samples=_integer(solver, "samples", 2048, "solver", low=16),
        )
        window_block = _section(solver, "window")
        window = SearchWindow(
            r_min=_number(window_block, "r_min", 1e-2, "solver.window", low=0.0, strict_low=True),
            r_max=_number(window_block, "r_max", 10.0, "solver.window", low=0.0, strict_low=True),
            n_small=_integer(window_block, "n_small", 8, "solver.window"),
            n_large=_integer(window_block, "n_large", 6, "solver.window"),
        )
        lam = None
        if solver.get("lambda") is not None:
            lam = _number(solver, "lambda", None, "solver", low=0.0, strict_low=True)
        return cls(
            source=source,
            raw_bytes=raw_bytes,
            document=document,
            overrides=tuple(overrides),
            problem=problem,
            integrator=integrator,
            shooting=shooting,
            window=window,
            lam=lam,
            k=_integer(solver, "k", 1, "solver", low=1),
        )

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ConfigValidationError("solver.lambda is required for this command", key="solver.lambda")
        return self.lam

    def scan(self) -> ScanSettings:
        block = _section(self.document, "scan")
        if "grid" in block:
            grid = _numbers(block["grid"], "scan.grid")
        else:
            lo = _number(block, "lambda_min", None, "scan", low=0.0, strict_low=True)
            hi = _number(block, "lambda_max", None, "scan", low=lo, strict_low=True)
            points = _integer(block, "points", 60, "scan", low=2)
            spacing = _choice(block, "spacing", "linear", "scan", ("linear", "geometric"))
            values = np.geomspace(lo, hi, points) if spacing == "geometric" else np.linspace(lo, hi, points)
            grid = tuple(float(v) for v in values)
        if not grid or min(grid) <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigValidationError("scan grid must be positive and strictly increasing", key="scan.grid")
        return ScanSettings(grid)

    def branch(self) -> BranchSettings:
        block = _section(self.document, "branch")
        lo = _number(block, "lambda_min", None, "branch", low=0.0, strict_low=True)
        hi = _number(block, "lambda_max", None, "branch", low=lo, strict_low=True)
        return BranchSettings(
            start=_choice(block, "start", "large", "branch", ("small", "large")),
            lambda_min=lo,
            lambda_max=hi,
            direction=-1.0 if _choice(block, "direction", "down", "branch", ("down", "up")) == "down" else 1.0,
            initial_step=_number(block, "initial_step", 0.1, "branch", low=0.0, strict_low=True),
            min_step=_number(block, "min_step", 1e-6, "branch", low=0.0, strict_low=True),
            max_step=_number(block, "max_step", 1.0, "branch", low=0.0, strict_low=True),
            max_steps=_integer(block, "max_steps", 400, "branch", low=1),
        )

    def asymptotic(self) -> AsymptoticSettings:
        block = _section(self.document, "asymptotic")
        schedule = _numbers(_get(block, "schedule", None, "asymptotic"), "asymptotic.schedule")
        if len(schedule) < 2 or min(schedule) <= 0 or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigValidationError("asymptotic schedule must be positive and strictly increasing", key="asymptotic.schedule")
        return AsymptoticSettings(
            branch=_choice(block, "branch", "small", "asymptotic", ("small", "large")),
            schedule=schedule,
        )

    def spectrum(self) -> SpectrumSettings:
        block = _section(self.document, "spectrum")
        return SpectrumSettings(
            source=_choice(block, "source", "analytic", "spectrum", ("analytic", "linearization")),
            period=_number(block, "period_T", self.problem.period, "spectrum", low=0.0, strict_low=True),
            p_value=_number(block, "p_value", 1.0, "spectrum", low=0.0, strict_low=True),
            q_constant=_number(block, "q_constant", 0.0, "spectrum"),
            q_cos=_numbers(block.get("q_cos", []), "spectrum.q_cos"),
            q_sin=_numbers(block.get("q_sin", []), "spectrum.q_sin"),
            k_max=_integer(block, "k_max", 0, "spectrum"),
            gap_csv=bool(block.get("gap_csv", False)),
            oracle_modes=_integer(block, "oracle_modes", 64, "spectrum", low=1),
        )

    def subharmonic(self) -> SubharmonicSettings:
        block = _section(self.document, "subharmonic")
        k = _integer(block, "k", None, "subharmonic", low=1) if block.get("k") is not None else None
        return SubharmonicSettings(
            k=k,
            j=_integer(block, "j", 1, "subharmonic", low=1),
            k_max=_integer(block, "k_max", 12, "subharmonic", low=1),
            seed_budget=_integer(block, "seed_budget", 512, "subharmonic", low=1),
        )

    def describe(self) -> Dict[str, Any]:
        return {
            "source": self.source.as_posix(),
            "overrides": list(self.overrides),
            "weight": self.problem.weight.form.__class__.__name__,
            "nonlinearity": self.problem.nonlinearity.label,
            "period_T": self.problem.period,
            "lambda": self.lam,
        }


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped in ``configs/``."""
    return CONFIGS_DIR / f"{name}.yaml"
