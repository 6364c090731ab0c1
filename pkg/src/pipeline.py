"""Command-line front end: config-driven experiments with CSV/JSON artifacts."""
from __future__ import annotations

import argparse
from dataclasses import dataclass
import logging
from pathlib import Path
import sys
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.config import RunConfig, settings
from src.continuation.asymptotics import AsymptoticReport, asymptotic_large, asymptotic_small
from src.continuation.branch import StepControl, trace_branch
from src.errors import (
    EXIT_OK,
    ConfigValidationError,
    DegreeUndefined,
    MinkowskiLabError,
    NotFound,
    VerificationFailed,
)
from src.problem.thresholds import average_map_degree
from src.problem.weights import weight_analysis
from src.reporting.exports import ArtifactSet, config_digest, write_json
from src.reporting.logging import record_run_best_effort
from src.solvers.orbits import PeriodicOrbit
from src.solvers.search import find_two_solutions, scan_lambda
from src.solvers.shooting import PeriodicSolver, fixed_point_residual
from src.solvers.verification import verify_orbit
from src.spectrum.coefficients import linearize_around, trigonometric_coeffs
from src.spectrum.eigen import higher_eigenvalues, principal_eigenvalue
from src.spectrum.hill import hill_galerkin_spectrum
from src.subharmonics.search import find_subharmonic
from src.subharmonics.twist import scan_twist_orders, twist_check

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "scan", "branch", "asymptotic", "spectrum", "subharmonic", "verify")


@dataclass
class RunContext:
    config: RunConfig
    solver: PeriodicSolver
    artifacts: ArtifactSet
    threads: int


def _problem_summary(ctx: RunContext) -> dict:
    problem = ctx.config.problem
    report, decomposition = weight_analysis(problem.weight, problem.nonlinearity)
    return {
        "config": ctx.config.describe(),
        "conditions": report.as_dict(),
        "positivity_intervals": [list(interval) for interval in decomposition.positivity_intervals],
        "constants": ctx.solver.constants.as_dict(),
    }


def _solutions(ctx: RunContext, lam: float) -> List[PeriodicOrbit]:
    return find_two_solutions(ctx.solver, lam, ctx.config.window, threads=ctx.threads)


def run_solve(ctx: RunContext) -> None:
    lam = ctx.config.require_lambda()
    problem = ctx.config.problem
    orbits = _solutions(ctx, lam)
    entries = []
    for index, orbit in enumerate(orbits, start=1):
        record = verify_orbit(orbit, problem, constants=ctx.solver.constants)
        name = f"orbit_{index}_{orbit.orbit_class.value.lower()}"
        ctx.artifacts.csv(name, orbit.samples_frame())
        entries.append({**orbit.summary(), "file": f"{name}.csv", "verification": record.as_dict()})
    try:
        diagnostics = average_map_degree(problem.weight, problem.nonlinearity, lam, ctx.config.window.r_max)
        degree: Optional[int] = diagnostics.degree
    except DegreeUndefined as exc:
        logger.info("average-map degree undefined: %s", exc)
        degree = None
    summary = _problem_summary(ctx)
    summary.update(
        {
            "lambda": lam,
            "orbits": entries,
            "classes": [entry["class"] for entry in entries],
            "average_map_degree": degree,
        }
    )
    ctx.artifacts.json("summary", summary)


def run_scan(ctx: RunContext) -> None:
    grid = ctx.config.scan().grid
    result = scan_lambda(ctx.solver, grid, ctx.config.window, threads=ctx.threads)
    ctx.artifacts.csv("scan", result.table)
    ctx.artifacts.json("scan", {**_problem_summary(ctx), **result.as_dict()})


def _start_orbit(ctx: RunContext, lam: float, which: str) -> PeriodicOrbit:
    orbits = _solutions(ctx, lam)
    if not orbits:
        raise NotFound("no nontrivial orbit to start from", lam=lam)
    return orbits[0] if which == "small" else orbits[-1]


def run_branch(ctx: RunContext) -> None:
    block = ctx.config.branch()
    lam = ctx.config.require_lambda()
    start = _start_orbit(ctx, lam, block.start)
    control = StepControl(
        initial_step=block.initial_step,
        min_step=block.min_step,
        max_step=block.max_step,
        max_steps=block.max_steps,
    )
    branch = trace_branch(
        ctx.solver,
        start,
        (block.lambda_min, block.lambda_max),
        control,
        direction=block.direction,
    )
    ctx.artifacts.csv("branch", branch.frame())
    ctx.artifacts.json("branch", {**_problem_summary(ctx), "start": start.summary(), **branch.summary()})


def _histogram_frame(report: AsymptoticReport) -> pd.DataFrame:
    rows = []
    for lam, counts in sorted(report.histograms.items()):
        edges = np.linspace(-1.0, 1.0, len(counts) + 1)
        for left, fraction in zip(edges[:-1], counts):
            rows.append({"lambda": lam, "bin_left": float(left), "fraction": float(fraction)})
    return pd.DataFrame(rows)


def run_asymptotic(ctx: RunContext) -> None:
    block = ctx.config.asymptotic()
    follow = asymptotic_small if block.branch == "small" else asymptotic_large
    report = follow(ctx.solver, block.schedule, window=ctx.config.window, threads=ctx.threads)
    ctx.artifacts.csv("asymptotic", report.export_frame())
    ctx.artifacts.csv(
        "limit_profile",
        pd.DataFrame({"t": report.limit_times, "u": report.limit_profile, "slope_class": report.limit_slope_class}),
    )
    ctx.artifacts.csv("derivative_histograms", _histogram_frame(report))
    ctx.artifacts.json("asymptotic", {**_problem_summary(ctx), **report.summary()})


def run_spectrum(ctx: RunContext) -> None:
    block = ctx.config.spectrum()
    if block.source == "analytic":
        coeffs = trigonometric_coeffs(block.period, block.q_constant, block.q_cos, block.q_sin, p_value=block.p_value)
    else:
        lam = ctx.config.require_lambda()
        coeffs = linearize_around(_start_orbit(ctx, lam, "small"), ctx.config.problem)
    result = principal_eigenvalue(coeffs, config=ctx.config.integrator)
    payload = {"provenance": coeffs.provenance, "period_T": coeffs.period, **result.report()}
    if block.k_max > 0:
        higher = higher_eigenvalues(coeffs, block.k_max, mu0=result.mu0, config=ctx.config.integrator)
        payload["higher"] = higher.frame().to_dict(orient="records")
        payload["interlaced"] = higher.interlaced()
        ctx.artifacts.csv("higher_eigenvalues", higher.frame())
    if coeffs.fourier is not None:
        oracle = hill_galerkin_spectrum(coeffs, block.oracle_modes)
        payload["oracle"] = {"modes": oracle.modes, "mu0": oracle.mu0, "lowest": oracle.eigenvalues[:7].tolist()}
    ctx.artifacts.csv("eigenfunction", pd.DataFrame({"t": result.times, "w": result.eigenfunction}))
    if block.gap_csv:
        ctx.artifacts.csv("rotation_gap", result.gap_frame())
    ctx.artifacts.json("eigen", payload)


def run_subharmonic(ctx: RunContext) -> None:
    block = ctx.config.subharmonic()
    lam = ctx.config.require_lambda()
    small = _start_orbit(ctx, lam, "small")
    if block.k is not None:
        twist = twist_check(ctx.solver, small, block.k)
        reports = [twist]
    else:
        reports = scan_twist_orders(ctx.solver, small, block.k_max)
        twist = reports[-1]
    ctx.artifacts.json("twist", {"reports": [report.as_dict() for report in reports]})
    result = find_subharmonic(
        ctx.solver,
        small,
        twist.k,
        block.j,
        twist=twist,
        budget=block.seed_budget,
        threads=ctx.threads,
    )
    ctx.artifacts.csv("subharmonic", result.frame())
    ctx.artifacts.json("subharmonic", {**result.summary(), "small": small.summary(), "twist": twist.as_dict()})


def run_verify(ctx: RunContext) -> None:
    """Re-solve, verify every orbit and recompute its fixed-point residual at tighter tolerances."""
    lam = ctx.config.require_lambda()
    initial = ctx.config.document.get("solver", {}).get("initial_state")
    if initial is not None:
        if not isinstance(initial, (list, tuple)) or len(initial) != 2:
            raise ConfigValidationError("solver.initial_state must be [x1, x2]", key="solver.initial_state")
        orbits = [ctx.solver.newton_shoot(lam, ctx.config.k, [float(v) for v in initial])]
    else:
        orbits = _solutions(ctx, lam)
    tighter = ctx.config.integrator.tightened(100.0)
    records = []
    for orbit in orbits:
        record = verify_orbit(orbit, ctx.config.problem, constants=ctx.solver.constants)
        records.append(
            {
                **orbit.summary(),
                "verification": record.as_dict(),
                "tight_tolerance_residual": fixed_point_residual(ctx.solver, orbit, tighter),
            }
        )
    ctx.artifacts.json("verification", {"lambda": lam, "orbits": records})


HANDLERS: Dict[str, Callable[[RunContext], None]] = {
    "solve": run_solve,
    "scan": run_scan,
    "branch": run_branch,
    "asymptotic": run_asymptotic,
    "spectrum": run_spectrum,
    "subharmonic": run_subharmonic,
    "verify": run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minkowski-lab", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--no-ledger", action="store_true", help="do not record the run in the database")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def _prepare_out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigValidationError("output directory is not writable", path=str(path), reason=str(exc)) from exc
    return path


def run(
    command: str,
    config_path: Path,
    overrides: Sequence[str] = (),
    *,
    out_dir: Optional[Path] = None,
    ledger: bool = True,
    threads: Optional[int] = None,
) -> int:
    """Execute one command; returns the exit status (0, 2 or 3)."""
    started = time.perf_counter()
    out_dir = Path(out_dir) if out_dir is not None else Path(settings.output.results_dir) / command
    artifacts = ArtifactSet(out_dir)
    config_bytes = b""
    status, code = "ok", EXIT_OK
    try:
        config = RunConfig.from_file(config_path, overrides)
        config_bytes = config.raw_bytes
        _prepare_out_dir(out_dir)
        solver = PeriodicSolver(config.problem, integrator=config.integrator, shooting=config.shooting)
        ctx = RunContext(config, solver, artifacts, threads or settings.compute.threads)
        HANDLERS[command](ctx)
    except MinkowskiLabError as exc:
        status, code = type(exc).__name__, exc.exit_code
        logger.error("%s failed: %s", command, exc)
        diagnostic = exc.to_dict()
        if isinstance(exc, VerificationFailed) and exc.record is not None:
            diagnostic["record"] = exc.record.as_dict()
        try:
            write_json(diagnostic, _prepare_out_dir(out_dir) / "diagnostic.json")
        except (OSError, MinkowskiLabError) as write_error:
            logger.error("could not write diagnostic: %s", write_error)
    wall_time = time.perf_counter() - started
    if out_dir.is_dir():
        artifacts.manifest(
            command=command,
            config_path=Path(config_path),
            config_bytes=config_bytes,
            wall_time_s=wall_time,
            status=status,
            overrides=overrides,
        )
    if ledger:
        record_run_best_effort(
            settings.database,
            command=command,
            config_sha256=config_digest(config_bytes),
            status=status,
            exit_code=code,
            wall_time_s=wall_time,
            output_dir=out_dir,
            artifacts=artifacts.entries,
        )
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(args.command, args.config, args.overrides, out_dir=args.out, ledger=not args.no_ledger)


if __name__ == "__main__":  # pragma: no cover - CLI dispatch
    sys.exit(main())
