"""End-to-end checks of the command-line runs and their artifacts."""
from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from src.config import RunConfig, apply_overrides, bundled_config, settings
from src.errors import ConfigValidationError
from src.pipeline import main
from src.reporting.logging import RunLedger


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def test_spectrum_run_writes_artifacts(tmp_path: Path) -> None:
    out = tmp_path / "spectrum"
    code = main(["spectrum", "--config", str(bundled_config("spectrum_constant")), "--out", str(out), "--no-ledger"])
    assert code == 0
    eigen = _read_json(out / "eigen.json")
    assert eigen["mu0"] == pytest.approx(-3.0, abs=1e-8)
    assert eigen["zeros_of_w"] == 0
    assert eigen["oracle"]["mu0"] == pytest.approx(-3.0, abs=1e-10)
    assert eigen["interlaced"] is True
    manifest = _read_json(out / "manifest.json")
    assert manifest["status"] == "ok"
    assert manifest["command"] == "spectrum"
    files = {entry["file"] for entry in manifest["artifacts"]}
    assert {"eigen.json", "eigenfunction.csv", "higher_eigenvalues.csv", "rotation_gap.csv"} <= files
    assert all((out / name).exists() for name in files)


def test_repeated_runs_are_byte_identical(tmp_path: Path) -> None:
    config = str(bundled_config("spectrum_hill"))
    for name in ("first", "second"):
        assert main(["spectrum", "--config", config, "--out", str(tmp_path / name), "--no-ledger"]) == 0
    for artifact in ("eigen.json", "eigenfunction.csv", "higher_eigenvalues.csv"):
        assert (tmp_path / "first" / artifact).read_bytes() == (tmp_path / "second" / artifact).read_bytes()
    first = _read_json(tmp_path / "first" / "manifest.json")
    second = _read_json(tmp_path / "second" / "manifest.json")
    assert first["config_sha256"] == second["config_sha256"]


def test_invalid_override_exits_with_validation_code(tmp_path: Path) -> None:
    out = tmp_path / "bad"
    code = main(
        [
            "spectrum",
            "--config",
            str(bundled_config("spectrum_constant")),
            "--set",
            "integrator.rel_tol=-1.0",
            "--out",
            str(out),
            "--no-ledger",
        ]
    )
    assert code == 2
    diagnostic = _read_json(out / "diagnostic.json")
    assert diagnostic["error"] == "ConfigValidationError"
    assert diagnostic["key"] == "integrator.rel_tol"
    assert _read_json(out / "manifest.json")["status"] == "ConfigValidationError"


def test_zero_lambda_is_a_validation_error(tmp_path: Path) -> None:
    args = ["solve", "--config", str(bundled_config("trig_weight")), "--set", "solver.lambda=0", "--out", str(tmp_path)]
    assert main([*args, "--no-ledger"]) == 2
    assert _read_json(tmp_path / "diagnostic.json")["key"] == "solver.lambda"


def test_missing_config_file(tmp_path: Path) -> None:
    code = main(["scan", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "out"), "--no-ledger"])
    assert code == 2
    assert (tmp_path / "out" / "diagnostic.json").exists()


def test_linearization_requires_lambda(tmp_path: Path) -> None:
    code = main(
        [
            "spectrum",
            "--config",
            str(bundled_config("spectrum_constant")),
            "--set",
            "spectrum.source=linearization",
            "--out",
            str(tmp_path),
            "--no-ledger",
        ]
    )
    assert code == 2
    assert _read_json(tmp_path / "diagnostic.json")["key"] == "solver.lambda"


def test_run_is_recorded_in_the_ledger(tmp_path: Path) -> None:
    original_db_url = settings.database.database_url
    db_path = (tmp_path / "runs.db").resolve()
    settings.database.database_url = f"sqlite:///{db_path.as_posix()}"
    try:
        code = main(["spectrum", "--config", str(bundled_config("spectrum_constant")), "--out", str(tmp_path / "out")])
        ledger = RunLedger(settings.database)
        runs = ledger.recent_runs()
        artifacts = ledger.artifacts(int(runs["id"].iloc[0]))
    finally:
        settings.database.database_url = original_db_url
    assert code == 0
    assert len(runs) == 1
    assert runs["command"].iloc[0] == "spectrum"
    assert runs["exit_code"].iloc[0] == 0
    assert "eigen" in set(artifacts["name"])


def test_overrides_parse_yaml_scalars() -> None:
    document = {"solver": {"lambda": 2.0}}
    updated = apply_overrides(document, ["solver.lambda=50", "solver.window.r_max=4.5", "spectrum.gap_csv=true"])
    assert updated["solver"]["lambda"] == 50
    assert updated["solver"]["window"] == {"r_max": 4.5}
    assert updated["spectrum"]["gap_csv"] is True
    assert document == {"solver": {"lambda": 2.0}}
    with pytest.raises(ConfigValidationError):
        apply_overrides(document, ["solver.lambda"])


def test_bundled_configurations_parse() -> None:
    trig = RunConfig.from_file(bundled_config("trig_weight"))
    assert trig.problem.period == pytest.approx(2 * math.pi)
    assert trig.require_lambda() == 2.0
    assert len(trig.scan().grid) == 120
    assert trig.branch().direction == -1.0
    step = RunConfig.from_file(bundled_config("step_weight"))
    assert step.problem.weight.is_piecewise
    assert step.asymptotic().branch == "large"
    asym = RunConfig.from_file(bundled_config("trig_asymptotic"))
    assert asym.shooting.segments == 8
    assert asym.asymptotic().schedule[-1] == 1e5


def test_module_paths_point_at_shipped_directories() -> None:
    import src.config as config_module

    assert config_module.CONFIGS_DIR.is_dir()
    assert bundled_config("step_weight").is_file()
    assert not hasattr(config_module, "DATA_DIR")


def test_unknown_choice_is_rejected() -> None:
    document = {"problem": {"weight": {"kind": "gaussian"}, "nonlinearity": {"exponent_p": 3}}}
    with pytest.raises(ConfigValidationError):
        RunConfig.from_document(document)


@pytest.mark.slow
def test_solve_run_reports_two_orbits(tmp_path: Path) -> None:
    code = main(["solve", "--config", str(bundled_config("trig_weight")), "--out", str(tmp_path), "--no-ledger"])
    assert code == 0
    summary = _read_json(tmp_path / "summary.json")
    assert len(summary["orbits"]) >= 2
    assert summary["average_map_degree"] == -1
    assert summary["conditions"]["mean_negative"] is True
    for entry in summary["orbits"]:
        assert (tmp_path / entry["file"]).exists()
        assert entry["verification"]["passed"] == [True] * 5


@pytest.mark.slow
def test_numerical_failure_exits_with_code_three(tmp_path: Path) -> None:
    code = main(
        [
            "branch",
            "--config",
            str(bundled_config("trig_branch")),
            "--set",
            "solver.lambda=0.05",
            "--out",
            str(tmp_path),
            "--no-ledger",
        ]
    )
    assert code == 3
    assert _read_json(tmp_path / "diagnostic.json")["error"] == "NotFound"
