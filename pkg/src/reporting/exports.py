"""Deterministic CSV/JSON artifacts and the per-run manifest.

Every file is written to a temporary sibling and renamed into place, so a
failed run never leaves a half-written artifact behind.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src import __version__


def json_ready(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [json_ready(value.real), json_ready(value.imag)]
    if isinstance(value, Path):
        return value.as_posix()
    return value


def _atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, path)
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """CSV with LF endings and Python's shortest round-trip float repr."""
    return _atomic_write(Path(path), frame.to_csv(index=False, lineterminator="\n"))


def write_json(payload: Any, path: Path) -> Path:
    text = json.dumps(json_ready(payload), indent=2, sort_keys=True, allow_nan=False)
    return _atomic_write(Path(path), text + "\n")


def config_digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


@dataclass
class ArtifactSet:
    """Files written by one run, in write order."""

    out_dir: Path
    entries: List[Tuple[str, str, Path]] = field(default_factory=list)

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = write_csv(frame, self.out_dir / f"{name}.csv")
        self.entries.append((name, "csv", path))
        return path

    def json(self, name: str, payload: Any) -> Path:
        path = write_json(payload, self.out_dir / f"{name}.json")
        self.entries.append((name, "json", path))
        return path

    def manifest(
        self,
        *,
        command: str,
        config_path: Path,
        config_bytes: bytes,
        wall_time_s: float,
        status: str,
        overrides: Sequence[str] = (),
    ) -> Path:
        """manifest.json; the only artifact whose content depends on the run (wall time)."""
        payload = {
            "command": command,
            "config_path": Path(config_path).as_posix(),
            "config_sha256": config_digest(config_bytes),
            "overrides": list(overrides),
            "version": __version__,
            "wall_time_s": wall_time_s,
            "status": status,
            "artifacts": [{"name": name, "kind": kind, "file": path.name} for name, kind, path in self.entries],
        }
        return write_json(payload, self.out_dir / "manifest.json")
