"""Persistence of experiment runs (the run ledger)."""
from __future__ import annotations

from datetime import datetime, timezone
import logging
from pathlib import Path
from typing import Iterable, Optional, Tuple

import pandas as pd
from sqlalchemy import (
    Column,
    Float,
    ForeignKey,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    select,
)
from sqlalchemy.engine import Engine, make_url

from src.config import BASE_DIR, DatabaseSettings

UTC = timezone.utc

logger = logging.getLogger(__name__)


def create_db_engine(database_url: str) -> Engine:
    """Engine for the ledger; relative SQLite files live under the repository root."""
    url = make_url(database_url)
    if url.get_backend_name() == "sqlite" and url.database not in (None, "", ":memory:"):
        db_file = Path(url.database)
        db_file = db_file if db_file.is_absolute() else BASE_DIR / db_file
        db_file.parent.mkdir(parents=True, exist_ok=True)
        url = url.set(database=str(db_file))
    return create_engine(url, future=True)


metadata = MetaData()


experiment_runs_table = Table(
    "experiment_runs",
    metadata,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("timestamp", String, nullable=False),
    Column("command", String, nullable=False),
    Column("config_sha256", String, nullable=False),
    Column("status", String, nullable=False),
    Column("exit_code", Integer, nullable=False),
    Column("wall_time_s", Float, nullable=False),
    Column("output_dir", String, nullable=False),
)


experiment_artifacts_table = Table(
    "experiment_artifacts",
    metadata,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("run_id", Integer, ForeignKey("experiment_runs.id", ondelete="CASCADE"), nullable=False),
    Column("name", String, nullable=False),
    Column("kind", String, nullable=False),
    Column("path", String, nullable=False),
)


class RunLedger:
    """Database interface for the history of CLI runs."""

    def __init__(self, database_settings: DatabaseSettings) -> None:
        self.database_url = database_settings.database_url
        self.engine = create_db_engine(self.database_url)
        metadata.create_all(self.engine)

    def record_run(
        self,
        *,
        command: str,
        config_sha256: str,
        status: str,
        exit_code: int,
        wall_time_s: float,
        output_dir: Path,
        artifacts: Iterable[Tuple[str, str, Path]] = (),
    ) -> int:
        with self.engine.begin() as connection:
            inserted = connection.execute(
                experiment_runs_table.insert().returning(experiment_runs_table.c.id),
                {
                    "timestamp": datetime.now(UTC).isoformat(),
                    "command": command,
                    "config_sha256": config_sha256,
                    "status": status,
                    "exit_code": exit_code,
                    "wall_time_s": wall_time_s,
                    "output_dir": str(output_dir),
                },
            )
            run_id = inserted.scalar_one()
            payload = [
                {"run_id": run_id, "name": name, "kind": kind, "path": str(path)} for name, kind, path in artifacts
            ]
            if payload:
                connection.execute(experiment_artifacts_table.insert(), payload)
        return run_id

    def recent_runs(self, limit: int = 50) -> pd.DataFrame:
        query = (
            select(experiment_runs_table)
            .order_by(experiment_runs_table.c.id.desc())
            .limit(limit)
        )
        frame = pd.read_sql(query, self.engine)
        if not frame.empty:
            frame["timestamp"] = pd.to_datetime(frame["timestamp"])
        return frame

    def artifacts(self, run_id: int) -> pd.DataFrame:
        query = (
            select(experiment_artifacts_table.c.name, experiment_artifacts_table.c.kind, experiment_artifacts_table.c.path)
            .where(experiment_artifacts_table.c.run_id == run_id)
            .order_by(experiment_artifacts_table.c.id)
        )
        return pd.read_sql(query, self.engine)


def record_run_best_effort(ledger_settings: Optional[DatabaseSettings], **fields) -> Optional[int]:
    """Append to the ledger; failures are logged and never affect the run."""
    if ledger_settings is None:
        return None
    try:
        return RunLedger(ledger_settings).record_run(**fields)
    except Exception as exc:  # pragma: no cover - best effort persistence
        logger.warning("run ledger skipped: %s", exc)
        return None
