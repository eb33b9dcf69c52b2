from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timezone
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import aiosqlite

from settings import LedgerConfig

logger = logging.getLogger(__name__)

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    run_id INTEGER PRIMARY KEY AUTOINCREMENT,
    experiment TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    seed INTEGER NOT NULL DEFAULT 0,
    profile TEXT NOT NULL DEFAULT 'standard',
    exit_code INTEGER NOT NULL,
    summary_json TEXT NOT NULL DEFAULT '{}',
    output_dir TEXT,
    created_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_runs_experiment ON runs(experiment, run_id);
"""


class LedgerBackend(ABC):
    """Abstract storage for run records."""

    @abstractmethod
    async def connect(self) -> bool:
        ...

    @abstractmethod
    async def disconnect(self) -> None:
        ...

    @abstractmethod
    async def execute(self, query: str, *args) -> Any:
        ...

    @abstractmethod
    async def fetch(self, query: str, *args) -> List[Dict]:
        ...

    @abstractmethod
    async def init_schema(self) -> None:
        ...

    @property
    @abstractmethod
    def is_connected(self) -> bool:
        ...

    @property
    @abstractmethod
    def backend_name(self) -> str:
        ...


class SQLiteBackend(LedgerBackend):
    """Run records in a local SQLite file through aiosqlite."""

    def __init__(self, db_path: Path | str):
        self.db_path = str(db_path)
        self.conn: Optional[aiosqlite.Connection] = None

    @property
    def is_connected(self) -> bool:
        return self.conn is not None

    @property
    def backend_name(self) -> str:
        return "SQLite (Local)"

    @property
    def in_memory(self) -> bool:
        return self.db_path == ":memory:"

    async def connect(self) -> bool:
        try:
            if not self.in_memory:
                Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
            self.conn = await aiosqlite.connect(self.db_path, timeout=30.0)
            self.conn.row_factory = aiosqlite.Row
            if not self.in_memory:
                await self.conn.execute("PRAGMA journal_mode=WAL")
            await self.conn.execute("PRAGMA busy_timeout = 30000")
            await self.conn.commit()
            return True
        except Exception as exc:
            logger.warning("ledger connection failed: %s", exc)
            self.conn = None
            return False

    async def disconnect(self) -> None:
        if self.conn:
            await self.conn.close()
            self.conn = None

    async def execute(self, query: str, *args) -> int:
        if not self.conn:
            raise RuntimeError("ledger not connected")
        cursor = await self.conn.execute(query, args)
        await self.conn.commit()
        return cursor.lastrowid

    async def fetch(self, query: str, *args) -> List[Dict]:
        if not self.conn:
            raise RuntimeError("ledger not connected")
        async with self.conn.execute(query, args) as cursor:
            rows = await cursor.fetchall()
            return [dict(row) for row in rows]

    async def init_schema(self) -> None:
        if not self.conn:
            raise RuntimeError("ledger not connected")
        await self.conn.executescript(SCHEMA)
        await self.conn.commit()


def config_hash(config: Dict[str, Any]) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunRecord:
    experiment: str
    config_hash: str
    seed: int
    profile: str
    exit_code: int
    summary: Dict[str, Any]
    output_dir: str = ""
    run_id: Optional[int] = None
    created_at: str = ""

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "RunRecord":
        return cls(
            experiment=row["experiment"],
            config_hash=row["config_hash"],
            seed=int(row["seed"]),
            profile=row["profile"],
            exit_code=int(row["exit_code"]),
            summary=json.loads(row["summary_json"] or "{}"),
            output_dir=row.get("output_dir") or "",
            run_id=int(row["run_id"]),
            created_at=row["created_at"],
        )


class RunLedger:
    """Records every CLI run; failures to record are logged, never raised."""

    def __init__(self, config: LedgerConfig):
        self.config = config
        self.backend: Optional[LedgerBackend] = None

    @property
    def is_connected(self) -> bool:
        return self.backend is not None and self.backend.is_connected

    @property
    def backend_name(self) -> str:
        return self.backend.backend_name if self.backend else "Not connected"

    async def connect(self) -> bool:
        if not self.config.is_configured:
            logger.info("run ledger disabled")
            return False
        backend = SQLiteBackend(self.config.path)
        if await backend.connect():
            await backend.init_schema()
            self.backend = backend
            logger.debug("connected to %s at %s", backend.backend_name, self.config.path)
            return True
        return False

    async def disconnect(self) -> None:
        if self.backend:
            await self.backend.disconnect()
            self.backend = None

    async def record_run(self, record: RunRecord) -> Optional[int]:
        if not self.is_connected:
            return None
        created = record.created_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
        try:
            return await self.backend.execute(
                "INSERT INTO runs (experiment, config_hash, seed, profile, exit_code, summary_json, "
                "output_dir, created_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                record.experiment, record.config_hash, record.seed, record.profile, record.exit_code,
                json.dumps(record.summary, sort_keys=True), record.output_dir, created,
            )
        except Exception as exc:
            logger.warning("could not record run: %s", exc)
            return None

    async def recent_runs(self, experiment: Optional[str] = None, limit: int = 10) -> List[RunRecord]:
        if not self.is_connected:
            return []
        if experiment:
            rows = await self.backend.fetch(
                "SELECT * FROM runs WHERE experiment = ? ORDER BY run_id DESC LIMIT ?", experiment, limit
            )
        else:
            rows = await self.backend.fetch("SELECT * FROM runs ORDER BY run_id DESC LIMIT ?", limit)
        return [RunRecord.from_row(row) for row in rows]

    async def experiment_counts(self) -> Dict[str, int]:
        if not self.is_connected:
            return {}
        rows = await self.backend.fetch(
            "SELECT experiment, COUNT(*) AS runs FROM runs GROUP BY experiment ORDER BY experiment"
        )
        return {row["experiment"]: int(row["runs"]) for row in rows}


# Global instance (initialized in main.py)
ledger: Optional[RunLedger] = None
