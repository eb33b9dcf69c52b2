from __future__ import annotations
from typing import List, Optional

import database
from async_helper import run_async
from database import RunRecord
from systems.reporting import format_float

STATUS = {0: "ok", 1: "checks failed", 2: "inadmissible", 3: "numerical failure"}


def fetch_history(experiment: Optional[str] = None, limit: int = 10) -> List[RunRecord]:
    """Recent runs from the ledger; empty when the ledger is unavailable."""
    ledger = database.ledger
    if not ledger or not ledger.is_connected:
        return []
    try:
        return run_async(ledger.recent_runs(experiment, limit))
    except Exception as e:
        print(f"Error fetching run history: {e}")
        return []


def _headline(record: RunRecord) -> str:
    summary = record.summary
    for key in ("theta_max", "final_residual", "ratio_last", "final_displayed", "checks_passed", "reducible",
                "final_l2", "error"):
        if key in summary:
            value = summary[key]
            return f"{key}={format_float(value) if isinstance(value, float) else value}"
    return ""


class HistoryView:
    """Text table of recent runs, one line per run."""

    COLUMNS = ("run", "experiment", "profile", "status", "config", "when", "summary")

    def __init__(self, experiment: Optional[str] = None, limit: int = 10):
        self.experiment = experiment
        self.limit = limit
        self.records: List[RunRecord] = []

    def refresh(self) -> None:
        self.records = fetch_history(self.experiment, self.limit)

    def lines(self) -> List[str]:
        if not self.records:
            return ["No runs recorded yet."]
        rows = [self.COLUMNS] + [
            (
                str(r.run_id),
                r.experiment,
                r.profile,
                STATUS.get(r.exit_code, str(r.exit_code)),
                r.config_hash[:8],
                r.created_at,
                _headline(r),
            )
            for r in self.records
        ]
        widths = [max(len(row[i]) for row in rows) for i in range(len(self.COLUMNS))]
        out = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        out.insert(1, "-" * len(out[0]))
        return out

    def render(self) -> str:
        self.refresh()
        return "\n".join(self.lines())
