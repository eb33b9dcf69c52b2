from __future__ import annotations
from dataclasses import asdict, dataclass, field, is_dataclass
import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class CheckTable:
    # Collects oracle checks for the validate report and the console table
    title: str = "Oracle checks"
    checks: List[CheckResult] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> CheckResult:
        result = CheckResult(name, bool(passed), detail)
        self.checks.append(result)
        return result

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_display_lines(self) -> list[str]:
        width = max((len(c.name) for c in self.checks), default=10)
        lines = [self.title, "-" * (width + 12)]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            suffix = f"  {c.detail}" if c.detail else ""
            lines.append(f"{c.name.ljust(width)}  {mark}{suffix}")
        passed = sum(c.passed for c in self.checks)
        lines.append(f"{passed}/{len(self.checks)} checks passed")
        return lines

    def to_dict(self) -> dict:
        return {"title": self.title, "all_passed": self.all_passed,
                "checks": [asdict(c) for c in self.checks]}


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for numpy scalars/arrays, complex numbers and dataclasses."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(to_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def format_float(value: float, digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and (math.isnan(value) or math.isinf(value)):
        return str(value)
    return f"{value:.{digits}g}"
