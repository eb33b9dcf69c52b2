"""Declarative experiment descriptions read from JSON files."""
from __future__ import annotations
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from systems.errors import ConfigError
from systems.kernel_lab import MemoryKernel, parse_kernel
from systems.profiles import PROFILE_NAMES

EXPERIMENTS = ("simulate", "verify", "control", "obstruction", "zset", "exampleA2", "validate")


def _reject_unknown(section: str, payload: Dict[str, Any], allowed) -> None:
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


@dataclass
class KernelsConfig:
    K: str = "delta"
    N: str = "0"

    KEYS = ("K", "N")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "KernelsConfig":
        _reject_unknown("kernels", payload, cls.KEYS)
        return cls(str(payload.get("K", "delta")), str(payload.get("N", "0")))

    def to_dict(self) -> Dict[str, Any]:
        return {"K": self.K, "N": self.N}

    def parse(self) -> Tuple[MemoryKernel, MemoryKernel]:
        return parse_kernel(self.K, "K"), parse_kernel(self.N, "N")


@dataclass
class DomainConfig:
    L: float = math.pi
    n_max: Optional[int] = None

    KEYS = ("L", "n_max")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DomainConfig":
        _reject_unknown("domain", payload, cls.KEYS)
        n_max = payload.get("n_max")
        length = float(payload.get("L", math.pi))
        if length <= 0.0:
            raise ConfigError(f"domain length must be positive, got {length}")
        if n_max is not None and int(n_max) < 1:
            raise ConfigError(f"n_max must be positive, got {n_max}")
        return cls(length, None if n_max is None else int(n_max))

    def to_dict(self) -> Dict[str, Any]:
        return {"L": self.L, "n_max": self.n_max}


@dataclass
class OutputConfig:
    dir: Optional[str] = None
    report: str = "report.json"
    data: str = "data.csv"

    KEYS = ("dir", "report", "data")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "OutputConfig":
        _reject_unknown("output", payload, cls.KEYS)
        return cls(payload.get("dir"), payload.get("report", "report.json"), payload.get("data", "data.csv"))

    def to_dict(self) -> Dict[str, Any]:
        return {"dir": self.dir, "report": self.report, "data": self.data}


@dataclass
class ScenarioConfig:
    experiment: str
    kernels: KernelsConfig = field(default_factory=KernelsConfig)
    domain: DomainConfig = field(default_factory=DomainConfig)
    params: Dict[str, Any] = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    profile: str = "standard"

    KEYS = ("experiment", "kernels", "domain", "params", "output", "seed", "profile")

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
        if self.profile not in PROFILE_NAMES:
            raise ConfigError(f"unknown profile {self.profile!r}")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(payload, dict):
            raise ConfigError("scenario must be a JSON object")
        _reject_unknown("scenario", payload, cls.KEYS)
        if "experiment" not in payload:
            raise ConfigError("scenario needs an 'experiment' key")
        params = payload.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params must be an object")
        return cls(
            experiment=str(payload["experiment"]),
            kernels=KernelsConfig.from_dict(payload.get("kernels", {})),
            domain=DomainConfig.from_dict(payload.get("domain", {})),
            params=json.loads(json.dumps(params)),
            output=OutputConfig.from_dict(payload.get("output", {})),
            seed=int(payload.get("seed", 0)),
            profile=str(payload.get("profile", "standard")),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "kernels": self.kernels.to_dict(),
            "domain": self.domain.to_dict(),
            "params": json.loads(json.dumps(self.params)),
            "output": self.output.to_dict(),
            "seed": self.seed,
            "profile": self.profile,
        }

    @classmethod
    def load(cls, path: Path | str) -> "ScenarioConfig":
        try:
            with Path(path).open("r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except FileNotFoundError as exc:
            raise ConfigError(f"scenario file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)

    def dump(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
