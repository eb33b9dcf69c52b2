from __future__ import annotations
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

import database  # Import module to access the ledger dynamically
from async_helper import run_async
from database import RunRecord, config_hash
from scenario import ScenarioConfig
from settings import NumericsSettings, Settings
from systems.errors import EXIT_OK, ConfigError
from systems.kernel_lab import MemoryKernel, SectorGrid, format_kernel
from systems.laplace_contour import ContourSpec, spec_from_numerics
from systems.profiles import get_profile
from systems.reporting import write_csv, write_json
from systems.spectral_domain import EigenBasis

logger = logging.getLogger(__name__)


@dataclass
class ExperimentOutcome:
    exit_code: int = EXIT_OK
    summary: Dict[str, Any] = field(default_factory=dict)
    lines: List[str] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)


class BaseExperiment:
    name: str = "base"
    # Parameter defaults; keys outside this dict are rejected.
    PARAMS: Dict[str, Any] = {}

    def __init__(self, config: ScenarioConfig, cfg: Settings, out_dir: Path):
        self.config = config
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.numerics: NumericsSettings = get_profile(config.profile)
        self.params = self._resolve_params(config.params)
        self.rng = np.random.default_rng(config.seed)
        self.files: List[Path] = []
        n_max = config.domain.n_max or self.numerics.n_max
        self.basis = EigenBasis(config.domain.L, n_max)
        self._kernels: Optional[Tuple[MemoryKernel, MemoryKernel]] = None

    def _resolve_params(self, given: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(given) - set(self.PARAMS))
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.name}: {', '.join(unknown)}")
        params = dict(self.PARAMS)
        params.update(given)
        return params

    @property
    def kernels(self) -> Tuple[MemoryKernel, MemoryKernel]:
        if self._kernels is None:
            self._kernels = self.config.kernels.parse()
        return self._kernels

    def contour(self) -> ContourSpec:
        k, n = self.kernels
        return spec_from_numerics(k, n, self.numerics)

    def sector_grid(self) -> SectorGrid:
        return SectorGrid(moduli=self.numerics.sector_moduli, fan=self.numerics.sector_fan,
                          tol=self.numerics.bisection_tol)

    def kernel_labels(self) -> Dict[str, str]:
        k, n = self.kernels
        return {"K": format_kernel(k), "N": format_kernel(n)}

    # -- outputs ---------------------------------------------------------
    def write_report(self, payload: Dict[str, Any]) -> Path:
        report = {"experiment": self.name, "kernels": self.kernel_labels(), "profile": self.config.profile}
        report.update(payload)
        path = write_json(self.out_dir / self.config.output.report, report)
        self.files.append(path)
        return path

    def write_data(self, header: Sequence[str], rows, name: Optional[str] = None) -> Path:
        path = write_csv(self.out_dir / (name or self.config.output.data), header, rows)
        self.files.append(path)
        return path

    def run(self) -> ExperimentOutcome:
        raise NotImplementedError

    def record(self, outcome: ExperimentOutcome) -> Optional[int]:
        """Append this run to the ledger. Call once the run has finished."""
        record = RunRecord(
            experiment=self.name,
            config_hash=config_hash(self.config.to_dict()),
            seed=self.config.seed,
            profile=self.config.profile,
            exit_code=outcome.exit_code,
            summary=outcome.summary,
            output_dir=str(self.out_dir),
        )
        return record_run(record)


EXPERIMENT_REGISTRY: Dict[str, Type[BaseExperiment]] = {}


def register_experiment(key: str) -> Callable[[Type[BaseExperiment]], Type[BaseExperiment]]:
    def wrapper(cls: Type[BaseExperiment]) -> Type[BaseExperiment]:
        EXPERIMENT_REGISTRY[key] = cls
        cls.name = key
        return cls
    return wrapper


def create_experiment(config: ScenarioConfig, cfg: Settings, out_dir: Path) -> BaseExperiment:
    try:
        cls = EXPERIMENT_REGISTRY[config.experiment]
    except KeyError as exc:
        raise ConfigError(f"no experiment registered as {config.experiment!r}") from exc
    return cls(config, cfg, out_dir)


def record_run(record: RunRecord) -> Optional[int]:
    """
    Save a run to the ledger.
    Returns the new run id, or None when the ledger is off or the write failed.
    """
    # Access the ledger through the module to get the current reference
    ledger = database.ledger
    if not ledger or not ledger.is_connected:
        logger.debug("ledger not connected - run not recorded")
        return None
    try:
        run_id = run_async(ledger.record_run(record))
        if run_id is not None:
            print(f"📒 Run #{run_id} recorded ({record.experiment}, config {record.config_hash[:8]})")
        return run_id
    except Exception as e:
        logger.warning("failed to record run: %s", e)
        return None


# Auto-import experiment modules to populate the registry on package import.
from . import simulate  # noqa: F401,E402
from . import verify  # noqa: F401,E402
from . import control  # noqa: F401,E402
from . import obstruction  # noqa: F401,E402
from . import zset  # noqa: F401,E402
from . import blowup  # noqa: F401,E402
from . import validate  # noqa: F401,E402
