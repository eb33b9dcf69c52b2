from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
import logging
import math
import os
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"

# Load environment variables from .env file
load_dotenv(BASE_DIR / ".env")

OUTPUT_DIR = Path(os.getenv("MEMHEAT_OUTPUT_DIR", str(BASE_DIR / "output")))

LOG_FORMAT = "[%(name)s] %(levelname)s: %(message)s"


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() not in ("0", "false", "no", "off")


@dataclass
class LedgerConfig:
    """Where the run ledger lives and whether runs are recorded at all."""
    path: str = os.getenv("MEMHEAT_LEDGER_PATH", str(DATA_DIR / "ledger.db"))
    enabled: bool = _env_flag("MEMHEAT_LEDGER_ENABLED", "1")

    @property
    def is_configured(self) -> bool:
        return self.enabled and bool(self.path)


@dataclass(frozen=True)
class NumericsSettings:
    """Numerical defaults shared by every experiment (see systems/profiles.py)."""
    length: float = math.pi
    n_max: int = 64
    steps_per_unit: int = 512
    # contour quadrature
    arc_radius: float = 1.0
    ray_order: int = 16
    arc_order: int = 64
    refine_levels: int = 3
    contour_tol: float = 1e-10
    # sector sampling
    sector_moduli: int = 40
    sector_fan: int = 12
    bisection_tol: float = 1e-3
    theta_a: float = math.pi / 2 - 1e-6
    # convolution / synthesis
    conv_tol: float = 1e-3
    regularization: float = 1e-10
    gram_limit: float = 1e12
    # tail studies refine to this many modes
    tail_modes: int = 256


@dataclass
class Settings:
    threads: int = int(os.getenv("MEMHEAT_THREADS", "4"))
    log_level: str = os.getenv("MEMHEAT_LOG_LEVEL", "INFO")
    profile: str = os.getenv("MEMHEAT_PROFILE", "standard")
    output_dir: Path = OUTPUT_DIR

    # Run ledger configuration
    ledger: LedgerConfig = None

    def __post_init__(self):
        if self.ledger is None:
            self.ledger = LedgerConfig()
        self.threads = max(1, int(self.threads))

    @property
    def numerics(self) -> NumericsSettings:
        # imported late: profiles depends on NumericsSettings defined above
        from systems.profiles import get_profile
        return get_profile(self.profile)


def ensure_directories(cfg: Settings | None = None) -> None:
    directories = [DATA_DIR, OUTPUT_DIR]
    if cfg is not None:
        directories.append(Path(cfg.output_dir))
        directories.append(Path(cfg.ledger.path).parent)
    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)


def configure_logging(level: str | int = "INFO") -> None:
    root = logging.getLogger()
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    if not any(getattr(h, "_memheat", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._memheat = True
        root.addHandler(handler)
    root.setLevel(level)
