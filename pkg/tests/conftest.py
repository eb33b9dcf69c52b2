import math
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from settings import LedgerConfig, Settings  # noqa: E402
from systems.kernel_lab import MemoryKernel  # noqa: E402
from systems.spectral_domain import EigenBasis  # noqa: E402


@pytest.fixture
def heat():
    return MemoryKernel.delta(), MemoryKernel.zero()


@pytest.fixture
def fractional():
    """Caputo derivative of order 1/2: λK̂ = λ^{1/2}, N = 0."""
    return MemoryKernel.power_law(0.5, "K"), MemoryKernel.zero()


@pytest.fixture
def exp_memory():
    return MemoryKernel.delta(), MemoryKernel.exp_sum([(1.0, 1.0)])


@pytest.fixture
def basis():
    return EigenBasis(math.pi, 16)


@pytest.fixture
def lab_settings(tmp_path):
    return Settings(threads=2, output_dir=tmp_path / "output",
                    ledger=LedgerConfig(path=str(tmp_path / "ledger.db"), enabled=False))
