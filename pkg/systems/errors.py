"""Exception hierarchy of the lab; every error knows the CLI exit code it maps to."""
from __future__ import annotations

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INADMISSIBLE = 2
EXIT_NUMERICAL = 3


class LabError(Exception):
    exit_code: int = EXIT_NUMERICAL


class KernelDomainError(LabError, ValueError):
    """Invalid kernel parameters, or a Laplace argument at 0 / on the negative axis."""


class JVanishingError(LabError, ZeroDivisionError):
    """J(λ) = 1 + N̂(λ) vanished inside the sector."""
    exit_code = EXIT_INADMISSIBLE


class AdmissibilityError(LabError):
    exit_code = EXIT_INADMISSIBLE

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ContourSpecError(LabError, ValueError):
    pass


class ContourConvergenceError(LabError):
    def __init__(self, message: str, est_error: float = float("nan")):
        super().__init__(message)
        self.est_error = est_error


class InvalidTimeError(LabError, ValueError):
    pass


class GridResolutionError(LabError, ValueError):
    pass


class EnvelopeError(LabError, ValueError):
    """Mittag-Leffler argument outside the evaluation envelope."""


class GeometryError(LabError, ValueError):
    pass


class RegularizationRequiredError(LabError):
    def __init__(self, message: str, gram_condition: float):
        super().__init__(message)
        self.gram_condition = gram_condition


class ResolventStepError(LabError):
    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (grid index {index})")
        self.index = index


class ConfigError(LabError, ValueError):
    pass
