"""
Memory kernels of the form K = k0·δ + singular part, their Laplace symbols,
sector admissibility, resolvents and the product-integration engine every
time convolution in the lab goes through.
"""
from __future__ import annotations
from dataclasses import dataclass, field
import logging
import math
import re
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.linalg import expm
from scipy.special import rgamma

from systems.errors import (
    ConfigError,
    GridResolutionError,
    JVanishingError,
    KernelDomainError,
    ResolventStepError,
)

logger = logging.getLogger(__name__)

KernelRole = Literal["K", "N"]

J_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# Kernel types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PowerLaw:
    """
    Weakly singular power kernel.

    role "K": scale·t^(-p)/Γ(1-p), transform scale·λ^(p-1)
    role "N": scale·t^(p-1)/Γ(p),  transform scale·λ^(-p)
    """
    exponent: float
    scale: float = 1.0
    role: KernelRole = "K"

    def __post_init__(self):
        if not (0.0 < self.exponent < 1.0):
            raise KernelDomainError(f"power-law exponent must lie in (0, 1), got {self.exponent}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise KernelDomainError(f"power-law scale must be positive, got {self.scale}")
        if self.role not in ("K", "N"):
            raise KernelDomainError(f"unknown power-law role {self.role!r}")

    @property
    def order(self) -> float:
        """β with kernel scale·t^(β-1)/Γ(β) and transform scale·λ^(-β)."""
        return 1.0 - self.exponent if self.role == "K" else self.exponent


@dataclass(frozen=True)
class ExpSum:
    """Σ a_j e^(-b_j t) with a_j ≥ 0, b_j > 0."""
    terms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(a), float(b)) for a, b in self.terms)
        if not terms:
            raise KernelDomainError("exponential sum needs at least one term")
        for a, b in terms:
            if a < 0.0 or not math.isfinite(a):
                raise KernelDomainError(f"exponential weight must be non-negative, got {a}")
            if b <= 0.0 or not math.isfinite(b):
                raise KernelDomainError(f"exponential rate must be positive, got {b}")
        object.__setattr__(self, "terms", terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms])

    @property
    def rates(self) -> np.ndarray:
        return np.array([b for _, b in self.terms])


@dataclass(frozen=True)
class Zero:
    pass


SingularPart = Union[PowerLaw, ExpSum, Zero]


def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - e^-x)/x, stable at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-5
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-safe) / safe)


def _phi2(x: np.ndarray) -> np.ndarray:
    """(x - 1 + e^-x)/x², stable at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    series = 0.5 - x / 6.0 + x * x / 24.0 - x ** 3 / 120.0
    return np.where(small, series, (safe + np.expm1(-safe)) / (safe * safe))


@dataclass(frozen=True)
class MemoryKernel:
    delta_weight: float = 0.0
    singular_part: SingularPart = field(default_factory=Zero)

    def __post_init__(self):
        if not (self.delta_weight >= 0.0 and math.isfinite(self.delta_weight)):
            raise KernelDomainError(f"delta weight must be finite and non-negative, got {self.delta_weight}")

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls) -> "MemoryKernel":
        return cls(0.0, Zero())

    @classmethod
    def delta(cls, weight: float = 1.0) -> "MemoryKernel":
        return cls(weight, Zero())

    @classmethod
    def power_law(cls, exponent: float, role: KernelRole = "K", scale: float = 1.0,
                  delta_weight: float = 0.0) -> "MemoryKernel":
        return cls(delta_weight, PowerLaw(exponent, scale, role))

    @classmethod
    def exp_sum(cls, terms: Sequence[Tuple[float, float]], delta_weight: float = 0.0) -> "MemoryKernel":
        return cls(delta_weight, ExpSum(tuple(terms)))

    @classmethod
    def reducible(cls, n: "MemoryKernel", c: float) -> "MemoryKernel":
        """K = c(δ + N), the pair for which K̂/J is the constant c."""
        if c <= 0.0:
            raise KernelDomainError("reducibility constant must be positive")
        if n.delta_weight:
            raise KernelDomainError("N must not carry a delta part")
        part = n.singular_part
        if isinstance(part, PowerLaw):
            part = PowerLaw(part.exponent, part.scale * c, part.role)
        elif isinstance(part, ExpSum):
            part = ExpSum(tuple((a * c, b) for a, b in part.terms))
        return cls(c, part)

    # -- properties --------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.delta_weight == 0.0 and isinstance(self.singular_part, Zero)

    @property
    def is_pure_delta(self) -> bool:
        return self.delta_weight > 0.0 and isinstance(self.singular_part, Zero)

    # -- time domain -------------------------------------------------------
    def regular(self, t) -> np.ndarray:
        """Values of the non-delta part at t > 0."""
        t = np.asarray(t, dtype=float)
        part = self.singular_part
        if isinstance(part, PowerLaw):
            with np.errstate(divide="ignore"):
                return part.scale * np.power(t, part.order - 1.0) * rgamma(part.order)
        if isinstance(part, ExpSum):
            return sum(a * np.exp(-b * t) for a, b in part.terms)
        return np.zeros_like(t)

    def antiderivative(self, t, times: int = 1) -> np.ndarray:
        """First (times=1) or second (times=2) antiderivative of the regular part, zero at 0."""
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        part = self.singular_part
        if isinstance(part, PowerLaw):
            beta = part.order + times
            return part.scale * np.power(t, beta - 1.0) * rgamma(beta)
        if isinstance(part, ExpSum):
            phi = _phi1 if times == 1 else _phi2
            return sum(a * np.power(t, times) * phi(b * t) for a, b in part.terms)
        return np.zeros_like(t)

    def transform(self, lam):
        return laplace_transform(self, lam)

    def __str__(self) -> str:
        return format_kernel(self)


# ---------------------------------------------------------------------------
# Text form:  "delta", "0", "2*delta + powerlaw(0.5, K)", "expsum(1:1, 0.5:2)"
# ---------------------------------------------------------------------------
_POWER_RE = re.compile(
    r"^(?:(?P<scale>[0-9.eE+-]+)\s*\*\s*)?powerlaw\(\s*(?P<p>[0-9.eE+-]+)\s*(?:,\s*(?P<role>[KN]))?(?:\s*,\s*scale\s*=\s*(?P<kwscale>[0-9.eE+-]+))?\s*\)$"
)
_DELTA_RE = re.compile(r"^(?:(?P<w>[0-9.eE+-]+)\s*\*\s*)?delta$")
_EXP_RE = re.compile(r"^expsum\((?P<body>[^)]*)\)$")
_TERM_SPLIT = re.compile(r"(?<![eE])\+")


def parse_kernel(text: str, role: KernelRole = "K") -> MemoryKernel:
    """Parse the textual kernel form used by scenario files."""
    source = text.strip()
    if source in ("", "0", "zero"):
        return MemoryKernel.zero()
    weight = 0.0
    part: SingularPart = Zero()
    for token in (tok.strip() for tok in _TERM_SPLIT.split(source)):
        if (match := _DELTA_RE.match(token)):
            weight += float(match.group("w") or 1.0)
        elif (match := _POWER_RE.match(token)):
            if not isinstance(part, Zero):
                raise ConfigError(f"more than one singular part in {text!r}")
            part = PowerLaw(float(match.group("p")), float(match.group("kwscale") or match.group("scale") or 1.0),
                            match.group("role") or role)
        elif (match := _EXP_RE.match(token)):
            if not isinstance(part, Zero):
                raise ConfigError(f"more than one singular part in {text!r}")
            pairs = []
            for item in match.group("body").split(","):
                try:
                    a, b = item.split(":")
                    pairs.append((float(a), float(b)))
                except ValueError as exc:
                    raise ConfigError(f"bad exponential term {item!r} in {text!r}") from exc
            part = ExpSum(tuple(pairs))
        else:
            raise ConfigError(f"cannot parse kernel term {token!r}")
    return MemoryKernel(weight, part)


def format_kernel(kernel: MemoryKernel) -> str:
    pieces: List[str] = []
    if kernel.delta_weight:
        pieces.append("delta" if kernel.delta_weight == 1.0 else f"{kernel.delta_weight!r}*delta")
    part = kernel.singular_part
    if isinstance(part, PowerLaw):
        prefix = "" if part.scale == 1.0 else f"{part.scale!r}*"
        pieces.append(f"{prefix}powerlaw({part.exponent!r}, {part.role})")
    elif isinstance(part, ExpSum):
        pieces.append("expsum(" + ", ".join(f"{a!r}:{b!r}" for a, b in part.terms) + ")")
    return " + ".join(pieces) if pieces else "0"


# ---------------------------------------------------------------------------
# Laplace symbols
# ---------------------------------------------------------------------------
def _check_lambda(lam: np.ndarray) -> None:
    bad = (lam == 0) | ((lam.imag == 0) & (lam.real < 0))
    if np.any(bad):
        raise KernelDomainError(f"Laplace argument outside the slit plane: {lam[bad][0]}")


def laplace_transform(kernel: MemoryKernel, lam):
    """K̂(λ) on the principal branch; vectorized over λ."""
    scalar = np.isscalar(lam)
    z = np.atleast_1d(np.asarray(lam, dtype=complex))
    _check_lambda(z)
    out = np.full(z.shape, complex(kernel.delta_weight))
    part = kernel.singular_part
    if isinstance(part, PowerLaw):
        out = out + part.scale * np.power(z, -part.order)
    elif isinstance(part, ExpSum):
        for a, b in part.terms:
            out = out + a / (z + b)
    return complex(out[0]) if scalar else out


def laplace_quadrature(func: Callable[[float], float], lam: complex, t_max: float = math.inf) -> complex:
    """∫_0^t_max e^{-λt} f(t) dt by adaptive quadrature; needs Re λ > 0 for an infinite range."""
    lam = complex(lam)
    if math.isinf(t_max) and lam.real <= 0.0:
        raise KernelDomainError(f"numerical transform needs Re λ > 0, got {lam}")
    split = min(1.0, t_max)
    total = 0.0j
    for lo, hi in ((0.0, split), (split, t_max)):
        if hi <= lo:
            continue
        re, _ = quad(lambda t: math.exp(-lam.real * t) * math.cos(lam.imag * t) * func(t), lo, hi, limit=200)
        im, _ = quad(lambda t: -math.exp(-lam.real * t) * math.sin(lam.imag * t) * func(t), lo, hi, limit=200)
        total += complex(re, im)
    return total


def j_symbol(n: MemoryKernel, lam):
    return 1.0 + laplace_transform(n, lam)


def symbol_ratio(k: MemoryKernel, n: MemoryKernel, lam):
    """λK̂(λ)/J(λ)."""
    scalar = np.isscalar(lam)
    z = np.atleast_1d(np.asarray(lam, dtype=complex))
    k_hat = laplace_transform(k, z)
    j = j_symbol(n, z)
    if np.any(np.abs(j) < J_FLOOR):
        raise JVanishingError(f"J vanishes at λ = {z[np.abs(j) < J_FLOOR][0]}")
    ratio = z * k_hat / j
    return complex(ratio[0]) if scalar else ratio


def unwrapped_ratio_argument(k: MemoryKernel, n: MemoryKernel, modulus, argument) -> np.ndarray:
    """
    Continuous argument of λK̂/J along rays λ = r·e^{iφ}.

    Each factor stays in one half plane when Im λ has fixed sign, so summing the
    factor arguments follows the ratio across the negative axis.
    """
    lam = np.asarray(modulus) * np.exp(1j * np.asarray(argument))
    k_hat = laplace_transform(k, lam)
    j = j_symbol(n, lam)
    return np.asarray(argument) + np.angle(k_hat) - np.angle(j)


# ---------------------------------------------------------------------------
# Sector admissibility
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SectorGrid:
    moduli: int = 40
    min_modulus: float = 1e-6
    max_modulus: float = 1e6
    fan: int = 12
    tol: float = 1e-3

    @property
    def theta_cap(self) -> float:
        return math.pi / 2 - self.tol

    def radii(self) -> np.ndarray:
        return np.logspace(math.log10(self.min_modulus), math.log10(self.max_modulus), self.moduli)

    def angles(self, theta: float) -> np.ndarray:
        half = np.linspace(0.0, theta + math.pi / 2, self.fan)
        return np.concatenate([half, -half[1:]])

    @property
    def samples_per_sector(self) -> int:
        return self.moduli * (2 * self.fan - 1)


@dataclass
class AdmissibilityReport:
    theta_max: float
    j_nonvanishing: bool
    asymptotic_flags: Dict[str, bool]
    samples_used: int
    theta_a: float
    failures: List[Tuple[complex, str]] = field(default_factory=list)
    growth_exponent: float = float("nan")

    @property
    def admissible(self) -> bool:
        return self.j_nonvanishing and all(self.asymptotic_flags.values()) and self.theta_max > 0.0

    def to_dict(self) -> dict:
        return {
            "theta_max": self.theta_max,
            "j_nonvanishing": self.j_nonvanishing,
            "asymptotic_flags": dict(self.asymptotic_flags),
            "samples_used": self.samples_used,
            "theta_a": self.theta_a,
            "admissible": self.admissible,
            "growth_exponent": self.growth_exponent,
            "failures": [{"lambda": [lam.real, lam.imag], "reason": reason} for lam, reason in self.failures[:20]],
        }


def _log_slope(values_hi: np.ndarray, values_lo: np.ndarray) -> np.ndarray:
    """Slope of log|f| against log r over one decade."""
    with np.errstate(divide="ignore"):
        return (np.log(np.abs(values_hi)) - np.log(np.abs(values_lo))) / math.log(10.0)


def _asymptotic_flags(k: MemoryKernel, n: MemoryKernel, angles: np.ndarray,
                      grid: SectorGrid) -> Tuple[Dict[str, bool], float]:
    unit = np.exp(1j * angles)
    top, below_top = grid.max_modulus * unit, grid.max_modulus / 10.0 * unit
    bottom, above_bottom = grid.min_modulus * unit, grid.min_modulus * 10.0 * unit

    singular = MemoryKernel(0.0, k.singular_part)
    if isinstance(k.singular_part, Zero):
        k_limit = True
    else:
        k_limit = bool(np.all(_log_slope(laplace_transform(singular, top),
                                         laplace_transform(singular, below_top)) < -0.01))

    lam_k_top = top * laplace_transform(k, top)
    lam_k_below = below_top * laplace_transform(k, below_top)
    if np.all(lam_k_top == 0):
        growth, exponent = False, 0.0
    else:
        slopes = _log_slope(lam_k_top, lam_k_below)
        exponent = float(np.min(slopes))
        growth = bool(exponent > 0.01)

    lam_k_bottom = bottom * laplace_transform(k, bottom)
    if np.all(lam_k_bottom == 0):
        vanishing = True
    else:
        vanishing = bool(np.all(_log_slope(above_bottom * laplace_transform(k, above_bottom),
                                           lam_k_bottom) > 0.01))

    if n.is_zero:
        n_decay = True
    else:
        n_decay = bool(np.all(_log_slope(laplace_transform(n, top), laplace_transform(n, below_top)) < -0.01))
        j_top = np.abs(j_symbol(n, top))
        n_decay = n_decay and bool(np.all((j_top > 0.5) & (j_top < 1.5)))

    flags = {
        "k_hat_limit": k_limit,
        "growth": growth,
        "vanishing_at_origin": vanishing,
        "n_hat_decay": n_decay,
    }
    return flags, min(max(exponent, 0.0), 1.0)


def _sector_failures(k: MemoryKernel, n: MemoryKernel, theta: float, theta_a: float,
                     grid: SectorGrid) -> List[Tuple[complex, str]]:
    radii = grid.radii()
    angles = grid.angles(theta)
    r, phi = np.meshgrid(radii, angles, indexing="ij")
    lam = r * np.exp(1j * phi)
    failures: List[Tuple[complex, str]] = []

    j = j_symbol(n, lam.ravel())
    small = np.abs(j) < J_FLOOR
    failures.extend((complex(z), "J vanishes") for z in lam.ravel()[small])

    arg = unwrapped_ratio_argument(k, n, r.ravel(), phi.ravel())
    outside = (np.abs(arg) >= theta_a + math.pi / 2) & ~small
    failures.extend((complex(z), "ratio leaves sector") for z in lam.ravel()[outside])
    return failures


def verify_assumptions(k: MemoryKernel, n: MemoryKernel, theta_a: float = math.pi / 2 - 1e-6,
                       grid: Optional[SectorGrid] = None) -> AdmissibilityReport:
    """
    Sample the sector Σ_{θ+π/2} and bisect on θ for the largest sector where J
    stays away from zero and λK̂/J stays inside Σ_{θ_A+π/2}.
    """
    grid = grid or SectorGrid()
    if n.delta_weight:
        raise KernelDomainError("N must not carry a delta part")
    if not (0.0 < theta_a < math.pi / 2):
        raise KernelDomainError(f"theta_A must lie in (0, π/2), got {theta_a}")

    samples = 0

    def failures_at(theta: float) -> List[Tuple[complex, str]]:
        nonlocal samples
        samples += grid.samples_per_sector
        return _sector_failures(k, n, theta, theta_a, grid)

    flags, exponent = _asymptotic_flags(k, n, grid.angles(0.0), grid)
    samples += 4 * len(grid.angles(0.0))

    failures = failures_at(grid.theta_cap)
    if not failures:
        theta_max = grid.theta_cap
    elif failures_at(grid.tol):
        theta_max = 0.0
    else:
        lo, hi = grid.tol, grid.theta_cap
        while hi - lo > grid.tol:
            mid = 0.5 * (lo + hi)
            mid_failures = failures_at(mid)
            if mid_failures:
                hi, failures = mid, mid_failures
            else:
                lo = mid
        theta_max = lo

    if theta_max > 0.0:
        j_ok = True
    else:
        failures = failures_at(grid.tol)
        j_ok = not any(reason == "J vanishes" for _, reason in failures)

    if not all(flags.values()):
        failures = failures + [(complex(0.0), f"asymptotic check failed: {name}")
                               for name, good in flags.items() if not good]
        theta_max = 0.0

    report = AdmissibilityReport(
        theta_max=theta_max,
        j_nonvanishing=j_ok,
        asymptotic_flags=flags,
        samples_used=samples,
        theta_a=theta_a,
        failures=failures if theta_max < grid.theta_cap else [],
        growth_exponent=exponent,
    )
    logger.debug("sector check %s / %s -> θ_max=%.4f admissible=%s",
                 format_kernel(k), format_kernel(n), theta_max, report.admissible)
    return report


def max_sector_angle_case3(alpha: float, gamma_: float) -> Optional[float]:
    """Closed-form sector angle for K = k_{1-α}, N = k_γ; None when no θ in (0,1) exists."""
    for name, value in (("alpha", alpha), ("gamma", gamma_)):
        if not (0.0 < value < 1.0):
            raise KernelDomainError(f"{name} must lie in (0, 1), got {value}")
    total = alpha + gamma_
    theta0 = (2.0 - total) / total
    if theta0 <= 0.0:
        return None
    return min(theta0, 1.0) * math.pi / 2


def analytic_sector_angle(k: MemoryKernel, n: MemoryKernel) -> Optional[float]:
    """Closed-form sector angle for the pure families; None outside them."""
    k_part, n_part = k.singular_part, n.singular_part
    k_is_delta = k.is_pure_delta
    k_is_power = k.delta_weight == 0.0 and isinstance(k_part, PowerLaw)
    if n.is_zero and (k_is_delta or k_is_power):
        return math.pi / 2
    if n.delta_weight or not isinstance(n_part, PowerLaw):
        return None
    gamma_ = n_part.order
    if k_is_delta:
        theta0 = (1.0 - gamma_) / (1.0 + gamma_)
        return min(theta0, 1.0) * math.pi / 2
    if k_is_power:
        return max_sector_angle_case3(1.0 - k_part.order, gamma_)
    return None


def reducibility_constant(k: MemoryKernel, n: MemoryKernel, lam_samples: Sequence[complex],
                          tol: float = 1e-10) -> Tuple[Optional[float], float]:
    """Constant c with K̂ = c·J on the samples, or None; also the max deviation."""
    lam = np.asarray(lam_samples, dtype=complex)
    ratio = laplace_transform(k, lam) / j_symbol(n, lam)
    mean = ratio.mean()
    deviation = float(np.max(np.abs(ratio - mean)))
    if deviation < tol and abs(mean.imag) < tol and mean.real > 0.0:
        return float(mean.real), deviation
    return None, deviation


# ---------------------------------------------------------------------------
# Time grids and product integration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise KernelDomainError(f"time horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise KernelDomainError("time grid needs at least one step")

    @classmethod
    def from_rate(cls, horizon: float, steps_per_unit: int) -> "TimeGrid":
        return cls(horizon, max(1, int(round(horizon * steps_per_unit))))

    @property
    def step(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def index_of(self, t: float) -> Optional[int]:
        k = int(round(t / self.step))
        if 0 <= k <= self.steps and abs(k * self.step - t) <= 1e-9 * max(1.0, self.horizon):
            return k
        return None

    def coarsened(self) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps // 2)

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * 2)


def _columns(*arrays: np.ndarray) -> Tuple[List[np.ndarray], bool]:
    """Lift (n+1,) / (n+1, m) tables to a common (n+1, m) shape."""
    lifted = [np.asarray(a, dtype=float).reshape(np.shape(a)[0], -1) for a in arrays]
    width = max(a.shape[1] for a in lifted)
    scalar = all(np.ndim(a) == 1 for a in arrays)
    return [np.broadcast_to(a, (a.shape[0], width)) for a in lifted], scalar


def antiderivative_convolution(first: np.ndarray, second: np.ndarray, values: np.ndarray,
                               step: float) -> np.ndarray:
    """
    ∫_0^{t_n} k(t_n - s) u(s) ds for every node of a uniform grid, with u piecewise
    linear and k entering only through E1 = ∫k and E2 = ∫∫k sampled on the grid.

    first, second: shape (n+1,) or (n+1, m); values: (n+1,) or (n+1, m).
    """
    (first, second, values), scalar = _columns(first, second, values)
    steps = first.shape[0] - 1
    slopes = np.diff(values, axis=0) / step
    increments = np.diff(second, axis=0)
    out = np.zeros(first.shape)
    out[1:] = first[1:] * values[0]
    for col in range(out.shape[1]):
        out[1:, col] += np.convolve(slopes[:, col], increments[:, col])[:steps]
    return out[:, 0] if scalar else out


def antiderivative_convolution_at(first: np.ndarray, second: np.ndarray, values: np.ndarray,
                                  step: float, index: int) -> np.ndarray:
    """Single-node version of :func:`antiderivative_convolution`."""
    (first, second, values), scalar = _columns(first, second, values)
    if index == 0:
        out = np.zeros(first.shape[1])
    else:
        slopes = np.diff(values[: index + 1], axis=0) / step
        increments = np.diff(second[: index + 1], axis=0)[::-1]
        out = first[index] * values[0] + np.sum(slopes * increments, axis=0)
    return float(out[0]) if scalar else out


def nonuniform_convolution(first_fn: Callable[[np.ndarray], np.ndarray],
                           second_fn: Callable[[np.ndarray], np.ndarray],
                           values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Product integration on an arbitrary increasing grid (scalar u)."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(np.diff(nodes) <= 0.0):
        raise KernelDomainError("grid nodes must be strictly increasing")
    slopes = np.diff(values) / np.diff(nodes)
    out = np.zeros_like(nodes)
    for m in range(1, nodes.size):
        lags = nodes[m] - nodes[: m + 1]
        e2 = second_fn(lags)
        out[m] = first_fn(lags[0]) * values[0] + np.sum(slopes[:m] * (e2[:-1] - e2[1:]))
    return out


def convolve(kernel: MemoryKernel, samples, grid: TimeGrid) -> np.ndarray:
    """(K * u)(t_n) on a uniform grid, delta part included."""
    samples = np.asarray(samples, dtype=float)
    nodes = grid.nodes
    first = kernel.antiderivative(nodes, 1)
    second = kernel.antiderivative(nodes, 2)
    result = antiderivative_convolution(first, second, samples, grid.step)
    if kernel.delta_weight:
        result = result + kernel.delta_weight * samples
    return result


def fractional_integral_tables(order: float, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Antiderivative tables of k_order(t) = t^(order-1)/Γ(order)."""
    nodes = np.asarray(nodes, dtype=float)
    return (np.power(nodes, order) * rgamma(order + 1.0),
            np.power(nodes, order + 1.0) * rgamma(order + 2.0))


# ---------------------------------------------------------------------------
# Resolvent R + N*R = N
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ResolventKernel:
    """
    R = Σ c_k t^(o_k - 1)/Γ(o_k) + ρ, with the singular head in closed form and the
    regular remainder ρ sampled on the grid.
    """
    grid: TimeGrid
    head: Tuple[Tuple[float, float], ...]
    regular: np.ndarray
    residual: float = 0.0

    @property
    def values(self) -> np.ndarray:
        nodes = self.grid.nodes
        out = np.array(self.regular, dtype=float)
        with np.errstate(divide="ignore"):
            for coeff, order in self.head:
                out = out + coeff * np.power(nodes, order - 1.0) * rgamma(order)
        return out

    @property
    def singular(self) -> bool:
        return any(order < 1.0 for _, order in self.head)

    def convolve(self, samples) -> np.ndarray:
        """(R * u)(t_n)."""
        samples = np.asarray(samples, dtype=float)
        nodes = self.grid.nodes
        out = np.zeros_like(samples)
        for coeff, order in self.head:
            first, second = fractional_integral_tables(order, nodes)
            out = out + coeff * antiderivative_convolution(first, second, samples, self.grid.step)
        if np.any(self.regular):
            first, second = _cumulative_tables(self.regular, self.grid.step)
            out = out + antiderivative_convolution(first, second, samples, self.grid.step)
        return out

    def resolvent(self) -> "ResolventKernel":
        """Resolvent R₂ of R₂ + R*R₂ = R, from the sampled values of R."""
        return sampled_resolvent(self.values, self.grid)


def _cumulative_tables(samples: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    first = cumulative_trapezoid(samples, dx=step, initial=0.0)
    second = cumulative_trapezoid(first, dx=step, initial=0.0)
    return first, second


def _exp_sum_resolvent(part: ExpSum, grid: TimeGrid) -> np.ndarray:
    a, b = part.weights, part.rates
    m = a.size
    ones = np.ones((m, 1))
    generator = np.zeros((2 * m, 2 * m))
    generator[:m, :m] = -np.diag(b) - ones @ a[None, :]
    generator[:m, m:] = ones @ a[None, :]
    generator[m:, m:] = -np.diag(b)
    propagator = expm(generator * grid.step)
    state = np.concatenate([np.zeros(m), np.ones(m)])
    out = np.empty(grid.steps + 1)
    for k in range(grid.steps + 1):
        out[k] = a @ (state[m:] - state[:m])
        state = propagator @ state
    return out


def _solve_second_kind(first: np.ndarray, second: np.ndarray, q: np.ndarray, step: float,
                       coeff: float = 1.0) -> np.ndarray:
    """
    ρ + c·(k*ρ) = q by product trapezoid, k entering through its antiderivative
    tables E1 = ∫k and E2 = ∫∫k on the grid nodes.
    """
    increments = np.diff(second)
    rho = np.zeros_like(q)
    rho[0] = q[0]
    self_weight = coeff * increments[0] / step
    for n in range(1, q.size):
        history = first[n] * rho[0]
        if n > 1:
            slopes = np.diff(rho[:n]) / step
            history += np.dot(slopes, increments[n - 1:0:-1])
        rhs = q[n] - coeff * (history - rho[n - 1] * increments[0] / step)
        value = rhs / (1.0 + self_weight)
        if not math.isfinite(value):
            raise ResolventStepError("non-finite resolvent remainder", n)
        rho[n] = value
    return rho


def _solve_power_remainder(coeff: float, gamma_: float, forcing_order: float, forcing_coeff: float,
                           grid: TimeGrid) -> np.ndarray:
    """ρ + c·J^γ ρ = q, q = forcing_coeff·k_{forcing_order}."""
    nodes = grid.nodes
    q = forcing_coeff * np.power(nodes, forcing_order - 1.0) * rgamma(forcing_order)
    first, second = fractional_integral_tables(gamma_, nodes)
    return _solve_second_kind(first, second, q, grid.step, coeff)


def resolvent_kernel(n: MemoryKernel, grid: TimeGrid) -> ResolventKernel:
    """Resolvent R of R + N*R = N on the grid."""
    if n.delta_weight:
        raise KernelDomainError("resolvent needs N without a delta part")
    part = n.singular_part
    if isinstance(part, Zero):
        return ResolventKernel(grid, (), np.zeros(grid.steps + 1), 0.0)
    if isinstance(part, ExpSum):
        values = _exp_sum_resolvent(part, grid)
        resolvent = ResolventKernel(grid, (), values)
    else:
        c, gamma_ = part.scale, part.order
        terms = max(1, math.ceil(3.0 / gamma_) - 1)
        head = tuple(((-1.0) ** (k + 1) * c ** k, k * gamma_) for k in range(1, terms + 1))
        forcing_order = (terms + 1) * gamma_
        forcing_coeff = (-1.0) ** terms * c ** (terms + 1)
        coarse = _solve_power_remainder(c, gamma_, forcing_order, forcing_coeff, grid)
        fine = _solve_power_remainder(c, gamma_, forcing_order, forcing_coeff, grid.refined())
        regular = (4.0 * fine[::2] - coarse) / 3.0
        resolvent = ResolventKernel(grid, head, regular)
    residual = _resolvent_residual(n, resolvent)
    logger.debug("resolvent of %s on %d steps: residual %.2e", format_kernel(n), grid.steps, residual)
    return ResolventKernel(resolvent.grid, resolvent.head, resolvent.regular, residual)


def sampled_resolvent(samples, grid: TimeGrid) -> ResolventKernel:
    """Resolvent S of S + k*S = k for a kernel known only through finite samples."""
    values = np.asarray(samples, dtype=float)
    if values.shape != (grid.steps + 1,):
        raise GridResolutionError(f"kernel has {values.size} samples for a grid of {grid.steps + 1} nodes")
    if not np.all(np.isfinite(values)):
        raise KernelDomainError("sampled resolvent needs a kernel that is finite at every node, t = 0 included")
    first, second = _cumulative_tables(values, grid.step)
    rho = _solve_second_kind(first, second, values, grid.step)
    total = rho + antiderivative_convolution(first, second, rho, grid.step) - values
    return ResolventKernel(grid, (), rho, float(np.max(np.abs(total[1:]))))


def _resolvent_residual(n: MemoryKernel, resolvent: ResolventKernel) -> float:
    """max |R + N*R - N| over the interior nodes, singular heads cancelled in closed form."""
    grid = resolvent.grid
    nodes = grid.nodes[1:]
    part = n.singular_part
    if isinstance(part, PowerLaw):
        c, gamma_ = part.scale, part.order
        head_total = np.zeros_like(nodes)
        for coeff, order in resolvent.head:
            head_total += coeff * (np.power(nodes, order - 1.0) * rgamma(order)
                                   + c * np.power(nodes, order + gamma_ - 1.0) * rgamma(order + gamma_))
        head_total -= c * np.power(nodes, gamma_ - 1.0) * rgamma(gamma_)
        n_star_rho = convolve(n, resolvent.regular, grid)[1:]
        total = head_total + resolvent.regular[1:] + n_star_rho
    else:
        values = resolvent.values
        total = values[1:] + convolve(n, values, grid)[1:] - n.regular(nodes)
    return float(np.max(np.abs(total)))


__all__ = [
    "AdmissibilityReport",
    "ExpSum",
    "KernelRole",
    "MemoryKernel",
    "PowerLaw",
    "ResolventKernel",
    "SectorGrid",
    "SingularPart",
    "TimeGrid",
    "Zero",
    "analytic_sector_angle",
    "antiderivative_convolution",
    "antiderivative_convolution_at",
    "convolve",
    "format_kernel",
    "fractional_integral_tables",
    "j_symbol",
    "laplace_quadrature",
    "laplace_transform",
    "max_sector_angle_case3",
    "nonuniform_convolution",
    "parse_kernel",
    "reducibility_constant",
    "resolvent_kernel",
    "sampled_resolvent",
    "symbol_ratio",
    "unwrapped_ratio_argument",
    "verify_assumptions",
]
