"""Dirichlet Laplacian on (0, L): eigenbasis, modal fields, lifts and control geometry."""
from __future__ import annotations
from dataclasses import dataclass
import math
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from systems.errors import GeometryError, GridResolutionError

POINTS_PER_WAVELENGTH = 8
GAUSS_POINTS = 512

Side = Literal["left", "right"]
GeometryKind = Literal["distributed", "boundary"]


@dataclass(frozen=True)
class EigenBasis:
    length: float = math.pi
    n_max: int = 64

    def __post_init__(self):
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise GeometryError(f"interval length must be positive, got {self.length}")
        if self.n_max < 1:
            raise GeometryError("basis needs at least one mode")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    @property
    def mu(self) -> np.ndarray:
        return self.modes * math.pi / self.length

    @property
    def eigenvalues(self) -> np.ndarray:
        """μ_n², so that -Δφ_n = μ_n² φ_n."""
        return self.mu ** 2

    def eigenfunctions(self, x) -> np.ndarray:
        """φ_n(x) = √(2/L) sin(nπx/L); shape (len(x), n_max)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return math.sqrt(2.0 / self.length) * np.sin(np.outer(x, self.mu))

    def min_points(self) -> int:
        """Sample count that resolves the shortest wavelength 2L/n_max."""
        return POINTS_PER_WAVELENGTH * self.n_max // 2 + 1


@dataclass(frozen=True, eq=False)
class SpectralField:
    basis: EigenBasis
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if coeffs.size > self.basis.n_max:
            raise GeometryError(f"{coeffs.size} coefficients for a basis of {self.basis.n_max} modes")
        padded = np.zeros(self.basis.n_max)
        padded[: coeffs.size] = coeffs
        object.__setattr__(self, "coeffs", padded)

    @classmethod
    def zeros(cls, basis: EigenBasis) -> "SpectralField":
        return cls(basis, np.zeros(basis.n_max))

    @classmethod
    def unit(cls, basis: EigenBasis, n: int) -> "SpectralField":
        if not 1 <= n <= basis.n_max:
            raise GeometryError(f"mode {n} outside 1..{basis.n_max}")
        coeffs = np.zeros(basis.n_max)
        coeffs[n - 1] = 1.0
        return cls(basis, coeffs)

    @classmethod
    def from_modes(cls, basis: EigenBasis, fn: Callable[[np.ndarray], np.ndarray]) -> "SpectralField":
        """Coefficients given as a function of the mode index n."""
        return cls(basis, fn(basis.modes.astype(float)))

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def scaled(self, factors) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs * np.asarray(factors, dtype=float))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.basis, -self.coeffs)

    def __mul__(self, factor: float) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs * factor)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"length": self.basis.length, "n_max": self.basis.n_max, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "SpectralField":
        basis = EigenBasis(float(payload["length"]), int(payload["n_max"]))
        return cls(basis, payload["coeffs"])

    def csv_rows(self) -> List[Tuple[int, float]]:
        return [(int(n), float(c)) for n, c in zip(self.basis.modes, self.coeffs)]


def project(samples, x_grid, basis: EigenBasis) -> SpectralField:
    """
    L² projection of nodal samples on a uniform grid over [0, L].

    The trapezoid rule is exact on products of sines below the grid's Nyquist
    limit, so band-limited fields round-trip to rounding error.
    """
    x = np.asarray(x_grid, dtype=float)
    values = np.asarray(samples, dtype=float)
    if x.shape != values.shape or x.ndim != 1:
        raise GridResolutionError("samples and grid must be 1-D arrays of equal length")
    if abs(x[0]) > 1e-12 or abs(x[-1] - basis.length) > 1e-9 * basis.length:
        raise GridResolutionError("projection grid must span [0, L]")
    if x.size < basis.min_points():
        raise GridResolutionError(
            f"{x.size} points under-resolve {basis.n_max} modes (need {basis.min_points()})"
        )
    phi = basis.eigenfunctions(x)
    return SpectralField(basis, trapezoid(values[:, None] * phi, x, axis=0))


def synthesize(field: SpectralField, x) -> np.ndarray:
    return field.basis.eigenfunctions(x) @ field.coeffs


def uniform_grid(basis: EigenBasis, points: Optional[int] = None) -> np.ndarray:
    return np.linspace(0.0, basis.length, points or 4 * basis.min_points())


def frac_power_norm(field: SpectralField, sigma: float) -> float:
    """‖(-A)^σ w‖ = (Σ μ_n^{4σ} w_n²)^{1/2}."""
    weights = field.basis.mu ** (4.0 * sigma)
    return float(math.sqrt(np.sum(weights * field.coeffs ** 2)))


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    coarse_sum: float
    fine_sum: float
    growth: float
    sigma: float

    def to_dict(self) -> dict:
        return {"member": self.member, "coarse_sum": self.coarse_sum, "fine_sum": self.fine_sum,
                "growth": self.growth, "sigma": self.sigma}


def domain_membership(field: SpectralField, sigma: float, tol: float = 0.01) -> MembershipResult:
    """
    Heuristic Dom((-A)^σ) test: the weighted partial sum must grow by less than
    ``tol`` (relative) when the mode count doubles from n_max/2 to n_max.
    """
    if field.basis.n_max < 4:
        raise GridResolutionError("membership test needs at least 4 modes")
    terms = field.basis.mu ** (4.0 * sigma) * field.coeffs ** 2
    half = field.basis.n_max // 2
    coarse = float(np.sum(terms[:half]))
    fine = float(np.sum(terms))
    if fine == 0.0:
        growth = 0.0
    elif coarse == 0.0:
        growth = math.inf
    else:
        growth = (fine - coarse) / coarse
    return MembershipResult(growth < tol, coarse, fine, growth, sigma)


def green_lift_coeffs(basis: EigenBasis, side: Side) -> np.ndarray:
    """Sine coefficients of the harmonic lift of a unit boundary value."""
    base = math.sqrt(2.0 * basis.length) / (basis.modes * math.pi)
    if side == "left":
        return base
    if side == "right":
        return -((-1.0) ** basis.modes) * base
    raise GeometryError(f"unknown boundary side {side!r}")


def lift_profile(basis: EigenBasis, side: Side, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 1.0 - x / basis.length if side == "left" else x / basis.length


@dataclass(frozen=True)
class ControlGeometry:
    kind: GeometryKind
    a: float = 0.0
    b: float = 0.0
    side: Side = "left"

    def __post_init__(self):
        if self.kind == "distributed":
            if not (0.0 <= self.a < self.b):
                raise GeometryError(f"control subinterval needs 0 ≤ a < b, got ({self.a}, {self.b})")
        elif self.kind == "boundary":
            if self.side not in ("left", "right"):
                raise GeometryError(f"unknown boundary side {self.side!r}")
        else:
            raise GeometryError(f"unknown control geometry {self.kind!r}")

    @classmethod
    def distributed(cls, a: float, b: float) -> "ControlGeometry":
        return cls("distributed", a, b)

    @classmethod
    def boundary(cls, side: Side = "left") -> "ControlGeometry":
        return cls("boundary", side=side)

    @property
    def is_boundary(self) -> bool:
        return self.kind == "boundary"

    def check_within(self, basis: EigenBasis) -> None:
        if self.kind == "distributed" and self.b > basis.length * (1.0 + 1e-12):
            raise GeometryError(f"control subinterval ({self.a}, {self.b}) leaves (0, {basis.length})")

    def require_proper_subset(self, basis: EigenBasis) -> None:
        self.check_within(basis)
        if self.kind == "distributed" and self.a <= 0.0 and self.b >= basis.length:
            raise GeometryError("control region must be a proper subinterval of (0, L)")

    def indicator(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((x > self.a) & (x < self.b)).astype(float)

    def to_dict(self) -> dict:
        if self.is_boundary:
            return {"kind": "boundary", "side": self.side}
        return {"kind": "distributed", "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, payload: dict) -> "ControlGeometry":
        kind = payload.get("kind", "distributed")
        if kind == "boundary":
            return cls.boundary(payload.get("side", "left"))
        return cls.distributed(float(payload["a"]), float(payload["b"]))


Profile = Union[Callable[[np.ndarray], np.ndarray], Tuple[np.ndarray, np.ndarray]]


def distributed_injection(profile: Profile, geometry: ControlGeometry, basis: EigenBasis) -> SpectralField:
    """
    Extend a profile on Ω_a = (a, b) by zero and project it onto the basis.

    A callable profile is integrated with Gauss-Legendre on (a, b); a sampled
    profile (x, values) with the trapezoid rule over its own nodes.
    """
    if geometry.is_boundary:
        raise GeometryError("distributed injection needs a distributed geometry")
    geometry.check_within(basis)
    if callable(profile):
        nodes, weights = np.polynomial.legendre.leggauss(max(GAUSS_POINTS, 8 * basis.n_max))
        half = 0.5 * (geometry.b - geometry.a)
        x = geometry.a + half * (nodes + 1.0)
        values = np.asarray(profile(x), dtype=float)
        coeffs = (half * weights * values) @ basis.eigenfunctions(x)
    else:
        x, values = (np.asarray(v, dtype=float) for v in profile)
        inside = (x >= geometry.a) & (x <= geometry.b)
        if inside.sum() < 2:
            raise GridResolutionError("sampled profile has fewer than two nodes in the control region")
        x, values = x[inside], values[inside]
        coeffs = trapezoid(values[:, None] * basis.eigenfunctions(x), x, axis=0)
    return SpectralField(basis, coeffs)


def field_from_spec(basis: EigenBasis, spec) -> SpectralField:
    """
    Build a field from a compact description:
    "phi<n>" (unit mode), "inverse_power:<p>" (w_n = n^-p), "parabola" (x(L-x)),
    or an explicit list of coefficients.
    """
    if isinstance(spec, SpectralField):
        return spec
    if isinstance(spec, (list, tuple, np.ndarray)):
        return SpectralField(basis, np.asarray(spec, dtype=float))
    text = str(spec).strip()
    if text.startswith("phi"):
        return SpectralField.unit(basis, int(text[3:] or 1))
    if text.startswith("inverse_power"):
        _, _, power = text.partition(":")
        p = float(power or 1.0)
        return SpectralField.from_modes(basis, lambda n: n ** (-p))
    if text == "parabola":
        length = basis.length
        return SpectralField.from_modes(
            basis,
            lambda n: math.sqrt(2.0 / length) * 2.0 * length ** 3 / (n * math.pi) ** 3 * (1.0 - (-1.0) ** n),
        )
    if text in ("0", "zero"):
        return SpectralField.zeros(basis)
    raise GeometryError(f"cannot build a field from {spec!r}")
