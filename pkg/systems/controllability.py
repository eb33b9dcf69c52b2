"""
Desk-scale controllability experiments: least-squares control synthesis over
smooth atoms, the null-control obstruction and the reducibility test.
"""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

from systems.errors import GeometryError, RegularizationRequiredError
from systems.evolution import ControlSignal, combined_boundary_signal, evolve_free
from systems.kernel_lab import MemoryKernel, SectorGrid, TimeGrid, reducibility_constant
from systems.laplace_contour import (
    ContourSpec,
    ForcingTable,
    default_spec,
    forcing_table,
    mode_evolution_kernel,
    psi,
)
from systems.spectral_domain import (
    ControlGeometry,
    EigenBasis,
    MembershipResult,
    SpectralField,
    distributed_injection,
    domain_membership,
    green_lift_coeffs,
)

logger = logging.getLogger(__name__)

GRAM_LIMIT = 1e12
DEFAULT_RHO_SCALE = 1e-10


def _legendre(degree: int, x: np.ndarray) -> np.ndarray:
    coeffs = np.zeros(degree + 1)
    coeffs[degree] = 1.0
    return legendre.legval(x, coeffs)


@dataclass(frozen=True)
class ControlBasis:
    """
    Time atoms (4t(T-t)/T²)³·P_i(2t/T - 1), i < time_atoms, and for distributed
    control space bumps supported in Ω_a built the same way in x.
    """
    kind: Literal["distributed", "boundary"]
    time_atoms: int
    space_atoms: int = 0

    def __post_init__(self):
        if self.kind not in ("distributed", "boundary"):
            raise GeometryError(f"unknown control basis kind {self.kind!r}")
        if self.time_atoms < 1:
            raise GeometryError("control basis needs at least one time atom")
        if self.kind == "distributed" and self.space_atoms < 1:
            raise GeometryError("distributed control basis needs at least one space atom")

    @property
    def size(self) -> int:
        return self.time_atoms * (self.space_atoms if self.kind == "distributed" else 1)

    def extended(self, time_atoms: int) -> "ControlBasis":
        return ControlBasis(self.kind, time_atoms, self.space_atoms)

    def time_profiles(self, grid: TimeGrid) -> np.ndarray:
        """Shape (time_atoms, steps + 1); every atom vanishes at 0 and T."""
        t = grid.nodes
        horizon = grid.horizon
        bump = (4.0 * t * (horizon - t) / horizon ** 2) ** 3
        x = 2.0 * t / horizon - 1.0
        return np.array([bump * _legendre(i, x) for i in range(self.time_atoms)])

    def space_profiles(self, geometry: ControlGeometry, basis: EigenBasis) -> np.ndarray:
        """Modal coefficients of the space atoms, shape (space_atoms, n_max)."""
        a, b = geometry.a, geometry.b
        width = b - a

        def atom(j):
            def profile(x):
                bump = (4.0 * (x - a) * (b - x) / width ** 2) ** 3
                return bump * _legendre(j, 2.0 * (x - a) / width - 1.0)
            return profile

        return np.array([distributed_injection(atom(j), geometry, basis).coeffs for j in range(self.space_atoms)])

    def realize(self, coefficients: np.ndarray, grid: TimeGrid, geometry: ControlGeometry,
                basis: EigenBasis) -> ControlSignal:
        """The control signal a coefficient vector stands for."""
        times = self.time_profiles(grid)
        if self.kind == "boundary":
            return ControlSignal(grid, coefficients @ times)
        space = self.space_profiles(geometry, basis)
        weights = np.asarray(coefficients).reshape(self.time_atoms, self.space_atoms)
        return ControlSignal(grid, times.T @ weights @ space)


@dataclass
class SynthesisResult:
    coefficients: np.ndarray
    residual: float
    control_norm: float
    gram_condition: float
    rho: float
    reached: SpectralField
    basis_size: int = 0

    def to_dict(self) -> dict:
        return {
            "basis_size": self.basis_size,
            "residual": self.residual,
            "control_norm": self.control_norm,
            "gram_condition": self.gram_condition,
            "rho": self.rho,
        }


def forward_map(basis: ControlBasis, geometry: ControlGeometry, field_basis: EigenBasis, table: ForcingTable,
                n: MemoryKernel, threads: int = 1) -> np.ndarray:
    """Columns: w(T; atom) coefficients for every atom of the control basis."""
    if (basis.kind == "boundary") != geometry.is_boundary:
        raise GeometryError("control basis kind does not match the geometry")
    grid = table.grid
    last = grid.steps
    times = basis.time_profiles(grid)

    if geometry.is_boundary:
        lift = field_basis.eigenvalues * green_lift_coeffs(field_basis, geometry.side)

        def column(i: int) -> np.ndarray:
            g = combined_boundary_signal(ControlSignal(grid, times[i]), n)
            return lift * table.at(last, g)
    else:
        def column(i: int) -> np.ndarray:
            return table.at(last, times[i])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        responses = list(pool.map(column, range(basis.time_atoms)))
    responses = np.array(responses).T  # (n_max, time_atoms)
    if geometry.is_boundary:
        return responses
    space = basis.space_profiles(geometry, field_basis)  # (space_atoms, n_max)
    # column index i * space_atoms + j
    return (responses[:, :, None] * space.T[:, None, :]).reshape(field_basis.n_max, -1)


def _solve_regularized(matrix: np.ndarray, target: np.ndarray, rho: Optional[float],
                       gram_limit: float) -> tuple:
    gram = matrix.T @ matrix
    eigenvalues = eigh(gram, eigvals_only=True)
    top = float(eigenvalues[-1]) if eigenvalues.size else 0.0
    bottom = float(eigenvalues[0]) if eigenvalues.size else 0.0
    condition = top / bottom if bottom > 0.0 else math.inf
    if rho is None:
        rho = DEFAULT_RHO_SCALE * top
    if rho == 0.0 and condition > gram_limit:
        raise RegularizationRequiredError(
            f"Gram condition {condition:.2e} exceeds {gram_limit:.0e}; pass a positive regularization", condition
        )
    rhs = matrix.T @ target
    system = gram + rho * np.eye(gram.shape[0])
    try:
        coefficients = cho_solve(cho_factor(system), rhs)
    except LinAlgError:
        logger.debug("Cholesky failed, falling back to the symmetric eigensolver")
        values, vectors = eigh(system)
        keep = values > max(values[-1], 0.0) * 1e-15
        coefficients = vectors[:, keep] @ ((vectors[:, keep].T @ rhs) / values[keep])
    return coefficients, condition, float(rho)


def synthesize_control(target: SpectralField, horizon: float, basis: ControlBasis, geometry: ControlGeometry,
                       k: MemoryKernel, n: MemoryKernel, rho: Optional[float] = None, *,
                       spec: Optional[ContourSpec] = None, steps_per_unit: int = 512,
                       table: Optional[ForcingTable] = None, threads: int = 1,
                       gram_limit: float = GRAM_LIMIT) -> SynthesisResult:
    """min ‖Mc - target‖² + ρ‖c‖² over the atom coefficients c."""
    if rho is not None and rho < 0.0:
        raise RegularizationRequiredError("regularization must be non-negative", math.nan)
    field_basis = target.basis
    geometry.check_within(field_basis)
    if table is None:
        spec = spec or default_spec(k, n)
        grid = TimeGrid.from_rate(horizon, steps_per_unit)
        table = forcing_table(k, n, field_basis.eigenvalues, grid, spec)
    matrix = forward_map(basis, geometry, field_basis, table, n, threads)
    coefficients, condition, rho_used = _solve_regularized(matrix, target.coeffs, rho, gram_limit)
    reached = matrix @ coefficients
    residual = float(np.linalg.norm(reached - target.coeffs))
    logger.debug("synthesis with %d atoms: residual %.3e, cond %.2e", basis.size, residual, condition)
    return SynthesisResult(
        coefficients=coefficients,
        residual=residual,
        control_norm=float(np.linalg.norm(coefficients)),
        gram_condition=condition,
        rho=rho_used,
        reached=SpectralField(field_basis, reached),
        basis_size=basis.size,
    )


def residual_curve(target: SpectralField, horizon: float, basis: ControlBasis, geometry: ControlGeometry,
                   k: MemoryKernel, n: MemoryKernel, sizes: Sequence[int], rho: Optional[float] = None, *,
                   spec: Optional[ContourSpec] = None, steps_per_unit: int = 512,
                   threads: int = 1) -> List[SynthesisResult]:
    """Synthesis over nested bases sharing one forcing table."""
    spec = spec or default_spec(k, n)
    grid = TimeGrid.from_rate(horizon, steps_per_unit)
    table = forcing_table(k, n, target.basis.eigenvalues, grid, spec)
    return [
        synthesize_control(target, horizon, basis.extended(m), geometry, k, n, rho,
                           spec=spec, table=table, threads=threads)
        for m in sizes
    ]


# ---------------------------------------------------------------------------
# Obstruction
# ---------------------------------------------------------------------------
@dataclass
class ObstructionResult:
    horizon: float
    psi_value: float
    modes: List[int]
    ratios: List[float]

    @property
    def obstructed(self) -> bool:
        return bool(self.ratios)

    @property
    def message(self) -> str:
        return "obstruction ratios computed" if self.ratios else "no obstruction at this T"

    def to_dict(self) -> dict:
        return {"T": self.horizon, "psi": self.psi_value, "modes": self.modes,
                "ratios": self.ratios, "message": self.message}


def obstruction_ratio(k: MemoryKernel, n: MemoryKernel, horizon: float, modes: Sequence[int],
                      spec: Optional[ContourSpec] = None, length: float = math.pi,
                      psi_tol: float = 1e-8) -> ObstructionResult:
    """r_n = μ_n² e_n(T)/Ψ(T); empty when Ψ(T) vanishes."""
    spec = spec or default_spec(k, n)
    psi_value = psi(k, n, horizon, spec).real
    modes = [int(m) for m in modes]
    if abs(psi_value) < psi_tol:
        return ObstructionResult(horizon, psi_value, modes, [])
    mu2 = (np.asarray(modes, dtype=float) * math.pi / length) ** 2
    e = np.atleast_1d(mode_evolution_kernel(k, n, mu2, horizon, spec).real)
    return ObstructionResult(horizon, psi_value, modes, (mu2 * e / psi_value).tolist())


@dataclass
class NullControlReport:
    applicable: bool
    message: str
    free_membership: Optional[MembershipResult] = None
    final_membership: Optional[MembershipResult] = None
    residuals: Dict[int, float] = field(default_factory=dict)
    stagnates: bool = False
    psi_value: float = 0.0

    @property
    def obstructed(self) -> bool:
        if not self.applicable or self.free_membership is None or self.final_membership is None:
            return False
        tail = not self.free_membership.member and not self.final_membership.member
        return tail and self.stagnates

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "message": self.message,
            "obstructed": self.obstructed,
            "psi": self.psi_value,
            "free_state_membership": self.free_membership.to_dict() if self.free_membership else None,
            "final_state_membership": self.final_membership.to_dict() if self.final_membership else None,
            "residual_curve": {str(m): r for m, r in self.residuals.items()},
            "stagnates": self.stagnates,
        }


def null_control_certificate(w0: SpectralField, horizon: float, k: MemoryKernel, n: MemoryKernel,
                             geometry: ControlGeometry, basis: Optional[ControlBasis] = None,
                             sizes: Sequence[int] = (4, 8, 16, 32), rho: Optional[float] = None, *,
                             spec: Optional[ContourSpec] = None, steps_per_unit: int = 512,
                             threads: int = 1, stagnation_ratio: float = 0.5) -> NullControlReport:
    """
    Two diagnostics for steering w0 to zero at T: Dom(A²) membership of E(T)w0
    and of the best-effort final state, and whether the residual keeps falling
    as the control basis grows. Both must point the same way to flag an obstruction.
    """
    if geometry.is_boundary:
        basis = basis or ControlBasis("boundary", sizes[0])
    else:
        geometry.require_proper_subset(w0.basis)
        basis = basis or ControlBasis("distributed", sizes[0], 4)

    gate = domain_membership(w0, 1.0)
    if gate.member:
        return NullControlReport(False, "test inapplicable, w0 ∈ Dom A")

    spec = spec or default_spec(k, n)
    psi_value = psi(k, n, horizon, spec).real
    free = evolve_free(w0, horizon, k, n, spec)
    free_membership = domain_membership(free, 2.0)

    curve = residual_curve(-free, horizon, basis, geometry, k, n, sizes, rho,
                           spec=spec, steps_per_unit=steps_per_unit, threads=threads)
    residuals = {int(m): result.residual for m, result in zip(sizes, curve)}
    final_state = free + curve[-1].reached
    final_membership = domain_membership(final_state, 2.0)
    values = [result.residual for result in curve]
    stagnates = values[-1] > stagnation_ratio * values[-2] if len(values) > 1 else False

    report = NullControlReport(True, "", free_membership, final_membership, residuals, stagnates, psi_value)
    report.message = "obstructed" if report.obstructed else "no obstruction detected"
    logger.info("null-control certificate at T=%.3g: %s (residuals %s)", horizon, report.message,
                ", ".join(f"{v:.2e}" for v in values))
    return report


# ---------------------------------------------------------------------------
# Reducibility
# ---------------------------------------------------------------------------
@dataclass
class ReducibilityResult:
    constant: Optional[float]
    max_deviation: float
    samples: int

    @property
    def reducible(self) -> bool:
        return self.constant is not None

    def to_dict(self) -> dict:
        return {"reducible": self.reducible, "constant": self.constant,
                "max_deviation": self.max_deviation, "samples": self.samples}


def default_reducibility_samples(theta: float = 0.0, moduli: int = 8, fan: int = 3) -> np.ndarray:
    grid = SectorGrid(moduli=moduli, min_modulus=1e-3, max_modulus=1e3, fan=fan)
    lam = grid.radii()[:, None] * np.exp(1j * grid.angles(theta))[None, :]
    return lam.ravel()


def reducibility_test(k: MemoryKernel, n: MemoryKernel, lam_samples: Optional[Sequence[complex]] = None,
                      tol: float = 1e-10) -> ReducibilityResult:
    """Constant c with K̂ = c·J across the samples, or None."""
    samples = default_reducibility_samples() if lam_samples is None else np.asarray(lam_samples, dtype=complex)
    if samples.size < 16:
        raise ValueError("reducibility test needs at least 16 samples")
    constant, deviation = reducibility_constant(k, n, samples, tol)
    return ReducibilityResult(constant, deviation, int(samples.size))
