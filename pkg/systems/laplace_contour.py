"""
Inverse Laplace transforms along a Hankel-type contour: two rays at ±α joined
by an arc of radius ε around the origin, discretised with composite
Gauss-Legendre panels.
"""
from __future__ import annotations
from dataclasses import dataclass, replace
from functools import lru_cache
import logging
import math
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from systems.errors import (
    AdmissibilityError,
    ContourConvergenceError,
    ContourSpecError,
    GridResolutionError,
    InvalidTimeError,
)
from systems.kernel_lab import (
    MemoryKernel,
    SectorGrid,
    TimeGrid,
    antiderivative_convolution_at,
    analytic_sector_angle,
    j_symbol,
    laplace_transform,
    verify_assumptions,
)
from systems.reporting import write_csv
from systems.spectral_domain import EigenBasis, green_lift_coeffs

logger = logging.getLogger(__name__)

Transform = Callable[[np.ndarray], np.ndarray]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ContourSpec:
    arc_radius: float = 1.0
    ray_angle: float = 3.0 * math.pi / 4.0
    truncation: Optional[float] = None
    ray_nodes: int = 16
    arc_nodes: int = 64
    t_scaling: Optional[bool] = None
    panel_ratio: float = 1.15
    max_panel: float = 1.0

    def __post_init__(self):
        if not (self.arc_radius > 0.0 and math.isfinite(self.arc_radius)):
            raise ContourSpecError(f"arc radius must be positive, got {self.arc_radius}")
        if not (math.pi / 2 < self.ray_angle < math.pi):
            raise ContourSpecError(f"ray angle must lie in (π/2, π), got {self.ray_angle}")
        if self.ray_nodes < 8 or self.arc_nodes < 8:
            raise ContourSpecError("contour needs at least 8 nodes per panel and on the arc")
        if self.r_max <= self.arc_radius:
            raise ContourSpecError(f"truncation {self.r_max} must exceed the arc radius {self.arc_radius}")
        if self.panel_ratio <= 1.0 or self.max_panel <= 0.0:
            raise ContourSpecError("panel growth ratio must exceed 1 and panel width must be positive")

    @property
    def r_max(self) -> float:
        if self.truncation is not None:
            return float(self.truncation)
        return min(max(40.0 / abs(math.cos(self.ray_angle)), 10.0 * self.arc_radius), 1e4)

    def uses_scaling(self, t: float) -> bool:
        return t < 1.0 if self.t_scaling is None else self.t_scaling

    def refined(self) -> "ContourSpec":
        return replace(self, ray_nodes=2 * self.ray_nodes, arc_nodes=2 * self.arc_nodes)

    def check_sector(self, theta: float) -> None:
        if self.ray_angle >= math.pi / 2 + theta:
            raise ContourSpecError(
                f"ray angle {self.ray_angle:.4f} is not inside the analyticity sector π/2 + {theta:.4f}"
            )

    def to_dict(self) -> dict:
        return {
            "arc_radius": self.arc_radius,
            "ray_angle": self.ray_angle,
            "r_max": self.r_max,
            "ray_nodes": self.ray_nodes,
            "arc_nodes": self.arc_nodes,
            "t_scaling": self.t_scaling,
        }


@dataclass(frozen=True, eq=False)
class ContourNodes:
    """Nodes λ_k and weights w_k with (1/2πi)∮ f(λ) dλ ≈ Σ w_k f(λ_k)."""
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class InversionResult:
    value: np.ndarray
    imag_residual: float
    nodes_used: int
    est_error: float

    @property
    def real(self) -> np.ndarray:
        real = np.real(self.value)
        return float(real) if np.ndim(real) == 0 else real


def _ray_panels(spec: ContourSpec) -> np.ndarray:
    edges = [spec.arc_radius]
    while edges[-1] < spec.r_max:
        width = min((spec.panel_ratio - 1.0) * edges[-1], spec.max_panel)
        edges.append(min(edges[-1] + width, spec.r_max))
    return np.asarray(edges)


@lru_cache(maxsize=64)
def build_contour(spec: ContourSpec) -> ContourNodes:
    edges = _ray_panels(spec)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(spec.ray_nodes)
    left, right = edges[:-1, None], edges[1:, None]
    s = (0.5 * (right - left) * (gl_nodes + 1.0) + left).ravel()
    ds = (0.5 * (right - left) * gl_weights).ravel()

    alpha = spec.ray_angle
    upper_dir = np.exp(1j * alpha)
    lower_dir = np.exp(-1j * alpha)
    upper = s * upper_dir
    lower = s * lower_dir

    arc_nodes, arc_weights = np.polynomial.legendre.leggauss(spec.arc_nodes)
    tau = alpha * arc_nodes
    arc = spec.arc_radius * np.exp(1j * tau)
    arc_w = alpha * arc_weights * 1j * arc

    nodes = np.concatenate([lower, arc, upper])
    weights = np.concatenate([-lower_dir * ds, arc_w, upper_dir * ds]) / (2j * math.pi)
    return ContourNodes(nodes, weights)


def _quadrature(transform: Transform, t: float, spec: ContourSpec):
    path = build_contour(spec)
    if spec.uses_scaling(t):
        values = np.asarray(transform(path.nodes / t))
        factor = path.weights * np.exp(path.nodes) / t
    else:
        values = np.asarray(transform(path.nodes))
        factor = path.weights * np.exp(path.nodes * t)
    factor = factor.reshape((-1,) + (1,) * (values.ndim - 1))
    terms = factor * values
    return np.sum(terms, axis=0), np.sum(np.abs(terms), axis=0), len(path)


def invert(transform: Transform, t: float, spec: ContourSpec, tol: float = 1e-10,
           max_refinements: int = 3) -> InversionResult:
    """
    f(t) = (1/2πi)∮ e^{λt} F(λ) dλ, refining the node counts until two
    successive levels agree.
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise InvalidTimeError(f"inversion needs t > 0, got {t}")
    value, _, used = _quadrature(transform, t, spec)
    current = spec
    err = np.inf
    for _ in range(max_refinements):
        current = current.refined()
        finer, scale, used = _quadrature(transform, t, current)
        err = np.abs(finer - value)
        bound = np.maximum(tol * np.abs(finer), 64.0 * EPS * scale)
        value = finer
        if np.all(err <= bound):
            return InversionResult(value, float(np.max(np.abs(np.imag(value)))), used, float(np.max(err)))
    raise ContourConvergenceError(
        f"contour quadrature did not converge at t={t} (estimated error {np.max(err):.2e})",
        float(np.max(err)),
    )


# ---------------------------------------------------------------------------
# Kernel-aware defaults
# ---------------------------------------------------------------------------
@lru_cache(maxsize=128)
def admissible_angle(k: MemoryKernel, n: MemoryKernel) -> float:
    """θ for the pair: closed form where known, sampled otherwise."""
    theta = analytic_sector_angle(k, n)
    if theta is not None:
        return min(theta, math.pi / 2 - 1e-3)
    report = verify_assumptions(k, n, grid=SectorGrid())
    if not report.admissible:
        raise AdmissibilityError("kernel pair is not sector-admissible", report)
    return report.theta_max


def default_spec(k: MemoryKernel, n: MemoryKernel, arc_radius: float = 1.0, ray_nodes: int = 16,
                 arc_nodes: int = 64) -> ContourSpec:
    """α = π/2 + 0.6θ keeps the rays inside the sector with margin."""
    theta = admissible_angle(k, n)
    return ContourSpec(arc_radius=arc_radius, ray_angle=math.pi / 2 + 0.6 * theta,
                       ray_nodes=ray_nodes, arc_nodes=arc_nodes)


def checked_spec(k: MemoryKernel, n: MemoryKernel, spec: Optional[ContourSpec]) -> ContourSpec:
    """The default contour for the pair, or ``spec`` once its rays are inside the sector."""
    if spec is None:
        return default_spec(k, n)
    spec.check_sector(admissible_angle(k, n))
    return spec


def spec_from_numerics(k: MemoryKernel, n: MemoryKernel, numerics) -> ContourSpec:
    return default_spec(k, n, numerics.arc_radius, numerics.ray_order, numerics.arc_order)


def _symbols(k: MemoryKernel, n: MemoryKernel, lam: np.ndarray):
    return laplace_transform(k, lam), j_symbol(n, lam)


def _as_column(mu2) -> np.ndarray:
    return np.atleast_1d(np.asarray(mu2, dtype=float))[None, :]


def _invert_modes(transform: Transform, mu2, t: float, spec: ContourSpec, tol: float) -> InversionResult:
    result = invert(transform, t, spec, tol)
    if np.ndim(mu2) == 0:
        value = result.value.reshape(-1)[0]
        return InversionResult(value, result.imag_residual, result.nodes_used, result.est_error)
    return result


def mode_evolution_kernel(k: MemoryKernel, n: MemoryKernel, mu2, t: float,
                          spec: Optional[ContourSpec] = None, tol: float = 1e-10) -> InversionResult:
    """e_n(t): inverse transform of K̂/(λK̂ + μ²J); vectorised over μ²."""
    spec = checked_spec(k, n, spec)
    col = _as_column(mu2)

    def transform(lam):
        k_hat, j = _symbols(k, n, lam)
        return k_hat[:, None] / (lam[:, None] * k_hat[:, None] + col * j[:, None])

    return _invert_modes(transform, mu2, t, spec, tol)


def mode_forcing_kernel(k: MemoryKernel, n: MemoryKernel, mu2, t: float,
                        spec: Optional[ContourSpec] = None, tol: float = 1e-10) -> InversionResult:
    """ε_n(t): inverse transform of 1/(λK̂ + μ²J)."""
    spec = checked_spec(k, n, spec)
    col = _as_column(mu2)

    def transform(lam):
        k_hat, j = _symbols(k, n, lam)
        return 1.0 / (lam[:, None] * k_hat[:, None] + col * j[:, None])

    return _invert_modes(transform, mu2, t, spec, tol)


def psi(k: MemoryKernel, n: MemoryKernel, t: float, spec: Optional[ContourSpec] = None,
        tol: float = 1e-10) -> InversionResult:
    """Ψ(t): inverse transform of K̂/J."""
    spec = checked_spec(k, n, spec)

    def transform(lam):
        k_hat, j = _symbols(k, n, lam)
        return k_hat / j

    return invert(transform, t, spec, tol)


def phi(k: MemoryKernel, n: MemoryKernel, t: float, spec: Optional[ContourSpec] = None,
        tol: float = 1e-10) -> InversionResult:
    """Φ(t): inverse transform of K̂/(λ²J)."""
    spec = checked_spec(k, n, spec)

    def transform(lam):
        k_hat, j = _symbols(k, n, lam)
        return k_hat / (lam * lam * j)

    return invert(transform, t, spec, tol)


# ---------------------------------------------------------------------------
# Forcing tables: antiderivatives of ε_n sampled on a time grid
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ForcingTable:
    """
    E1_n(t) = ∫_0^t ε_n and E2_n(t) = ∫_0^t E1_n on the grid nodes, per mode.
    Convolutions with ε_n go through these so that the singularity of ε_n at
    t = 0 never has to be sampled.
    """
    grid: TimeGrid
    mu2: np.ndarray
    first: np.ndarray
    second: np.ndarray
    est_error: float = 0.0

    def at(self, index: int, values) -> np.ndarray:
        return antiderivative_convolution_at(self.first, self.second, values, self.grid.step, index)

    def coarsened(self) -> "ForcingTable":
        return ForcingTable(self.grid.coarsened(), self.mu2, self.first[::2], self.second[::2], self.est_error)


def forcing_table(k: MemoryKernel, n: MemoryKernel, mu2, grid: TimeGrid,
                  spec: Optional[ContourSpec] = None, tol: float = 1e-10) -> ForcingTable:
    spec = checked_spec(k, n, spec)
    col = _as_column(mu2)

    def transform(lam):
        k_hat, j = _symbols(k, n, lam)
        base = 1.0 / (lam[:, None] * (lam[:, None] * k_hat[:, None] + col * j[:, None]))
        return np.stack([base, base / lam[:, None]], axis=1)

    nodes = grid.nodes
    first = np.zeros((nodes.size, col.shape[1]))
    second = np.zeros_like(first)
    worst = 0.0
    for idx in range(1, nodes.size):
        result = invert(transform, float(nodes[idx]), spec, tol)
        first[idx] = result.value[0].real
        second[idx] = result.value[1].real
        worst = max(worst, result.est_error)
    logger.debug("forcing table: %d times x %d modes, est. error %.1e", nodes.size, col.shape[1], worst)
    return ForcingTable(grid, col[0].copy(), first, second, worst)


# ---------------------------------------------------------------------------
# Zero set of Ψ and sectorial bounds
# ---------------------------------------------------------------------------
@dataclass
class ZSetResult:
    zeros: List[float]
    identically_zero: bool
    times: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "identically_zero": self.identically_zero,
            "zeros": list(self.zeros),
            "psi_max": float(np.max(np.abs(self.values))) if self.values.size else 0.0,
        }


def z_set_scan(k: MemoryKernel, n: MemoryKernel, t_range: Sequence[float] = (0.1, 10.0),
               n_points: int = 200, spec: Optional[ContourSpec] = None, tol: float = 1e-8,
               root_tol: float = 1e-10) -> ZSetResult:
    """Sample Ψ on a grid, bracket sign changes and bisect them."""
    t_min, t_max = float(t_range[0]), float(t_range[1])
    if not (0.0 < t_min < t_max):
        raise InvalidTimeError(f"z-set scan needs 0 < t_min < t_max, got {t_range}")
    spec = checked_spec(k, n, spec)
    times = np.linspace(t_min, t_max, n_points)
    values = np.array([psi(k, n, float(t), spec).real for t in times])
    if np.all(np.abs(values) < tol):
        return ZSetResult([], True, times, values)

    zeros: List[float] = []
    for i in range(n_points - 1):
        left, right = values[i], values[i + 1]
        if left == 0.0:
            zeros.append(float(times[i]))
            continue
        if left * right >= 0.0:
            continue
        lo, hi, f_lo = float(times[i]), float(times[i + 1]), left
        while hi - lo > root_tol:
            mid = 0.5 * (lo + hi)
            f_mid = psi(k, n, mid, spec).real
            if f_lo * f_mid <= 0.0:
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        zeros.append(0.5 * (lo + hi))
    if values[-1] == 0.0:
        zeros.append(float(times[-1]))
    return ZSetResult(zeros, False, times, values)


def contour_rows(spec: ContourSpec) -> List[tuple]:
    """(index, segment, Re λ, Im λ, Re w, Im w) for every quadrature node."""
    path = build_contour(spec)
    n_ray = (len(path) - spec.arc_nodes) // 2
    segments = ["lower"] * n_ray + ["arc"] * spec.arc_nodes + ["upper"] * n_ray
    return [
        (i, seg, float(z.real), float(z.imag), float(w.real), float(w.imag))
        for i, (seg, z, w) in enumerate(zip(segments, path.nodes, path.weights))
    ]


def resolvent_bounds(k: MemoryKernel, n: MemoryKernel, basis: EigenBasis,
                     lam_samples: Optional[Sequence[complex]] = None, sigma0: float = 0.25,
                     theta: float = 0.0) -> dict:
    """
    Sampled constants of the two modal resolvent estimates:
    |λK̂|·|λK̂ + μ²J|^{-1} and |λK̂/J|^{σ0}·μ²|g_lift|·|λK̂/J + μ²|^{-1},
    maximised over modes and samples. ``*_slope`` is the log-log growth of the
    per-sample maximum between the lower and upper halves of the moduli; both
    estimates are bounded when the constants are finite and the slopes ≤ 0.05.
    """
    if lam_samples is None:
        grid = SectorGrid()
        lam = (grid.radii()[:, None] * np.exp(1j * grid.angles(theta))[None, :]).ravel()
    else:
        lam = np.asarray(lam_samples, dtype=complex).ravel()
    if lam.size < 4:
        raise GridResolutionError("resolvent bounds need at least 4 samples")
    k_hat, j = _symbols(k, n, lam)
    mu2 = basis.eigenvalues[None, :]
    ratio = (lam * k_hat / j)[:, None]
    first = np.abs(lam * k_hat)[:, None] / np.abs(lam[:, None] * k_hat[:, None] + mu2 * j[:, None])
    lift = np.abs(green_lift_coeffs(basis, "left"))[None, :]
    second = np.abs(ratio) ** sigma0 * mu2 * lift / np.abs(ratio + mu2)
    moduli = np.abs(lam)
    order = np.argsort(moduli)
    half = lam.size // 2

    def slope(values: np.ndarray) -> float:
        per_sample = values.max(axis=1)[order]
        lo, hi = per_sample[:half].max(), per_sample[half:].max()
        r_lo, r_hi = np.median(moduli[order][:half]), np.median(moduli[order][half:])
        if lo == 0.0 or r_hi <= r_lo:
            return 0.0
        return float(math.log(hi / lo) / math.log(r_hi / r_lo))

    out = {
        "evolution": float(first.max()),
        "evolution_slope": slope(first),
        "boundary": float(second.max()),
        "boundary_slope": slope(second),
        "sigma0": sigma0,
        "samples": int(lam.size),
        "modes": basis.n_max,
    }
    out["bounded"] = bool(
        np.isfinite(out["evolution"]) and np.isfinite(out["boundary"])
        and out["evolution_slope"] <= 0.05 and out["boundary_slope"] <= 0.05
    )
    return out


CONTOUR_HEADER = ("index", "segment", "re_lambda", "im_lambda", "re_weight", "im_weight")


def dump_contour_csv(spec: ContourSpec, path) -> Path:
    return write_csv(path, CONTOUR_HEADER, contour_rows(spec))
