"""
Full solutions assembled from the modal kernels, fractional-calculus helpers,
the Mittag-Leffler oracle and the endpoint-blowup reproduction.
"""
from __future__ import annotations
from dataclasses import dataclass, field
import logging
import math
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, rgamma

from systems.errors import EnvelopeError, GeometryError, GridResolutionError, InvalidTimeError, KernelDomainError
from systems.kernel_lab import (
    MemoryKernel,
    TimeGrid,
    antiderivative_convolution,
    convolve,
    fractional_integral_tables,
    nonuniform_convolution,
    resolvent_kernel,
)
from systems.laplace_contour import (
    ContourSpec,
    ForcingTable,
    default_spec,
    forcing_table,
    mode_evolution_kernel,
)
from systems.spectral_domain import (
    ControlGeometry,
    SpectralField,
    green_lift_coeffs,
    synthesize,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Signals and samples
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Scalar samples f(t_k) (boundary) or per-mode samples F_n(t_k) (distributed)."""
    grid: TimeGrid
    payload: np.ndarray

    def __post_init__(self):
        payload = np.asarray(self.payload, dtype=float)
        if payload.ndim not in (1, 2) or payload.shape[0] != self.grid.steps + 1:
            raise GridResolutionError(
                f"signal has {payload.shape[0] if payload.ndim else 0} samples for a grid of {self.grid.steps + 1} nodes"
            )
        object.__setattr__(self, "payload", payload)

    @classmethod
    def scalar(cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "ControlSignal":
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.nodes), dtype=float), (grid.steps + 1,)).copy())

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "ControlSignal":
        return cls(grid, np.full(grid.steps + 1, float(value)))

    @classmethod
    def separable(cls, grid: TimeGrid, profile: SpectralField,
                  time_fn: Callable[[np.ndarray], np.ndarray]) -> "ControlSignal":
        """F(x, t) = time_fn(t)·profile(x), profile already injected into the basis."""
        return cls(grid, np.outer(np.asarray(time_fn(grid.nodes), dtype=float), profile.coeffs))

    @property
    def is_boundary(self) -> bool:
        return self.payload.ndim == 1

    def __add__(self, other: "ControlSignal") -> "ControlSignal":
        return ControlSignal(self.grid, self.payload + other.payload)

    def __mul__(self, factor: float) -> "ControlSignal":
        return ControlSignal(self.grid, self.payload * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    state: SpectralField


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------
def evolve_free(w0: SpectralField, t: float, k: MemoryKernel, n: MemoryKernel,
                spec: Optional[ContourSpec] = None) -> SpectralField:
    """E(t)w0, mode by mode."""
    if t < 0.0:
        raise InvalidTimeError(f"evolution time must be non-negative, got {t}")
    if t == 0.0:
        return SpectralField(w0.basis, w0.coeffs.copy())
    e = mode_evolution_kernel(k, n, w0.basis.eigenvalues, t, spec).real
    return w0.scaled(e)


def _signal_index(signal: ControlSignal, t: float) -> int:
    if t > signal.grid.horizon * (1.0 + 1e-12):
        raise InvalidTimeError(f"t={t} beyond the signal horizon {signal.grid.horizon}")
    index = signal.grid.index_of(t)
    if index is None:
        raise GridResolutionError(f"t={t} is not a node of the signal grid")
    return index


def _checked_convolution(table: ForcingTable, index: int, values: np.ndarray, tol: Optional[float]) -> np.ndarray:
    fine = table.at(index, values)
    if tol is None or index % 2 or table.grid.steps % 2 or index < 4:
        return fine
    coarse = table.coarsened().at(index // 2, values[::2])
    estimate = float(np.max(np.abs(fine - coarse))) / 3.0
    if estimate > tol * max(1.0, float(np.max(np.abs(fine)))):
        raise GridResolutionError(f"convolution error estimate {estimate:.2e} exceeds tolerance {tol:.1e}")
    return fine


def _table_for(k, n, basis, grid, spec, table):
    if table is not None:
        if table.grid != grid or table.mu2.size != basis.n_max:
            raise GridResolutionError("forcing table does not match the signal grid or basis")
        return table
    return forcing_table(k, n, basis.eigenvalues, grid, spec)


def solve_distributed(w0: SpectralField, forcing: ControlSignal, t: float, k: MemoryKernel, n: MemoryKernel,
                      spec: Optional[ContourSpec] = None, table: Optional[ForcingTable] = None,
                      conv_tol: Optional[float] = 1e-3) -> SpectralField:
    """e_n(t)w0_n + ∫_0^t ε_n(t-s)F_n(s)ds."""
    if forcing.is_boundary:
        raise GeometryError("distributed solve needs a per-mode signal")
    if forcing.payload.shape[1] != w0.basis.n_max:
        raise GeometryError("signal and initial state use different mode counts")
    index = _signal_index(forcing, t)
    free = evolve_free(w0, t, k, n, spec)
    if index == 0:
        return free
    table = _table_for(k, n, w0.basis, forcing.grid, spec, table)
    return free + SpectralField(w0.basis, _checked_convolution(table, index, forcing.payload, conv_tol))


def combined_boundary_signal(f: ControlSignal, n: MemoryKernel) -> np.ndarray:
    """g = f + N*f on the signal grid."""
    if n.is_zero:
        return f.payload.copy()
    return f.payload + convolve(n, f.payload, f.grid)


def recover_boundary_signal(g: ControlSignal, n: MemoryKernel) -> np.ndarray:
    """Inverse of f ↦ f + N*f through the resolvent: f = g - R*g."""
    if n.is_zero:
        return g.payload.copy()
    resolvent = resolvent_kernel(n, g.grid)
    return g.payload - resolvent.convolve(g.payload)


def solve_boundary(w0: SpectralField, f: ControlSignal, geometry: ControlGeometry, t: float,
                   k: MemoryKernel, n: MemoryKernel, spec: Optional[ContourSpec] = None,
                   table: Optional[ForcingTable] = None, conv_tol: Optional[float] = 1e-3) -> SpectralField:
    """e_n(t)w0_n + μ_n² g_n^lift ∫_0^t ε_n(t-s)g(s)ds with g = f + N*f."""
    if not geometry.is_boundary:
        raise GeometryError("boundary solve needs a boundary geometry")
    if not f.is_boundary:
        raise GeometryError("boundary solve needs a scalar signal")
    index = _signal_index(f, t)
    free = evolve_free(w0, t, k, n, spec)
    if index == 0:
        return free
    basis = w0.basis
    table = _table_for(k, n, basis, f.grid, spec, table)
    g = combined_boundary_signal(f, n)
    response = _checked_convolution(table, index, g, conv_tol)
    return free + SpectralField(basis, basis.eigenvalues * green_lift_coeffs(basis, geometry.side) * response)


def solve(w0: SpectralField, t: float, k: MemoryKernel, n: MemoryKernel, spec: Optional[ContourSpec] = None,
          forcing: Optional[ControlSignal] = None, boundary: Optional[ControlSignal] = None,
          geometry: Optional[ControlGeometry] = None) -> SpectralField:
    """Superposition of free, distributed and boundary parts."""
    state = evolve_free(w0, t, k, n, spec)
    zero = SpectralField.zeros(w0.basis)
    if forcing is not None:
        state = state + solve_distributed(zero, forcing, t, k, n, spec)
    if boundary is not None:
        state = state + solve_boundary(zero, boundary, geometry or ControlGeometry.boundary("left"), t, k, n, spec)
    return state


def trajectory(w0: SpectralField, grid: TimeGrid, k: MemoryKernel, n: MemoryKernel, samples: int = 11,
               spec: Optional[ContourSpec] = None, boundary: Optional[ControlSignal] = None,
               geometry: Optional[ControlGeometry] = None) -> List[TrajectorySample]:
    """States at ``samples`` evenly spaced grid nodes, reusing one forcing table."""
    spec = spec or default_spec(k, n)
    stride = max(1, grid.steps // max(1, samples - 1))
    indices = sorted(set(list(range(0, grid.steps + 1, stride)) + [grid.steps]))
    table = None
    g = None
    lift = None
    if boundary is not None:
        geometry = geometry or ControlGeometry.boundary("left")
        table = forcing_table(k, n, w0.basis.eigenvalues, grid, spec)
        g = combined_boundary_signal(boundary, n)
        lift = w0.basis.eigenvalues * green_lift_coeffs(w0.basis, geometry.side)
    out = []
    for index in indices:
        t = float(grid.nodes[index])
        state = evolve_free(w0, t, k, n, spec)
        if table is not None and index > 0:
            state = state + SpectralField(w0.basis, lift * table.at(index, g))
        out.append(TrajectorySample(t, state))
    return out


def trajectory_rows(samples: Sequence[TrajectorySample]) -> List[Tuple[float, int, float]]:
    return [(s.t, n, c) for s in samples for n, c in s.state.csv_rows()]


def snapshot_rows(samples: Sequence[TrajectorySample], x) -> List[Tuple[float, float, float]]:
    x = np.asarray(x, dtype=float)
    rows = []
    for s in samples:
        rows.extend((s.t, float(xi), float(wi)) for xi, wi in zip(x, synthesize(s.state, x)))
    return rows


# ---------------------------------------------------------------------------
# Fractional calculus
# ---------------------------------------------------------------------------
Nodes = Union[TimeGrid, np.ndarray, Sequence[float]]


def _apply_power_kernel(order: float, values, nodes: Nodes) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if isinstance(nodes, TimeGrid):
        first, second = fractional_integral_tables(order, nodes.nodes)
        return antiderivative_convolution(first, second, values, nodes.step)
    return nonuniform_convolution(
        lambda tau: np.power(tau, order) * rgamma(order + 1.0),
        lambda tau: np.power(tau, order + 1.0) * rgamma(order + 2.0),
        values, np.asarray(nodes, dtype=float),
    )


def _leading_power(values: np.ndarray, nodes: np.ndarray) -> Optional[Tuple[float, float]]:
    """(c, β) with u(t) - u(0) ≈ c·t^β, read off the first two nodes after t = 0."""
    if nodes.size < 3 or nodes[0] != 0.0:
        return None
    v1, v2 = values[1] - values[0], values[2] - values[0]
    if v1 == 0.0 or v1 * v2 <= 0.0:
        return None
    beta = math.log(v2 / v1) / math.log(nodes[2] / nodes[1])
    if not 0.0 < beta <= 8.0:
        return None
    return v1 / nodes[1] ** beta, beta


def riemann_liouville(sigma: float, signal, grid: Nodes) -> np.ndarray:
    """
    (J^σ u)(t_k) by product integration with exact power moments. The leading
    power c·t^β of u - u(0) is integrated in closed form and only the remainder
    is interpolated, so the first panels keep full accuracy for u ~ t^β.
    """
    if not (0.0 < sigma < 1.0):
        raise KernelDomainError(f"fractional order must lie in (0, 1), got {sigma}")
    values = np.asarray(signal, dtype=float)
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    lead = _leading_power(values, nodes)
    if lead is None:
        return _apply_power_kernel(sigma, values, grid)
    c, beta = lead
    head = c * np.power(nodes, beta)
    exact = c * math.exp(gammaln(beta + 1.0)) * rgamma(beta + 1.0 + sigma) * np.power(nodes, beta + sigma)
    return exact + _apply_power_kernel(sigma, values - head, grid)


def caputo_derivative(alpha: float, signal, grid: Nodes) -> np.ndarray:
    """∂_t^α u = J^{1-α} u' for piecewise-linear u."""
    if not (0.0 < alpha < 1.0):
        raise KernelDomainError(f"derivative order must lie in (0, 1), got {alpha}")
    values = np.asarray(signal, dtype=float)
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    order = 1.0 - alpha
    slopes = np.diff(values) / np.diff(nodes)
    out = np.zeros_like(values)
    for m in range(1, nodes.size):
        lags = nodes[m] - nodes[: m + 1]
        e1 = np.power(lags, order) * rgamma(order + 1.0)
        out[m] = np.sum(slopes[:m] * (e1[:-1] - e1[1:]))
    return out


# ---------------------------------------------------------------------------
# Mittag-Leffler oracle
# ---------------------------------------------------------------------------
ML_ENVELOPE = 80.0
_MAX_TERMS = 20000
_MAX_DIGITS = 800
_SPECTRAL_FROM = 5.0
_EXP_LIMIT = 700.0

MLMethod = Literal["auto", "series", "spectral"]


def _series_plan(a: float, b: float, z: float) -> Optional[Tuple[int, int]]:
    """(terms, decimal digits) for the power series, or None if too costly."""
    x = abs(z)
    if x == 0.0:
        return 1, 20
    k = np.arange(_MAX_TERMS)
    logs = k * math.log(x) - gammaln(a * k + b)
    peak = max(0.0, float(logs.max()))
    # positive terms only need to be small against the sum, alternating ones in absolute terms
    floor = math.log(1e-22) + (peak if z > 0.0 else 0.0)
    alive = np.nonzero(logs > floor)[0]
    terms = int(alive[-1]) + 2 if alive.size else 1
    if terms >= _MAX_TERMS:
        return None
    cancellation = peak / math.log(10.0) if z < 0.0 else 0.0
    digits = 25 + int(cancellation)
    if digits > _MAX_DIGITS:
        return None
    return terms, digits


def _ml_series(a: float, b: float, z: float, terms: int, digits: int) -> float:
    with mpmath.workdps(digits):
        zz = mpmath.mpf(z)
        a_, b_ = mpmath.mpf(a), mpmath.mpf(b)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        for k in range(terms):
            total += power * mpmath.rgamma(a_ * k + b_)
            power *= zz
        return float(total)


def _ml_integral(a: float, b: float, z: float) -> float:
    """
    E_{a,b}(z) for 0 < a < 1, b < 1 + a, real z ≠ 0, from the integral of the
    Hankel representation over the collapsed branch cut (r = u|z|), plus the
    exp(z^{1/a}) pole term when z > 0.
    """
    x = abs(z)
    sign = 1.0 if z > 0.0 else -1.0
    power = (1.0 - b) / a
    cos_term = math.cos(a * math.pi)
    s1 = math.sin(math.pi * (1.0 - b))
    s2 = math.sin(math.pi * (1.0 - b + a))
    inv = 1.0 / a
    cutoff = 745.0 ** a

    def smooth(u):
        if u * x > cutoff:
            return 0.0
        return math.exp(-((u * x) ** inv)) * (u * s1 - sign * s2) / (u * u - 2.0 * sign * u * cos_term + 1.0)

    breaks = sorted({min(1.0 / x, 1.0), max(1.0 / x, 1.0)})
    # u^power is integrable at 0 but not smooth; the algebraic weight absorbs it
    total, _ = quad(smooth, 0.0, breaks[0], weight="alg", wvar=(power, 0.0), epsabs=0.0, epsrel=1e-13)
    edges = breaks + [math.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            value, _ = quad(lambda u: u ** power * smooth(u), lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
            total += value
    total *= x ** power / (a * math.pi)
    if z > 0.0:
        total += inv * x ** power * math.exp(x ** inv)
    return total


def _ml_reduced(a: float, b: float, z: float) -> float:
    """Lower b below 1 + a with E_{a,b}(z) = (E_{a,b-a}(z) - 1/Γ(b-a))/z."""
    if b < 1.0 + a:
        return _ml_integral(a, b, z)
    return (_ml_reduced(a, b - a, z) - float(rgamma(b - a))) / z


def mittag_leffler(a: float, b: float, z: float, method: MLMethod = "auto") -> float:
    """E_{a,b}(z) = Σ z^k/Γ(ak+b) for real z with |z| ≤ 80."""
    if a <= 0.0 or b <= 0.0:
        raise KernelDomainError(f"Mittag-Leffler parameters must be positive, got a={a}, b={b}")
    if abs(z) > ML_ENVELOPE:
        raise EnvelopeError(f"|z| = {abs(z)} exceeds the evaluation envelope {ML_ENVELOPE}")
    if z > 0.0 and z ** (1.0 / a) > _EXP_LIMIT:
        raise EnvelopeError(f"E_{{{a},{b}}}({z}) grows like exp({z ** (1.0 / a):.3g}) and overflows a double")
    if method == "auto":
        if a == 1.0 and b == 1.0:
            return math.exp(z)
        if a == 2.0 and b == 1.0:
            return math.cos(math.sqrt(-z)) if z <= 0.0 else math.cosh(math.sqrt(z))
    integral_ok = 0.0 < a < 1.0 and z != 0.0
    if method == "spectral" or (method == "auto" and integral_ok and abs(z) > _SPECTRAL_FROM):
        if not integral_ok:
            raise EnvelopeError(f"no integral representation for a={a}, z={z}")
        return _ml_reduced(a, b, z)
    plan = _series_plan(a, b, z)
    if plan is None:
        if integral_ok and method == "auto":
            return _ml_reduced(a, b, z)
        raise EnvelopeError(f"series for E_{{{a},{b}}}({z}) needs more precision than the envelope allows")
    return _ml_series(a, b, z, *plan)


# ---------------------------------------------------------------------------
# Endpoint blowup of J^{1-γ}F with F(s) = (T - s)^{γ-1}
# ---------------------------------------------------------------------------
@dataclass
class BlowupResult:
    epsilon: float
    horizon: float
    times: np.ndarray
    raw_integral: np.ndarray
    displayed: np.ndarray
    fractional: np.ndarray
    displayed_bound: np.ndarray
    fractional_bound: np.ndarray
    monotone_tail: bool
    bound_holds: bool = field(default=False)

    def rows(self) -> List[Tuple[float, float, float, float, float]]:
        return [
            (float(t), float(d), float(db), float(f), float(fb))
            for t, d, db, f, fb in zip(self.times, self.displayed, self.displayed_bound,
                                       self.fractional, self.fractional_bound)
        ]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "T": self.horizon,
            "final_time": float(self.times[-1]),
            "final_displayed": float(self.displayed[-1]),
            "final_displayed_bound": float(self.displayed_bound[-1]),
            "final_fractional": float(self.fractional[-1]),
            "final_fractional_bound": float(self.fractional_bound[-1]),
            "bound_holds": self.bound_holds,
            "monotone_tail": self.monotone_tail,
        }


def blowup_grid(horizon: float, steps_per_unit: int = 512, refinement_nodes: int = 512,
                closest: float = 1e-4, graded_fraction: float = 0.25) -> np.ndarray:
    """
    Uniform nodes up to T - graded_fraction·T, then geometric gaps down to T - closest.
    F = (T - s)^{γ-1} is interpolated linearly, so its relative error on a panel
    goes with the squared gap ratio and the grading has to start well away from T.
    """
    start = graded_fraction * horizon
    steps = max(2, int(round((horizon - start) * steps_per_unit)))
    if not (0.0 < closest < start < horizon):
        raise GridResolutionError("closest approach must lie inside the graded part of the grid")
    uniform = np.linspace(0.0, horizon - start, steps, endpoint=False)
    gaps = np.geomspace(start, closest, refinement_nodes + 1)
    return np.concatenate([uniform, horizon - gaps])


def example_A2_blowup(epsilon: float, horizon: float = 1.0, nodes: Optional[np.ndarray] = None,
                      steps_per_unit: int = 512, refinement_nodes: int = 512) -> BlowupResult:
    """
    ∫_0^t (t-s)^{-γ}(T-s)^{γ-1} ds on a grid refined toward T, γ = 1/2 + ε, under two
    normalisations: 1/Γ(γ) (the one the comparison bound is stated with) and
    1/Γ(1-γ) (the true fractional integral J^{1-γ}). Both stay above
    log(T/(T-t)) times their prefactor and diverge as t → T.
    """
    if not (0.0 < epsilon < 0.25):
        raise KernelDomainError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    gamma_ = 0.5 + epsilon
    times = blowup_grid(horizon, steps_per_unit, refinement_nodes) if nodes is None else np.asarray(nodes, float)
    if times[-1] >= horizon:
        raise GridResolutionError("blowup grid must stay strictly below T")
    forcing = np.power(horizon - times, gamma_ - 1.0)
    order = 1.0 - gamma_
    raw = nonuniform_convolution(
        lambda tau: np.power(tau, order) / order,
        lambda tau: np.power(tau, order + 1.0) / (order * (order + 1.0)),
        forcing, times,
    )
    log_gap = math.log(horizon) - np.log(horizon - times)
    displayed = raw * rgamma(gamma_)
    fractional = raw * rgamma(order)
    displayed_bound = log_gap * rgamma(gamma_)
    fractional_bound = log_gap * rgamma(order)
    tail = times >= 0.9 * horizon
    monotone = bool(np.all(np.diff(fractional[tail]) > 0.0))
    holds = bool(np.all(displayed >= displayed_bound - 1e-12) and np.all(fractional >= fractional_bound - 1e-12))
    logger.debug("blowup ε=%.3f: final displayed %.4f, fractional %.4f", epsilon, displayed[-1], fractional[-1])
    return BlowupResult(epsilon, horizon, times, raw, displayed, fractional, displayed_bound,
                        fractional_bound, monotone, holds)
