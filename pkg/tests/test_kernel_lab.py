import math

import numpy as np
import pytest
from scipy.special import erfcx

from systems.errors import ConfigError, GridResolutionError, KernelDomainError
from systems.kernel_lab import (
    MemoryKernel,
    TimeGrid,
    analytic_sector_angle,
    convolve,
    format_kernel,
    laplace_quadrature,
    laplace_transform,
    max_sector_angle_case3,
    parse_kernel,
    reducibility_constant,
    resolvent_kernel,
    sampled_resolvent,
    symbol_ratio,
    verify_assumptions,
)


def test_power_law_transform_principal_branch():
    k = MemoryKernel.power_law(0.5, "K")
    assert laplace_transform(k, 1.0) == pytest.approx(1.0)
    assert laplace_transform(k, 4.0) == pytest.approx(0.5)
    lam = 2.0 * np.exp(1j * 2.5)
    assert laplace_transform(k, lam) == pytest.approx(lam ** -0.5)


def test_exp_sum_transform():
    assert laplace_transform(MemoryKernel.exp_sum([(2.0, 3.0)]), 1.0) == pytest.approx(0.5)


def test_delta_weight_adds_constant():
    k = MemoryKernel.exp_sum([(2.0, 3.0)], delta_weight=1.5)
    assert laplace_transform(k, 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("lam", [0.0, -1.0, -3.5])
def test_transform_rejects_cut(lam):
    with pytest.raises(KernelDomainError):
        laplace_transform(MemoryKernel.power_law(0.5), lam)


@pytest.mark.parametrize("lam", [1.0, 2.5 + 1.0j, 4.0 - 3.0j])
def test_exp_sum_matches_numerical_transform(lam):
    kernel = MemoryKernel.exp_sum([(2.0, 3.0), (0.5, 1.0)])
    numeric = laplace_quadrature(lambda t: float(kernel.regular(t)), lam)
    exact = laplace_transform(kernel, lam)
    assert abs(numeric - exact) / abs(exact) < 1e-6


def test_power_law_matches_numerical_transform():
    kernel = MemoryKernel.power_law(0.5, "K")
    numeric = laplace_quadrature(lambda t: float(kernel.regular(t)), 4.0)
    assert numeric.real == pytest.approx(0.5, rel=1e-6)


def test_invalid_kernel_parameters():
    with pytest.raises(KernelDomainError):
        MemoryKernel.power_law(1.2)
    with pytest.raises(KernelDomainError):
        MemoryKernel.exp_sum([(1.0, 0.0)])
    with pytest.raises(KernelDomainError):
        MemoryKernel.delta(-1.0)


@pytest.mark.parametrize("text", [
    "delta",
    "0",
    "2.0*delta + powerlaw(0.5, K)",
    "expsum(1.0:1.0, 0.5:2.0)",
    "3.0*powerlaw(0.25, N)",
])
def test_kernel_text_round_trip(text):
    kernel = parse_kernel(text)
    assert parse_kernel(format_kernel(kernel)) == kernel


def test_power_law_scale_keyword():
    kernel = parse_kernel("powerlaw(0.5, N, scale=2)")
    assert kernel.singular_part.scale == 2.0
    assert kernel.singular_part.role == "N"
    assert laplace_transform(kernel, 4.0) == pytest.approx(1.0)


def test_unparseable_kernel():
    with pytest.raises(ConfigError):
        parse_kernel("gaussian(1)")
    with pytest.raises(ConfigError):
        parse_kernel("powerlaw(0.5, K) + expsum(1:1)")


def test_symbol_ratio_heat():
    k, n = MemoryKernel.delta(), MemoryKernel.zero()
    assert symbol_ratio(k, n, 2.0 + 1.0j) == pytest.approx(2.0 + 1.0j)


# -- sector analysis -------------------------------------------------------
def test_closed_form_sector_angle():
    assert max_sector_angle_case3(0.5, 0.5) == pytest.approx(math.pi / 2)
    assert max_sector_angle_case3(0.9, 0.9) == pytest.approx(0.2 / 1.8 * math.pi / 2)
    k, n = MemoryKernel.delta(), MemoryKernel.power_law(0.5, "N")
    assert analytic_sector_angle(k, n) == pytest.approx(math.pi / 6)
    assert analytic_sector_angle(MemoryKernel.delta(), MemoryKernel.exp_sum([(1.0, 1.0)])) is None


@pytest.mark.parametrize("alpha,gamma_", [(0.5, 0.5), (0.9, 0.9), (0.7, 0.3)])
def test_sampled_sector_matches_closed_form(alpha, gamma_):
    k = MemoryKernel.power_law(alpha, "K")
    n = MemoryKernel.power_law(gamma_, "N")
    report = verify_assumptions(k, n)
    expected = min(max_sector_angle_case3(alpha, gamma_), math.pi / 2 - 1e-3)
    assert report.admissible
    assert report.theta_max == pytest.approx(expected, rel=0.05)


def test_sector_angle_shrinks_near_order_one():
    k = MemoryKernel.power_law(0.95, "K")
    n = MemoryKernel.power_law(0.95, "N")
    report = verify_assumptions(k, n)
    assert report.admissible
    assert report.theta_max <= 0.0827
    assert report.theta_max == pytest.approx(max_sector_angle_case3(0.95, 0.95), rel=0.05)


def test_heat_is_admissible():
    report = verify_assumptions(MemoryKernel.delta(), MemoryKernel.zero())
    assert report.admissible
    assert all(report.asymptotic_flags.values())


def test_bounded_k_fails_growth_flag():
    report = verify_assumptions(MemoryKernel.exp_sum([(1.0, 1.0)]), MemoryKernel.zero())
    assert not report.asymptotic_flags["growth"]
    assert report.theta_max == 0.0
    assert not report.admissible


def test_reducibility_constant():
    n = MemoryKernel.exp_sum([(1.0, 1.0)])
    lam = np.logspace(-2, 2, 20) * np.exp(0.3j)
    constant, _ = reducibility_constant(MemoryKernel.reducible(n, 2.0), n, lam)
    assert constant == pytest.approx(2.0)
    constant, deviation = reducibility_constant(MemoryKernel.delta(), n, lam)
    assert constant is None
    assert deviation > 1e-3


# -- grids and convolution ---------------------------------------------------
def test_time_grid_nodes():
    grid = TimeGrid.from_rate(2.0, 8)
    assert grid.steps == 16
    assert grid.step == pytest.approx(0.125)
    assert grid.index_of(0.5) == 4
    assert grid.index_of(0.51) is None


def test_convolution_with_power_law_is_exact_on_constants():
    grid = TimeGrid(1.0, 64)
    values = convolve(MemoryKernel.power_law(0.5, "N"), np.ones(65), grid)
    exact = np.sqrt(grid.nodes) / math.gamma(1.5)
    np.testing.assert_allclose(values, exact, atol=1e-12)


def test_convolution_delta_part():
    grid = TimeGrid(1.0, 32)
    u = np.sin(grid.nodes)
    np.testing.assert_allclose(convolve(MemoryKernel.delta(2.0), u, grid), 2.0 * u, atol=1e-14)


# -- resolvent ---------------------------------------------------------------
def test_exponential_resolvent_closed_form():
    a, b = 2.0, 1.5
    grid = TimeGrid(2.0, 512)
    resolvent = resolvent_kernel(MemoryKernel.exp_sum([(a, b)]), grid)
    np.testing.assert_allclose(resolvent.values, a * np.exp(-(a + b) * grid.nodes), atol=1e-8)


def test_abel_resolvent():
    grid = TimeGrid(2.0, 512)
    resolvent = resolvent_kernel(MemoryKernel.power_law(0.5, "N"), grid)
    t = grid.nodes[1:]
    exact = 1.0 / np.sqrt(math.pi * t) - erfcx(np.sqrt(t))
    assert resolvent.singular
    assert np.isinf(resolvent.values[0])
    assert np.max(np.abs(resolvent.values[1:] - exact)) < 1e-5


def test_resolvent_inverse_pair_identity():
    kernel = MemoryKernel.exp_sum([(2.0, 1.5)])
    grid = TimeGrid(2.0, 2048)
    resolvent = resolvent_kernel(kernel, grid)
    rebuilt = resolvent.values + convolve(kernel, resolvent.values, grid)
    np.testing.assert_allclose(rebuilt, kernel.regular(grid.nodes), atol=1e-5)


def test_zero_kernel_resolvent_vanishes():
    grid = TimeGrid(1.0, 16)
    resolvent = resolvent_kernel(MemoryKernel.zero(), grid)
    assert not np.any(resolvent.values)


def test_resolvent_of_the_resolvent():
    # N = 2e^{-1.5t} → R = 2e^{-3.5t} → R₂ = 2e^{-5.5t}
    grid = TimeGrid(2.0, 2048)
    resolvent = resolvent_kernel(MemoryKernel.exp_sum([(2.0, 1.5)]), grid)
    second = resolvent.resolvent()
    np.testing.assert_allclose(second.values, 2.0 * np.exp(-5.5 * grid.nodes), atol=1e-5)
    np.testing.assert_allclose(second.values + resolvent.convolve(second.values), resolvent.values, atol=1e-5)
    # R*R₂ = R₂*R
    np.testing.assert_allclose(resolvent.convolve(second.values), second.convolve(resolvent.values), atol=1e-5)
    assert second.residual < 1e-10


def test_sampled_resolvent_needs_finite_samples():
    grid = TimeGrid(2.0, 64)
    abel = resolvent_kernel(MemoryKernel.power_law(0.5, "N"), grid)
    with pytest.raises(KernelDomainError):
        abel.resolvent()
    with pytest.raises(GridResolutionError):
        sampled_resolvent(np.ones(10), grid)
