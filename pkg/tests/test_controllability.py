import math

import numpy as np
import pytest

from systems.controllability import (
    ControlBasis,
    forward_map,
    null_control_certificate,
    obstruction_ratio,
    reducibility_test,
    residual_curve,
    synthesize_control,
)
from systems.errors import GeometryError, RegularizationRequiredError
from systems.kernel_lab import TimeGrid, parse_kernel
from systems.laplace_contour import forcing_table, z_set_scan
from systems.spectral_domain import ControlGeometry, EigenBasis, SpectralField

STEPS = 128


@pytest.fixture
def small_basis():
    return EigenBasis(math.pi, 8)


def test_time_atoms_vanish_at_both_ends():
    grid = TimeGrid(2.0, 32)
    profiles = ControlBasis("boundary", 5).time_profiles(grid)
    assert profiles.shape == (5, 33)
    np.testing.assert_allclose(profiles[:, [0, -1]], 0.0, atol=1e-15)


def test_control_basis_validation():
    with pytest.raises(GeometryError):
        ControlBasis("distributed", 3, 0)
    with pytest.raises(GeometryError):
        ControlBasis("pointwise", 3)
    assert ControlBasis("distributed", 3, 4).size == 12
    assert ControlBasis("boundary", 3).extended(6).size == 6


def test_forward_map_rejects_mismatched_geometry(heat, small_basis):
    table = forcing_table(*heat, small_basis.eigenvalues, TimeGrid(1.0, 8))
    with pytest.raises(GeometryError):
        forward_map(ControlBasis("boundary", 2), ControlGeometry.distributed(0.0, 1.0),
                    small_basis, table, heat[1])


def test_exact_recovery_of_reachable_target(heat, small_basis):
    k, n = heat
    geometry = ControlGeometry.boundary("left")
    control = ControlBasis("boundary", 3)
    table = forcing_table(k, n, small_basis.eigenvalues, TimeGrid.from_rate(1.0, STEPS))
    matrix = forward_map(control, geometry, small_basis, table, n)
    target = SpectralField(small_basis, matrix @ np.array([1.0, -0.5, 0.25]))
    result = synthesize_control(target, 1.0, control, geometry, k, n, rho=0.0, table=table)
    assert result.residual < 1e-8


def test_linearity_of_synthesis(heat, small_basis):
    k, n = heat
    geometry = ControlGeometry.distributed(0.0, 1.5)
    control = ControlBasis("distributed", 2, 2)
    table = forcing_table(k, n, small_basis.eigenvalues, TimeGrid.from_rate(1.0, STEPS))
    target = SpectralField.unit(small_basis, 2)
    base = synthesize_control(target, 1.0, control, geometry, k, n, table=table)
    scaled = synthesize_control(target * 3.0, 1.0, control, geometry, k, n, table=table)
    assert scaled.residual == pytest.approx(3.0 * base.residual, rel=1e-6)
    np.testing.assert_allclose(scaled.coefficients, 3.0 * base.coefficients, rtol=1e-6)


def test_rank_deficient_gram_needs_regularization(heat, small_basis):
    k, n = heat
    table = forcing_table(k, n, small_basis.eigenvalues, TimeGrid.from_rate(1.0, 32))
    target = SpectralField.unit(small_basis, 1)
    with pytest.raises(RegularizationRequiredError):
        synthesize_control(target, 1.0, ControlBasis("boundary", 16), ControlGeometry.boundary("left"),
                           k, n, rho=0.0, table=table)
    with pytest.raises(RegularizationRequiredError):
        synthesize_control(target, 1.0, ControlBasis("boundary", 2), ControlGeometry.boundary("left"),
                           k, n, rho=-1.0, table=table)


def test_heat_distributed_control(heat, basis):
    curve = residual_curve(SpectralField.unit(basis, 1), 1.0, ControlBasis("distributed", 2, 4),
                           ControlGeometry.distributed(0.0, math.pi), *heat, [2, 4, 8],
                           steps_per_unit=STEPS)
    residuals = [r.residual for r in curve]
    assert all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))
    assert residuals[-1] < 1e-2


@pytest.mark.slow
def test_fractional_residuals_decrease(fractional, basis):
    curve = residual_curve(SpectralField.unit(basis, 1), 1.0, ControlBasis("distributed", 2, 4),
                           ControlGeometry.distributed(0.0, math.pi), *fractional, [2, 4, 8, 16],
                           steps_per_unit=STEPS)
    residuals = [r.residual for r in curve]
    assert all(b < a for a, b in zip(residuals, residuals[1:]))
    assert residuals[-1] < 1e-2


# -- obstruction -------------------------------------------------------------
def test_obstruction_ratio_tends_to_one(fractional):
    result = obstruction_ratio(*fractional, 1.0, [8, 16, 32])
    assert result.obstructed
    assert result.ratios[-1] == pytest.approx(1.0, rel=0.05)
    assert abs(result.ratios[-1] - 1.0) < abs(result.ratios[0] - 1.0)


def test_heat_has_no_obstruction(heat):
    result = obstruction_ratio(*heat, 1.0, [8, 16])
    assert result.ratios == []
    assert result.message == "no obstruction at this T"


def test_certificate_gate_for_smooth_state(fractional, basis):
    report = null_control_certificate(SpectralField.unit(basis, 1), 1.0, *fractional,
                                      ControlGeometry.distributed(0.0, math.pi / 2))
    assert not report.applicable
    assert "inapplicable" in report.message
    assert not report.obstructed


def test_certificate_needs_proper_subset(fractional, basis):
    w0 = SpectralField.from_modes(basis, lambda m: 1.0 / m)
    with pytest.raises(GeometryError):
        null_control_certificate(w0, 1.0, *fractional, ControlGeometry.distributed(0.0, math.pi))


@pytest.mark.slow
def test_fractional_residual_floor_exceeds_heat(heat, fractional):
    basis = EigenBasis(math.pi, 32)
    w0 = SpectralField.from_modes(basis, lambda m: 1.0 / m)
    geometry = ControlGeometry.distributed(0.0, math.pi / 2)
    kwargs = dict(sizes=(4, 8, 16, 32), steps_per_unit=STEPS)
    heat_report = null_control_certificate(w0, 0.5, *heat, geometry, **kwargs)
    frac_report = null_control_certificate(w0, 0.5, *fractional, geometry, **kwargs)
    heat_curve = [heat_report.residuals[m] for m in (4, 8, 16, 32)]
    assert all(b <= a + 1e-12 for a, b in zip(heat_curve, heat_curve[1:]))
    assert frac_report.residuals[32] > 10.0 * heat_report.residuals[32]


# -- reducibility ------------------------------------------------------------
@pytest.mark.parametrize("k_text,n_text,expected", [
    ("2*delta + expsum(2:1)", "expsum(1:1)", 2.0),
    ("delta + powerlaw(0.5, N)", "powerlaw(0.5, N)", 1.0),
    ("delta", "0", 1.0),
    ("delta", "expsum(1:1)", None),
    ("powerlaw(0.5, K)", "0", None),
])
def test_reducibility(k_text, n_text, expected):
    result = reducibility_test(parse_kernel(k_text, "K"), parse_kernel(n_text, "N"))
    if expected is None:
        assert not result.reducible
    else:
        assert result.constant == pytest.approx(expected)


def test_reducibility_needs_samples(heat):
    with pytest.raises(ValueError):
        reducibility_test(*heat, lam_samples=[1.0, 2.0])


@pytest.mark.slow
@pytest.mark.parametrize("k_text,n_text", [
    ("delta", "0"),
    ("2*delta + expsum(2:1)", "expsum(1:1)"),
    ("delta + powerlaw(0.5, N)", "powerlaw(0.5, N)"),
    ("delta", "expsum(1:1)"),
    ("delta", "powerlaw(0.5, N)"),
    ("powerlaw(0.5, K)", "0"),
])
def test_reducibility_matches_z_set(k_text, n_text):
    k, n = parse_kernel(k_text, "K"), parse_kernel(n_text, "N")
    scan = z_set_scan(k, n, (0.1, 5.0), n_points=20)
    assert reducibility_test(k, n).reducible == scan.identically_zero
