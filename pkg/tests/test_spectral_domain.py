import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from systems.errors import GeometryError, GridResolutionError
from systems.spectral_domain import (
    ControlGeometry,
    EigenBasis,
    SpectralField,
    distributed_injection,
    domain_membership,
    field_from_spec,
    frac_power_norm,
    green_lift_coeffs,
    lift_profile,
    project,
    synthesize,
    uniform_grid,
)


def test_eigenvalues_on_pi_interval():
    basis = EigenBasis(math.pi, 5)
    np.testing.assert_allclose(basis.eigenvalues, [1, 4, 9, 16, 25])


def test_eigenfunctions_are_orthonormal():
    basis = EigenBasis(2.0, 6)
    x = np.linspace(0.0, 2.0, 2001)
    phi = basis.eigenfunctions(x)
    gram = trapezoid(phi[:, :, None] * phi[:, None, :], x, axis=0)
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-6)


def test_projection_recovers_band_limited_field(basis):
    coeffs = np.zeros(basis.n_max)
    coeffs[[0, 3, 7]] = [1.0, -0.5, 0.25]
    field = SpectralField(basis, coeffs)
    x = uniform_grid(basis)
    recovered = project(synthesize(field, x), x, basis)
    np.testing.assert_allclose(recovered.coeffs, coeffs, atol=1e-10)


def test_projection_needs_enough_points(basis):
    x = np.linspace(0.0, basis.length, basis.min_points() - 1)
    with pytest.raises(GridResolutionError):
        project(np.zeros_like(x), x, basis)


def test_frac_power_norm_of_unit_mode(basis):
    field = SpectralField.unit(basis, 3)
    assert frac_power_norm(field, 1.0) == pytest.approx(9.0)
    assert frac_power_norm(field, 0.5) == pytest.approx(3.0)


def test_domain_membership():
    basis = EigenBasis(math.pi, 64)
    rough = SpectralField.from_modes(basis, lambda n: 1.0 / n)
    smooth = SpectralField.from_modes(basis, lambda n: n ** -4.0)
    assert not domain_membership(rough, 0.5).member
    assert domain_membership(smooth, 0.5).member
    assert domain_membership(SpectralField.unit(basis, 1), 2.0).member


def test_green_lift_matches_projection_of_linear_profile():
    basis = EigenBasis(math.pi, 8)
    x = np.linspace(0.0, math.pi, 8001)
    for side in ("left", "right"):
        projected = project(lift_profile(basis, side, x), x, basis)
        np.testing.assert_allclose(green_lift_coeffs(basis, side), projected.coeffs, atol=1e-6)


def test_lift_series_at_midpoint_tracks_projection_of_one():
    basis = EigenBasis(math.pi, 64)
    left = green_lift_coeffs(basis, "left")
    right = green_lift_coeffs(basis, "right")
    # lift_left + lift_right = 1; its truncated sine series at L/2 converges like 1/n_max
    total = synthesize(SpectralField(basis, left + right), [math.pi / 2])[0]
    assert total == pytest.approx(1.0, abs=0.03)


def test_geometry_validation(basis):
    with pytest.raises(GeometryError):
        ControlGeometry.distributed(1.0, 0.5)
    with pytest.raises(GeometryError):
        ControlGeometry.distributed(0.0, 4.0).check_within(basis)
    with pytest.raises(GeometryError):
        ControlGeometry.distributed(0.0, math.pi).require_proper_subset(basis)
    ControlGeometry.distributed(0.0, 1.0).require_proper_subset(basis)


def test_geometry_round_trip():
    for geometry in (ControlGeometry.distributed(0.25, 1.5), ControlGeometry.boundary("right")):
        assert ControlGeometry.from_dict(geometry.to_dict()) == geometry


def test_injection_of_constant_on_full_interval(basis):
    geometry = ControlGeometry.distributed(0.0, math.pi)
    field = distributed_injection(lambda x: np.ones_like(x), geometry, basis)
    n = basis.modes
    expected = math.sqrt(2.0 / math.pi) * (1.0 - (-1.0) ** n) / n
    np.testing.assert_allclose(field.coeffs, expected, atol=1e-10)


def test_injection_is_supported_in_subinterval(basis):
    geometry = ControlGeometry.distributed(0.0, 1.0)
    field = distributed_injection(lambda x: np.sin(math.pi * x) ** 2, geometry, basis)
    x = np.linspace(1.5, math.pi, 50)
    # truncated series, so only approximately zero outside (a, b)
    assert np.max(np.abs(synthesize(field, x))) < 0.05


def test_field_from_spec(basis):
    assert field_from_spec(basis, "phi2").coeffs[1] == 1.0
    decay = field_from_spec(basis, "inverse_power:2")
    assert decay.coeffs[3] == pytest.approx(1.0 / 16.0)
    assert field_from_spec(basis, [1.0, 2.0]).coeffs[:3].tolist() == [1.0, 2.0, 0.0]
    with pytest.raises(GeometryError):
        field_from_spec(basis, "gaussian")


def test_parabola_coefficients(basis):
    field = field_from_spec(basis, "parabola")
    x = uniform_grid(basis)
    projected = project(x * (math.pi - x), x, basis)
    np.testing.assert_allclose(field.coeffs, projected.coeffs, atol=1e-6)


def test_half_power_norm_is_basel_sum():
    basis = EigenBasis(math.pi, 2000)
    field = SpectralField.from_modes(basis, lambda n: 1.0 / n ** 2)
    assert frac_power_norm(field, 0.5) ** 2 == pytest.approx(math.pi ** 2 / 6, abs=1e-3)


def test_frac_power_norm_grows_with_sigma():
    field = SpectralField.from_modes(EigenBasis(math.pi, 64), lambda n: 1.0 / n ** 3)
    norms = [frac_power_norm(field, sigma) for sigma in (0.0, 0.25, 0.5, 1.0)]
    assert norms == sorted(norms)


@pytest.mark.parametrize("length", [1.0, math.pi])
@pytest.mark.parametrize("side", ["left", "right"])
def test_green_lift_decays_like_one_over_n(length, side):
    basis = EigenBasis(length, 32)
    scaled = basis.modes * np.abs(green_lift_coeffs(basis, side))
    np.testing.assert_allclose(scaled, math.sqrt(2.0 * length) / math.pi, rtol=1e-12)
