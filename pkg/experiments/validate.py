from __future__ import annotations
import math
from typing import Callable

import numpy as np
from scipy.special import erfcx

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.errors import EXIT_CHECK_FAILED, EXIT_OK, LabError
from systems.evolution import example_A2_blowup, mittag_leffler
from systems.kernel_lab import (
    MemoryKernel,
    TimeGrid,
    convolve,
    laplace_quadrature,
    laplace_transform,
    resolvent_kernel,
)
from systems.laplace_contour import ContourSpec, default_spec, mode_evolution_kernel, psi
from systems.reporting import CheckTable

HEAT_GRID = [(mu2, t) for mu2 in (1.0, 4.0, 16.0, 64.0) for t in (0.1, 0.5, 1.0, 2.0)]


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


@register_experiment("validate")
class ValidateExperiment(BaseExperiment):
    """
    Oracle suite: Mittag-Leffler fixtures, closed-form modal kernels, contour
    independence, Ψ identities, resolvent identities and the endpoint blowup.
    ``contour_angle`` replaces the ray angle of the contour-independence check.
    """

    PARAMS = {"contour_angle": None, "transform_samples": 4}

    def run(self) -> ExperimentOutcome:
        table = CheckTable()
        for name, check in self.checks():
            try:
                passed, detail = check()
            except LabError as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            table.add(name, passed, detail)

        self.write_data(("check", "passed", "detail"), [(c.name, c.passed, c.detail) for c in table.checks])
        self.write_report({"checks": table.to_dict(), "seed": self.config.seed})
        passed = sum(c.passed for c in table.checks)
        summary = {"checks_passed": f"{passed}/{len(table.checks)}", "all_passed": table.all_passed}
        lines = table.as_display_lines()
        lines.append("✅ all oracle checks passed" if table.all_passed else "❌ oracle checks failed")
        return ExperimentOutcome(EXIT_OK if table.all_passed else EXIT_CHECK_FAILED, summary, lines,
                                 list(self.files))

    def checks(self) -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
        return [
            ("ml_exponential", self.check_ml_exponential),
            ("ml_cosine", self.check_ml_cosine),
            ("ml_half", self.check_ml_half),
            ("ml_half_half", self.check_ml_half_half),
            ("ml_series_vs_integral", self.check_ml_methods),
            ("transform_consistency", self.check_transform_consistency),
            ("heat_closed_form", self.check_heat),
            ("fractional_closed_form", self.check_fractional),
            ("contour_independence", self.check_contour_independence),
            ("psi_closed_form", self.check_psi_closed_form),
            ("psi_reducible", self.check_psi_reducible),
            ("resolvent_exponential", self.check_resolvent_exponential),
            ("resolvent_abel", self.check_resolvent_abel),
            ("resolvent_inverse_pair", self.check_resolvent_inverse_pair),
            ("endpoint_blowup", self.check_blowup),
        ]

    # -- Mittag-Leffler fixtures ------------------------------------------
    def check_ml_exponential(self):
        err = max(_relative(mittag_leffler(1.0, 1.0, z), math.exp(z)) for z in (-2.0, -0.5, 1.0))
        return err < 1e-12, f"rel err {err:.1e}"

    def check_ml_cosine(self):
        err = abs(mittag_leffler(2.0, 1.0, -1.0) - math.cos(1.0))
        return err < 1e-12, f"abs err {err:.1e}"

    def check_ml_half(self):
        err = max(_relative(mittag_leffler(0.5, 1.0, -x), float(erfcx(x))) for x in (0.5, 1.0, 4.0, 20.0))
        return err < 1e-10, f"rel err {err:.1e}"

    def check_ml_half_half(self):
        reference = 1.0 / math.sqrt(math.pi) - float(erfcx(1.0))
        err = _relative(mittag_leffler(0.5, 0.5, -1.0), reference)
        return err < 1e-10, f"E(-1) = {mittag_leffler(0.5, 0.5, -1.0):.6f}, rel err {err:.1e}"

    def check_ml_methods(self):
        err = max(
            _relative(mittag_leffler(a, 1.0, -x, "series"), mittag_leffler(a, 1.0, -x, "spectral"))
            for a in (0.3, 0.7) for x in (0.5, 6.0)
        )
        return err < 1e-8, f"rel err {err:.1e}"

    def check_transform_consistency(self):
        kernel = MemoryKernel.exp_sum([(2.0, 3.0), (0.5, 1.0)])
        count = int(self.params["transform_samples"])
        lam = 1.0 + 3.0 * self.rng.random(count) + 1j * (self.rng.random(count) - 0.5) * 4.0
        err = max(
            abs(laplace_quadrature(lambda t: float(kernel.regular(t)), z) - laplace_transform(kernel, z))
            / abs(laplace_transform(kernel, z))
            for z in lam
        )
        return err < 1e-6, f"rel err {err:.1e}"

    # -- modal kernels -----------------------------------------------------
    def check_heat(self):
        k, n = MemoryKernel.delta(), MemoryKernel.zero()
        spec = default_spec(k, n)
        err = max(abs(mode_evolution_kernel(k, n, mu2, t, spec).real - math.exp(-mu2 * t)) for mu2, t in HEAT_GRID)
        return err < 1e-8, f"abs err {err:.1e}"

    def check_fractional(self):
        k, n = MemoryKernel.power_law(0.5, "K"), MemoryKernel.zero()
        spec = default_spec(k, n)
        err = max(
            _relative(mode_evolution_kernel(k, n, mu2, t, spec).real, float(erfcx(mu2 * math.sqrt(t))))
            for mu2, t in HEAT_GRID
        )
        return err < 1e-6, f"rel err {err:.1e}"

    def check_contour_independence(self):
        k, n = MemoryKernel.delta(), MemoryKernel.exp_sum([(1.0, 1.0)])
        reference = default_spec(k, n)
        angle = self.params["contour_angle"]
        if angle is None:
            other = ContourSpec(arc_radius=2.0 * reference.arc_radius, ray_angle=reference.ray_angle - 0.05)
        else:
            other = ContourSpec(arc_radius=reference.arc_radius, ray_angle=float(angle))
        mu2 = np.array([1.0, 4.0])
        err = max(
            float(np.max(np.abs(mode_evolution_kernel(k, n, mu2, t, reference).real
                                - mode_evolution_kernel(k, n, mu2, t, other).real)))
            for t in (0.5, 2.0)
        )
        return err < 1e-6, f"max diff {err:.1e} (ray angle {other.ray_angle:.4f})"

    def check_psi_closed_form(self):
        k, n = MemoryKernel.power_law(0.5, "K"), MemoryKernel.zero()
        err = max(_relative(psi(k, n, t).real, 1.0 / math.sqrt(math.pi * t)) for t in (0.25, 1.0, 4.0))
        return err < 1e-6, f"rel err {err:.1e}"

    def check_psi_reducible(self):
        pairs = [
            (MemoryKernel.delta(), MemoryKernel.zero()),
            (MemoryKernel.reducible(MemoryKernel.exp_sum([(1.0, 1.0)]), 2.0), MemoryKernel.exp_sum([(1.0, 1.0)])),
            (MemoryKernel.reducible(MemoryKernel.power_law(0.5, "N"), 1.0), MemoryKernel.power_law(0.5, "N")),
        ]
        worst = max(abs(psi(k, n, t).real) for k, n in pairs for t in (0.5, 1.0, 3.0))
        return worst < 1e-8, f"max |Ψ| {worst:.1e}"

    # -- resolvents --------------------------------------------------------
    def check_resolvent_exponential(self):
        a, b = 2.0, 1.5
        grid = TimeGrid(2.0, 512)
        resolvent = resolvent_kernel(MemoryKernel.exp_sum([(a, b)]), grid)
        err = float(np.max(np.abs(resolvent.values - a * np.exp(-(a + b) * grid.nodes))))
        return err < 1e-8, f"abs err {err:.1e}"

    def check_resolvent_abel(self):
        grid = TimeGrid(2.0, 512)
        resolvent = resolvent_kernel(MemoryKernel.power_law(0.5, "N"), grid)
        t = grid.nodes[1:]
        exact = 1.0 / np.sqrt(math.pi * t) - erfcx(np.sqrt(t))
        err = float(np.max(np.abs(resolvent.values[1:] - exact)))
        return err < 1e-5, f"abs err {err:.1e}"

    def check_resolvent_inverse_pair(self):
        kernel = MemoryKernel.exp_sum([(2.0, 1.5)])
        grid = TimeGrid(2.0, 2048)
        resolvent = resolvent_kernel(kernel, grid)
        # N = R + N*R
        rebuilt = resolvent.values + convolve(kernel, resolvent.values, grid)
        err = float(np.max(np.abs(rebuilt - kernel.regular(grid.nodes))))
        return err < 1e-5, f"abs err {err:.1e}"

    def check_blowup(self):
        result = example_A2_blowup(0.1, steps_per_unit=self.numerics.steps_per_unit)
        value = float(result.displayed[-1])
        return result.bound_holds and value > 6.0, f"displayed {value:.3f}"
