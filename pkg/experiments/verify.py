from __future__ import annotations

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.errors import EXIT_INADMISSIBLE, EXIT_OK
from systems.kernel_lab import analytic_sector_angle, verify_assumptions
from systems.laplace_contour import dump_contour_csv, resolvent_bounds


@register_experiment("verify")
class VerifyExperiment(BaseExperiment):
    """Sector admissibility of the kernel pair, resolvent constants and the contour it implies."""

    PARAMS = {
        "theta_A": None,
        "sigma0": 0.25,
        "dump_contour": True,
        "contour_file": "contour.csv",
    }

    def run(self) -> ExperimentOutcome:
        k, n = self.kernels
        p = self.params
        theta_a = self.numerics.theta_a if p["theta_A"] is None else float(p["theta_A"])
        grid = self.sector_grid()
        report = verify_assumptions(k, n, theta_a, grid=grid)
        analytic = analytic_sector_angle(k, n)

        self.write_data(("re_lambda", "im_lambda", "reason"),
                        [(z.real, z.imag, reason) for z, reason in report.failures])
        payload = {"admissibility": report.to_dict(), "analytic_theta": analytic}
        summary = {"theta_max": report.theta_max, "admissible": report.admissible}

        if not report.admissible:
            self.write_report(payload)
            lines = ["❌ kernel pair is not sector-admissible"]
            lines += [f"   {reason} at λ={z:.3g}" for z, reason in report.failures[:5]]
            return ExperimentOutcome(EXIT_INADMISSIBLE, summary, lines, list(self.files))

        theta = report.theta_max
        spec = self.contour()
        payload["resolvent_bounds"] = resolvent_bounds(k, n, self.basis, sigma0=float(p["sigma0"]), theta=theta)
        payload["contour"] = spec.to_dict()
        if p["dump_contour"]:
            self.files.append(dump_contour_csv(spec, self.out_dir / p["contour_file"]))
        self.write_report(payload)

        lines = [f"✅ admissible: θ_max = {theta:.4f} rad ({report.samples_used} samples)"]
        if analytic is not None:
            lines.append(f"   closed-form sector angle {analytic:.4f} rad")
        lines.append(f"   contour ray angle {spec.ray_angle:.4f} rad, arc radius {spec.arc_radius:g}")
        return ExperimentOutcome(EXIT_OK, summary, lines, list(self.files))
