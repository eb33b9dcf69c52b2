from __future__ import annotations

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.controllability import null_control_certificate, obstruction_ratio, reducibility_test
from systems.laplace_contour import z_set_scan
from systems.spectral_domain import ControlGeometry, field_from_spec


@register_experiment("obstruction")
class ObstructionExperiment(BaseExperiment):
    """
    Controllability to zero: the ratio sequence μ_n²e_n(T)/Ψ(T), the reducibility
    test, the zero set of Ψ and (optionally) the null-control certificate.
    """

    PARAMS = {
        "T": 1.0,
        "modes": [8, 16, 32, 64, 128, 256],
        "w0": "inverse_power:1",
        "geometry": None,
        "sizes": [4, 8, 16, 32],
        "rho": None,
        "certificate": True,
        "t_range": [0.1, 10.0],
        "zset_points": 200,
    }

    def run(self) -> ExperimentOutcome:
        k, n = self.kernels
        p = self.params
        horizon = float(p["T"])
        spec = self.contour()

        ratios = obstruction_ratio(k, n, horizon, p["modes"], spec, self.basis.length)
        reducibility = reducibility_test(k, n)
        zset = z_set_scan(k, n, p["t_range"], int(p["zset_points"]), spec)

        certificate = None
        curve = []
        if p["certificate"]:
            if p["geometry"] is None:
                geometry = ControlGeometry.distributed(0.0, 0.5 * self.basis.length)
            else:
                geometry = ControlGeometry.from_dict(p["geometry"])
            w0 = field_from_spec(self.basis, p["w0"])
            rho = None if p["rho"] is None else float(p["rho"])
            certificate = null_control_certificate(
                w0, horizon, k, n, geometry, sizes=[int(m) for m in p["sizes"]], rho=rho, spec=spec,
                steps_per_unit=self.numerics.steps_per_unit, threads=self.cfg.threads,
            )
            curve = [{"time_atoms": m, "residual": r} for m, r in certificate.residuals.items()]

        self.write_data(("n", "ratio"), list(zip(ratios.modes, ratios.ratios)))
        summary = {
            "reducible": reducibility.reducible,
            "ratio_last": ratios.ratios[-1] if ratios.ratios else None,
            "obstructed": certificate.obstructed if certificate else None,
        }
        self.write_report({
            "T": horizon,
            "ratio_sequence": ratios.to_dict(),
            "reducibility": reducibility.to_dict(),
            "zset": zset.to_dict(),
            "residual_curve": curve,
            "certificate": certificate.to_dict() if certificate else None,
        })

        lines = [f"🧪 obstruction study at T={horizon:g}, Ψ(T) = {ratios.psi_value:.6g}"]
        if ratios.ratios:
            lines.append("   r_n: " + ", ".join(f"{m}:{r:.4f}" for m, r in zip(ratios.modes, ratios.ratios)))
        else:
            lines.append(f"   {ratios.message}")
        lines.append(f"   reducible: {reducibility.reducible}")
        if certificate is not None:
            mark = "❌" if certificate.obstructed else "✅"
            lines.append(f"{mark} null-control certificate: {certificate.message}")
        return ExperimentOutcome(summary=summary, lines=lines, files=list(self.files))
