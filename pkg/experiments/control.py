from __future__ import annotations

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.controllability import ControlBasis, residual_curve
from systems.spectral_domain import ControlGeometry, field_from_spec


def geometry_from_params(payload, length: float) -> ControlGeometry:
    if payload is None:
        return ControlGeometry.distributed(0.0, length)
    return ControlGeometry.from_dict(payload)


@register_experiment("control")
class ControlExperiment(BaseExperiment):
    """Approximate controllability: residual of the best reachable target as the basis grows."""

    PARAMS = {
        "T": 1.0,
        "target": "phi1",
        "geometry": None,
        "sizes": [2, 4, 8, 16],
        "space_atoms": 4,
        "rho": None,
    }

    def run(self) -> ExperimentOutcome:
        k, n = self.kernels
        p = self.params
        horizon = float(p["T"])
        geometry = geometry_from_params(p["geometry"], self.basis.length)
        target = field_from_spec(self.basis, p["target"])
        sizes = [int(m) for m in p["sizes"]]
        if geometry.is_boundary:
            basis = ControlBasis("boundary", sizes[0])
        else:
            basis = ControlBasis("distributed", sizes[0], int(p["space_atoms"]))
        rho = None if p["rho"] is None else float(p["rho"])

        curve = residual_curve(target, horizon, basis, geometry, k, n, sizes, rho,
                               spec=self.contour(), steps_per_unit=self.numerics.steps_per_unit,
                               threads=self.cfg.threads)
        residuals = [r.residual for r in curve]
        decreasing = all(b < a for a, b in zip(residuals, residuals[1:]))

        self.write_data(("time_atoms", "basis_size", "residual", "control_norm", "gram_condition", "rho"),
                        [(m, r.basis_size, r.residual, r.control_norm, r.gram_condition, r.rho)
                         for m, r in zip(sizes, curve)])
        summary = {"final_residual": residuals[-1], "decreasing": decreasing}
        self.write_report({
            "T": horizon,
            "target": p["target"],
            "geometry": geometry.to_dict(),
            "residual_curve": [dict(r.to_dict(), time_atoms=m) for m, r in zip(sizes, curve)],
            **summary,
        })
        lines = [f"🧪 control synthesis on {geometry.kind} geometry, T={horizon:g}"]
        lines += [f"   m={m:<3d} residual {r.residual:.3e}" for m, r in zip(sizes, curve)]
        lines.append("✅ residuals decrease" if decreasing else "⚠️ residuals do not decrease monotonically")
        return ExperimentOutcome(summary=summary, lines=lines, files=list(self.files))
