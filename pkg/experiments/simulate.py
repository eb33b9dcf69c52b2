from __future__ import annotations

import numpy as np

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.evolution import ControlSignal, snapshot_rows, trajectory, trajectory_rows
from systems.kernel_lab import TimeGrid
from systems.spectral_domain import ControlGeometry, field_from_spec


@register_experiment("simulate")
class SimulateExperiment(BaseExperiment):
    """Trajectory of one initial state, optionally driven by a constant boundary value."""

    PARAMS = {
        "T": 1.0,
        "w0": "phi1",
        "samples": 11,
        "x_points": 65,
        "boundary_value": None,
        "side": "left",
        "snapshots": "snapshots.csv",
    }

    def run(self) -> ExperimentOutcome:
        k, n = self.kernels
        p = self.params
        horizon = float(p["T"])
        spec = self.contour()
        w0 = field_from_spec(self.basis, p["w0"])
        grid = TimeGrid.from_rate(horizon, self.numerics.steps_per_unit)

        boundary = geometry = None
        if p["boundary_value"] is not None:
            geometry = ControlGeometry.boundary(p["side"])
            boundary = ControlSignal.constant(grid, float(p["boundary_value"]))

        samples = trajectory(w0, grid, k, n, int(p["samples"]), spec, boundary, geometry)
        x = np.linspace(0.0, self.basis.length, int(p["x_points"]))
        self.write_data(("t", "n", "coeff"), trajectory_rows(samples))
        self.write_data(("t", "x", "w"), snapshot_rows(samples, x), name=p["snapshots"])

        final = samples[-1].state
        summary = {"T": horizon, "final_l2": final.l2_norm, "final_mode1": float(final.coeffs[0])}
        self.write_report({
            "params": p,
            "n_max": self.basis.n_max,
            "contour": spec.to_dict(),
            "times": [s.t for s in samples],
            "l2_norms": [s.state.l2_norm for s in samples],
            **summary,
        })
        lines = [f"🧪 simulated {len(samples)} states up to T={horizon:g}",
                 f"   final ‖w‖ = {final.l2_norm:.6g}"]
        return ExperimentOutcome(summary=summary, lines=lines, files=list(self.files))
