from __future__ import annotations

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.errors import EXIT_CHECK_FAILED, EXIT_OK
from systems.evolution import example_A2_blowup

DISPLAYED_THRESHOLD = 6.0


@register_experiment("exampleA2")
class BlowupExperiment(BaseExperiment):
    """Endpoint blowup of J^{1-γ}F for F(s) = (T - s)^{γ-1}; kernels are not used."""

    PARAMS = {"epsilon": 0.1, "T": 1.0, "refinement_nodes": 512}

    def run(self) -> ExperimentOutcome:
        p = self.params
        result = example_A2_blowup(float(p["epsilon"]), float(p["T"]),
                                   steps_per_unit=self.numerics.steps_per_unit,
                                   refinement_nodes=int(p["refinement_nodes"]))
        self.write_data(("t", "displayed", "displayed_bound", "fractional", "fractional_bound"), result.rows())
        final = float(result.displayed[-1])
        passed = result.bound_holds and final > DISPLAYED_THRESHOLD
        summary = {"final_displayed": final, "final_fractional": float(result.fractional[-1]),
                   "bound_holds": result.bound_holds}
        self.write_report({"blowup": result.to_dict(), "threshold": DISPLAYED_THRESHOLD, "passed": passed})

        mark = "✅" if passed else "❌"
        lines = [
            f"{mark} t = {result.times[-1]:.6g}: displayed {final:.4f} (bound {result.displayed_bound[-1]:.4f}), "
            f"J^(1-γ) {result.fractional[-1]:.4f} (bound {result.fractional_bound[-1]:.4f})",
        ]
        return ExperimentOutcome(EXIT_OK if passed else EXIT_CHECK_FAILED, summary, lines, list(self.files))
