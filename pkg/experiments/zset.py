from __future__ import annotations

from . import BaseExperiment, ExperimentOutcome, register_experiment
from systems.controllability import reducibility_test
from systems.laplace_contour import z_set_scan


@register_experiment("zset")
class ZSetExperiment(BaseExperiment):
    """Zeros of Ψ on a time window next to the reducibility verdict."""

    PARAMS = {"t_range": [0.1, 10.0], "n_points": 200}

    def run(self) -> ExperimentOutcome:
        k, n = self.kernels
        p = self.params
        reducibility = reducibility_test(k, n)
        scan = z_set_scan(k, n, p["t_range"], int(p["n_points"]), self.contour())

        psi_entry = "identically-zero" if scan.identically_zero else scan.zeros
        self.write_data(("t", "psi"), list(zip(scan.times.tolist(), scan.values.tolist())))
        summary = {"reducible": reducibility.reducible, "zeros": len(scan.zeros),
                   "identically_zero": scan.identically_zero}
        self.write_report({
            "reducible": reducibility.reducible,
            "constant": reducibility.constant,
            "psi": psi_entry,
            "scan": scan.to_dict(),
            "t_range": list(p["t_range"]),
        })

        if scan.identically_zero:
            lines = ["✅ Ψ vanishes identically on the window"]
        else:
            lines = [f"🧪 Ψ has {len(scan.zeros)} zero(s) on [{p['t_range'][0]:g}, {p['t_range'][1]:g}]"]
        lines.append(f"   reducible: {reducibility.reducible}"
                     + (f" (K̂ = {reducibility.constant:.6g}·J)" if reducibility.reducible else ""))
        return ExperimentOutcome(summary=summary, lines=lines, files=list(self.files))
