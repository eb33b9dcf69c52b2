import csv
import json
import math

import pytest

from main import build_parser, main, run
from scenario import ScenarioConfig
from systems.errors import EXIT_CHECK_FAILED, EXIT_INADMISSIBLE, EXIT_NUMERICAL, EXIT_OK, ConfigError


def _config(experiment, k="delta", n="0", params=None, n_max=8, profile="fast"):
    return ScenarioConfig.from_dict({
        "experiment": experiment,
        "kernels": {"K": k, "N": n},
        "domain": {"L": math.pi, "n_max": n_max},
        "params": params or {},
        "profile": profile,
    })


def _report(out_dir):
    return json.loads((out_dir / "report.json").read_text(encoding="utf-8"))


# -- scenario files ----------------------------------------------------------
def test_config_round_trip(tmp_path):
    config = _config("control", "powerlaw(0.5, K)", params={"T": 2.0, "sizes": [2, 4]})
    path = config.dump(tmp_path / "scenario.json")
    loaded = ScenarioConfig.load(path)
    assert loaded == config
    assert loaded.kernels.parse()[0].singular_part.order == pytest.approx(0.5)


@pytest.mark.parametrize("payload", [
    {"experiment": "simulate", "colour": "red"},
    {"experiment": "dance"},
    {"experiment": "simulate", "domain": {"L": -1.0}},
    {"experiment": "simulate", "kernels": {"K": "delta", "M": "0"}},
    {"experiment": "simulate", "profile": "sloppy"},
    {"kernels": {"K": "delta"}},
])
def test_invalid_scenarios(payload):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(payload)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        ScenarioConfig.load(tmp_path / "nowhere.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(broken)


def test_bundled_scenarios_load():
    from pathlib import Path
    for path in sorted((Path(__file__).resolve().parents[1] / "scenarios").glob("*.json")):
        ScenarioConfig.load(path)


# -- experiments through run() -----------------------------------------------
def test_simulate_heat(lab_settings, tmp_path):
    out = tmp_path / "simulate"
    outcome = run(_config("simulate", params={"T": 1.0, "samples": 5}), lab_settings, out, record=False)
    assert outcome.exit_code == EXIT_OK
    assert outcome.summary["final_mode1"] == pytest.approx(math.exp(-1.0), abs=1e-8)
    with (out / "data.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "n", "coeff"]
    assert (out / "snapshots.csv").exists()
    assert _report(out)["kernels"] == {"K": "delta", "N": "0"}


def test_unknown_parameter_is_a_config_failure(lab_settings, tmp_path):
    outcome = run(_config("simulate", params={"horizon": 1.0}), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_NUMERICAL
    assert _report(tmp_path)["error"] == "ConfigError"


def test_zset_reducible_pair(lab_settings, tmp_path):
    config = _config("zset", "2*delta + expsum(2:1)", "expsum(1:1)",
                     params={"t_range": [0.1, 5.0], "n_points": 20})
    outcome = run(config, lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    report = _report(tmp_path)
    assert report["reducible"] is True
    assert report["psi"] == "identically-zero"
    assert report["constant"] == pytest.approx(2.0)


def test_verify_closed_form_angle(lab_settings, tmp_path):
    config = _config("verify", "delta", "powerlaw(0.5, N)", profile="standard")
    outcome = run(config, lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    assert outcome.summary["theta_max"] == pytest.approx(math.pi / 6, rel=0.05)
    report = _report(tmp_path)
    assert report["analytic_theta"] == pytest.approx(math.pi / 6)
    assert report["resolvent_bounds"]["samples"] > 0
    assert (tmp_path / "contour.csv").exists()


def test_verify_inadmissible_pair(lab_settings, tmp_path):
    outcome = run(_config("verify", "expsum(1:1)", "0"), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_INADMISSIBLE
    assert outcome.summary["admissible"] is False
    assert _report(tmp_path)["admissibility"]["asymptotic_flags"]["growth"] is False


def test_blowup_experiment(lab_settings, tmp_path):
    outcome = run(_config("exampleA2", params={"epsilon": 0.1}), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    assert outcome.summary["final_displayed"] > 6.0


# -- command line ------------------------------------------------------------
def test_parser_knows_every_experiment():
    parser = build_parser()
    for command in ("simulate", "verify", "control", "obstruction", "zset", "exampleA2", "validate", "history"):
        assert parser.parse_args([command]).command == command


def test_main_rejects_mismatched_config(tmp_path):
    path = _config("zset").dump(tmp_path / "zset.json")
    assert main(["simulate", "--config", str(path), "--no-ledger"]) == EXIT_NUMERICAL


def test_main_runs_scenario(tmp_path):
    path = _config("simulate", params={"samples": 3}).dump(tmp_path / "sim.json")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(path), "--out", str(out), "--no-ledger"]) == EXIT_OK
    assert (out / "report.json").exists()


@pytest.mark.slow
def test_validate_passes(lab_settings, tmp_path):
    outcome = run(_config("validate"), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK, outcome.lines


@pytest.mark.slow
def test_validate_fails_outside_the_sector(lab_settings, tmp_path):
    outcome = run(_config("validate", params={"contour_angle": 3.0}), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_CHECK_FAILED
    checks = {c["name"]: c["passed"] for c in _report(tmp_path)["checks"]["checks"]}
    assert checks["contour_independence"] is False


def test_control_heat_residuals_shrink(lab_settings, tmp_path):
    outcome = run(_config("control", params={"sizes": [2, 4]}), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    residuals = [row["residual"] for row in _report(tmp_path)["residual_curve"]]
    assert len(residuals) == 2
    assert residuals[1] <= residuals[0] + 1e-12
    with (tmp_path / "data.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0][:3] == ["time_atoms", "basis_size", "residual"]
    assert len(rows) == 3


def test_control_reports_are_reproducible(lab_settings, tmp_path):
    config = _config("control", "powerlaw(0.5, K)", params={"sizes": [2, 4]})
    first, second = tmp_path / "first", tmp_path / "second"
    assert run(config, lab_settings, first, record=False).exit_code == EXIT_OK
    assert run(config, lab_settings, second, record=False).exit_code == EXIT_OK
    for name in ("report.json", "data.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_obstruction_ratios_tend_to_one(lab_settings, tmp_path):
    config = _config("obstruction", "powerlaw(0.5, K)", params={
        "modes": [8, 16, 32], "certificate": False, "t_range": [0.1, 2.0], "zset_points": 20,
    })
    outcome = run(config, lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    assert outcome.summary["reducible"] is False
    assert outcome.summary["ratio_last"] == pytest.approx(1.0, rel=0.05)
    assert outcome.summary["obstructed"] is None
    report = _report(tmp_path)
    assert report["zset"]["identically_zero"] is False
    assert report["certificate"] is None


@pytest.mark.slow
def test_obstruction_with_certificate(lab_settings, tmp_path):
    config = _config("obstruction", "powerlaw(0.5, K)", n_max=16, params={
        "modes": [8, 16], "sizes": [4, 8], "t_range": [0.1, 2.0], "zset_points": 20,
    })
    outcome = run(config, lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    report = _report(tmp_path)
    assert report["certificate"] is not None
    assert [row["time_atoms"] for row in report["residual_curve"]] == [4, 8]


def test_bundled_fractional_verify(lab_settings, tmp_path):
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "scenarios" / "fractional_verify.json"
    outcome = run(ScenarioConfig.load(path), lab_settings, tmp_path, record=False)
    assert outcome.exit_code == EXIT_OK
    assert outcome.summary["admissible"] is True
    assert outcome.summary["theta_max"] == pytest.approx(math.pi / 2, rel=0.05)
    assert _report(tmp_path)["analytic_theta"] == pytest.approx(math.pi / 2)


def test_console_script_points_at_main():
    tomllib = pytest.importorskip("tomllib")
    from pathlib import Path
    manifest = Path(__file__).resolve().parents[1] / "pyproject.toml"
    with manifest.open("rb") as handle:
        project = tomllib.load(handle)["project"]
    assert project["scripts"]["memheat"] == "main:main"
    assert callable(main)
