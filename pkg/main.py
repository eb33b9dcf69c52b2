from __future__ import annotations
import argparse
import logging
from pathlib import Path
import sys
from typing import List, Optional

import database
from async_helper import run_async, stop_async_loop
from database import RunLedger
from experiments import EXPERIMENT_REGISTRY, ExperimentOutcome, create_experiment
from history import HistoryView
from scenario import EXPERIMENTS, ScenarioConfig
from settings import Settings, configure_logging, ensure_directories
from systems.errors import EXIT_NUMERICAL, ConfigError, LabError
from systems.profiles import PROFILE_NAMES, set_profile
from systems.reporting import write_json

logger = logging.getLogger("memheat")


def resolve_output_dir(config: ScenarioConfig, cfg: Settings, override: Optional[str] = None) -> Path:
    if override:
        return Path(override)
    if config.output.dir:
        return Path(config.output.dir)
    return Path(cfg.output_dir) / config.experiment


def run(config: ScenarioConfig, cfg: Optional[Settings] = None, out_dir: Optional[Path] = None,
        record: bool = True) -> ExperimentOutcome:
    """Execute one scenario; library errors become their exit code and an error report."""
    cfg = cfg or Settings()
    out_dir = Path(out_dir) if out_dir else resolve_output_dir(config, cfg)
    experiment = None
    try:
        experiment = create_experiment(config, cfg, out_dir)
        outcome = experiment.run()
    except LabError as exc:
        logger.debug("%s failed", config.experiment, exc_info=True)
        path = write_json(out_dir / config.output.report,
                          {"experiment": config.experiment, "error": type(exc).__name__, "message": str(exc)})
        outcome = ExperimentOutcome(exc.exit_code, {"error": type(exc).__name__},
                                    [f"❌ {type(exc).__name__}: {exc}"], [path])
    except (ValueError, ArithmeticError) as exc:
        path = write_json(out_dir / config.output.report,
                          {"experiment": config.experiment, "error": type(exc).__name__, "message": str(exc)})
        outcome = ExperimentOutcome(EXIT_NUMERICAL, {"error": type(exc).__name__},
                                    [f"❌ numerical failure: {exc}"], [path])
    if record and experiment is not None:
        experiment.record(outcome)
    return outcome


class LabApp:
    """Command-line driver: settings, ledger connection and one scenario per call."""

    def __init__(self, cfg: Settings, use_ledger: bool = True):
        self.cfg = cfg
        ensure_directories(cfg)
        self.ledger: Optional[RunLedger] = None
        if use_ledger and cfg.ledger.is_configured:
            run_async(self._init_ledger())

    async def _init_ledger(self):
        """Connect the run ledger and publish it at module level."""
        self.ledger = RunLedger(self.cfg.ledger)
        if not await self.ledger.connect():
            print("⚠️ Run ledger unavailable - runs will not be recorded")
        # Update the module-level ledger so experiments can access it
        database.ledger = self.ledger

    def run_scenario(self, config: ScenarioConfig, out: Optional[str] = None) -> int:
        out_dir = resolve_output_dir(config, self.cfg, out)
        print(f"🧪 {config.experiment} [{config.profile}] -> {out_dir}")
        outcome = run(config, self.cfg, out_dir, record=self.ledger is not None)
        for line in outcome.lines:
            print(line)
        for path in outcome.files:
            print(f"   wrote {path}")
        return outcome.exit_code

    def show_history(self, experiment: Optional[str], limit: int) -> int:
        print(HistoryView(experiment, limit).render())
        return 0

    def cleanup(self):
        """Clean up resources before exit."""
        if self.ledger:
            run_async(self.ledger.disconnect())
            database.ledger = None
        stop_async_loop()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memheat", description="Diffusion with memory: numerical experiments.")
    parser.add_argument("--log-level", default=None, help="logging level (default from MEMHEAT_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub = commands.add_parser(name, help=(EXPERIMENT_REGISTRY[name].__doc__ or "").strip().splitlines()[0])
        sub.add_argument("--config", help="scenario JSON file")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--threads", type=int, help="worker cap for parallel solves")
        sub.add_argument("--profile", choices=PROFILE_NAMES, help="accuracy profile")
        sub.add_argument("--no-ledger", action="store_true", help="do not record the run")
    hist = commands.add_parser("history", help="recent runs from the ledger")
    hist.add_argument("--experiment", choices=EXPERIMENTS)
    hist.add_argument("--limit", type=int, default=10)
    return parser


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.config:
        config = ScenarioConfig.load(args.config)
        if config.experiment != args.command:
            raise ConfigError(f"config describes {config.experiment!r}, not {args.command!r}")
    else:
        config = ScenarioConfig(args.command)
    if args.profile:
        config.profile = args.profile
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = Settings()
    configure_logging(args.log_level or cfg.log_level)

    if args.command == "history":
        app = LabApp(cfg)
        try:
            return app.show_history(args.experiment, args.limit)
        finally:
            app.cleanup()

    if args.threads:
        cfg.threads = max(1, args.threads)
    try:
        config = load_config(args)
    except LabError as exc:
        print(f"❌ {exc}")
        return exc.exit_code
    set_profile(config.profile)
    app = LabApp(cfg, use_ledger=not args.no_ledger)
    try:
        return app.run_scenario(config, args.out)
    finally:
        app.cleanup()


if __name__ == "__main__":
    sys.exit(main())
