#!/usr/bin/env python3
"""
BIPHASE - Two-Phase Cross-Diffusion Simulator
=============================================

Command line entry point: runs scenarios, classifies stationary states and
drives grid convergence studies.

Usage:
    biphase run <config-or-preset>           # Run a scenario in its own mode
    biphase stationary <config-or-preset>    # Stationary states of a scenario
    biphase converge <config-or-preset>      # Grid convergence study
    biphase presets                          # List builtin presets
    biphase --debug ...                      # Log to stdout at DEBUG level
    biphase --help                           # Show help

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant breach in strict mode.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from config.config import Config
from config.scenario_loader import list_presets, parse_config
from core.errors import BiphaseError, InvariantBreach, ScenarioError, SolverFailure
from core.scenarios import RunResult, Scenario, run_convergence, run_scenario, run_stationary
from ui.display import SimulationDisplay, UIConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# ladders used when a scenario without its own converge section is studied
SCALED_LADDER = ((8, 16, 32, 64, 128), 512)
FULL_LADDER = ((8, 16, 32, 64, 128, 256, 512, 1024), 2048)
FULL_LADDER_DT = 5e-5


def setup_logging(debug: bool = False, log_file: Optional[Path] = None, level: str = "INFO") -> None:
    """Configure logging for BIPHASE."""
    if debug:
        handler: logging.Handler = logging.StreamHandler(sys.stdout)
    elif log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(log_file, encoding="utf-8")
    else:
        handler = logging.NullHandler()
    logging.basicConfig(
        level=logging.DEBUG if debug else getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
        handlers=[handler],
        force=True,
    )


def parse_times(text: str) -> List[float]:
    """Parse a comma-separated list of snapshot times."""
    try:
        times = sorted(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid snapshot times {text!r}")
    if any(t < 0.0 for t in times):
        raise argparse.ArgumentTypeError("snapshot times must be nonnegative")
    return times


def create_parser() -> argparse.ArgumentParser:
    """Create the command line argument parser."""
    parser = argparse.ArgumentParser(
        prog="biphase",
        description="BIPHASE - Two-phase cross-diffusion simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  biphase run equilibrium
  biphase run my_scenario.yaml --out results/my --snapshot-times 0,0.5,1
  biphase run non_equilibrium --strict-invariants
  biphase stationary stationary_equilibrium
  biphase converge converge --workers 4
  biphase converge converge --full
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('config', help='Scenario YAML file or builtin preset name')
    common.add_argument('--out', help='Output directory (default: scenario output.dir or BIPHASE_OUTPUT_DIR)')

    run_parser = subparsers.add_parser('run', parents=[common], help='Run a scenario')
    run_parser.add_argument('--strict-invariants', action='store_true',
                            help='Abort on the first invariant breach instead of warning')
    run_parser.add_argument('--snapshot-times', type=parse_times,
                            help='Comma-separated snapshot times, e.g. 0,0.5,5')

    subparsers.add_parser('stationary', parents=[common], help='Classify stationary states')

    converge_parser = subparsers.add_parser('converge', parents=[common], help='Grid convergence study')
    converge_parser.add_argument('--full', action='store_true',
                                 help='Grids 2^3..2^10 against 2^11 (long)')
    converge_parser.add_argument('--workers', type=int, help='Parallel grid runs (default: BIPHASE_WORKERS)')

    subparsers.add_parser('presets', help='List builtin presets')

    parser.add_argument('--debug', action='store_true', help='Enable debug mode')
    parser.add_argument('--no-progress', action='store_true', help='Hide progress bars')

    return parser


def output_dir(args: argparse.Namespace, scenario: Scenario, config: Config) -> Path:
    if getattr(args, 'out', None):
        return Path(args.out)
    if scenario.output_dir:
        return Path(scenario.output_dir)
    return Path(config.output.output_dir)


def convergence_scenario(scenario: Scenario, full: bool) -> Scenario:
    """Scenario set up for a ladder study; --full swaps in the long ladder."""
    if full:
        grids, reference_N = FULL_LADDER
        dt = min(scenario.dt_init, FULL_LADDER_DT)
    elif scenario.mode == "converge":
        return scenario
    else:
        grids, reference_N = SCALED_LADDER
        dt = scenario.dt_init
    studied = dataclasses.replace(scenario, mode="converge", grids=grids, reference_N=reference_N,
                                  dt_init=dt, snapshot_times=())
    studied.validate()
    return studied


def report_result(ui: SimulationDisplay, result: RunResult) -> None:
    if result.stationary is not None:
        ui.show_stationary(result.stationary)
    if result.convergence is not None:
        ui.show_convergence(result.convergence)
    if result.final_state is not None or result.trajectory is not None:
        ui.show_run_result(result)
    if result.invariants is not None and result.invariants.steps:
        ui.show_invariants(result.invariants)
    if result.files:
        ui.show_info_message("Files written:")
        ui.show_files(result.files)


def handle_run(args: argparse.Namespace, ui: SimulationDisplay, scenario: Scenario,
               config: Config, out_dir: Path) -> int:
    """Run a scenario in the mode it declares."""
    strict = args.strict_invariants or config.output.strict_invariants
    ui.show_mode_header(f"run {scenario.name}", scenario.description or f"{scenario.mode} scenario")
    ui.show_scenario(scenario)
    total = float(len(scenario.grids) + 1) if scenario.mode == "converge" else scenario.t_end
    with ui.progress(f"{scenario.name}", total) as advance:
        result = run_scenario(scenario, out_dir, config.solver, strict=strict,
                              snapshot_times=args.snapshot_times, progress=advance,
                              workers=config.run.workers)
    report_result(ui, result)
    if result.invariants is not None and not result.invariants.ok:
        ui.show_error_message("Invariant checks failed", suggestion="see the invariant table and biphase.log")
    else:
        ui.show_success_message(f"Run {scenario.name} finished", details=str(out_dir))
    return 0


def handle_stationary(args: argparse.Namespace, ui: SimulationDisplay, scenario: Scenario,
                      config: Config, out_dir: Path) -> int:
    """Stationary states for the masses of the scenario's initial profile."""
    ui.show_mode_header(f"stationary {scenario.name}", "stationary states and two-phase condition")
    result = run_stationary(scenario, out_dir)
    report_result(ui, result)
    condition = result.notes.get("two_phase_condition")
    ui.show_success_message(f"Stationary analysis {scenario.name} done",
                            details="two-phase condition holds" if condition else
                            "two-phase condition fails")
    return 0


def handle_converge(args: argparse.Namespace, ui: SimulationDisplay, scenario: Scenario,
                    config: Config, out_dir: Path) -> int:
    """Grid ladder against a reference run."""
    studied = convergence_scenario(scenario, args.full)
    workers = args.workers if args.workers is not None else config.run.workers
    if workers < 1:
        raise ScenarioError(f"--workers must be positive, got {workers}")
    ui.show_mode_header(f"converge {studied.name}", "L1 errors against a refined reference run")
    ui.show_scenario(studied)
    with ui.progress("grid levels", float(len(studied.grids) + 1)) as advance:
        result = run_convergence(studied, out_dir, config.solver, workers=workers, progress=advance)
    report_result(ui, result)
    ui.show_success_message(f"Convergence study {studied.name} finished", details=str(out_dir))
    return 0


def handle_presets(ui: SimulationDisplay) -> int:
    for name in list_presets():
        ui.show_info_message(name)
    return 0


HANDLERS = {
    'run': handle_run,
    'stationary': handle_stationary,
    'converge': handle_converge,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for BIPHASE."""
    parser = create_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0

    config = Config()
    ui = SimulationDisplay(UIConfig(show_progress=config.run.progress and not args.no_progress))
    setup_logging(args.debug, level=config.output.log_level)

    try:
        ui.show_banner()
        if args.command == 'presets':
            return handle_presets(ui)

        scenario = parse_config(args.config)
        out_dir = output_dir(args, scenario, config)
        out_dir.mkdir(parents=True, exist_ok=True)
        setup_logging(args.debug, log_file=out_dir / "biphase.log", level=config.output.log_level)
        logger.info(f"configuration: {config.to_dict()}")
        return HANDLERS[args.command](args, ui, scenario, config, out_dir)

    except KeyboardInterrupt:
        ui.show_success_message("Goodbye! (Interrupted)")
        return 130
    except ScenarioError as e:
        logger.error(f"Configuration error: {e}")
        ui.show_error_message("Configuration error", suggestion=str(e))
        return e.exit_code
    except SolverFailure as e:
        logger.error(f"Solver failure: {e}")
        details = f"last accepted state written to {e.dump_path}" if e.dump_path else ""
        ui.show_error_message(f"Solver failure at t={e.t:.6g}", suggestion=str(e), retry_info=details)
        return e.exit_code
    except InvariantBreach as e:
        logger.error(f"Invariant breach: {e}")
        ui.show_error_message(f"Invariant {e.check} breached at t={e.t:.6g}", suggestion=str(e))
        return e.exit_code
    except BiphaseError as e:
        logger.error(f"Run failed: {e}")
        ui.show_error_message(f"Run failed: {type(e).__name__}", suggestion=str(e))
        return e.exit_code
    except Exception as e:
        logger.error(f"Fatal error: {e}")
        if args.debug:
            import traceback
            ui.show_error_message("Fatal error", suggestion=str(e), retry_info=traceback.format_exc())
        else:
            ui.show_error_message("An unexpected error occurred. Use --debug for details.")
        return 1


if __name__ == "__main__":
    sys.exit(main())
