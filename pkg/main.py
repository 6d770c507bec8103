# main.py

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from multiprocessing_logging import install_mp_handler

from src.errors import (
    FlyingHandError,
    ScenarioParseError,
    ScenarioValidationError,
    SimulationDivergedError,
)
from src.outputs import emit_outputs
from src.presets import PRESETS
from src.scenario import (
    ScenarioConfig,
    load_preset,
    load_scenario,
    with_overrides,
)
from src.simulation import passivity_monitor, run
from utils.print_utils import BgColor, Color, PrintUtils, configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGED = 2
EXIT_PASSIVITY = 3


@dataclass
class RunOutcome:
    """Result of one scenario run, small enough to cross process boundaries."""

    name: str
    exit_code: int
    duration: float = 0.0
    paths: Dict[str, str] = field(default_factory=dict)
    passivity_passed: Optional[bool] = None
    message: str = ""


def run_scenario(config: ScenarioConfig) -> RunOutcome:
    """
    Simulate one scenario, check passivity and write its outputs.

    Parameters:
    - config (ScenarioConfig): validated scenario

    Returns:
    - RunOutcome: exit code, written paths and passivity verdict
    """
    start_time = time.time()
    try:
        trace = run(config)
    except SimulationDivergedError as error:
        return RunOutcome(config.name, EXIT_DIVERGED, message=str(error))
    except FlyingHandError as error:
        # Thrust or allocation failures mid-run are divergence too
        logger.error("%s: %s", config.name, error)
        return RunOutcome(config.name, EXIT_DIVERGED, message=str(error))

    report = passivity_monitor(trace)
    paths = emit_outputs(trace, config, report)
    exit_code = EXIT_OK
    if config.output.strict_passivity and not report.passed:
        exit_code = EXIT_PASSIVITY
    return RunOutcome(
        config.name,
        exit_code,
        duration=time.time() - start_time,
        paths=paths,
        passivity_passed=report.passed,
    )


def _load(source: str) -> ScenarioConfig:
    """A preset name or a scenario file path."""
    return load_preset(source) if source in PRESETS else load_scenario(source)


def collect_scenarios(args: argparse.Namespace) -> List[ScenarioConfig]:
    """
    Load every scenario named on the command line and apply the overrides.

    Raises:
    - ScenarioParseError / ScenarioValidationError: on the first bad scenario
    """
    sources = list(args.scenarios) + list(args.preset or [])
    if not sources:
        raise ScenarioValidationError(["no scenario file or --preset given"])
    return [
        with_overrides(
            _load(source),
            dt=args.dt,
            t_end=args.t_end,
            out_dir=args.out_dir,
            strict_passivity=args.strict_passivity,
        )
        for source in sources
    ]


def run_all(configs: Sequence[ScenarioConfig], jobs: int = 1) -> List[RunOutcome]:
    """Run scenarios one after the other, or in `jobs` worker processes."""
    if jobs <= 1 or len(configs) <= 1:
        return [run_scenario(config) for config in configs]
    # Worker records are forwarded to the parent console handler
    install_mp_handler()
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(run_scenario, configs))


def print_outcome(outcome: RunOutcome) -> None:
    if outcome.exit_code == EXIT_DIVERGED:
        PrintUtils.print_bg_color(
            f"{outcome.name}: diverged ({outcome.message})", BgColor.RED
        )
        return
    verdict = "passive" if outcome.passivity_passed else "passivity VIOLATED"
    bg_color = BgColor.GREEN if outcome.exit_code == EXIT_OK else BgColor.YELLOW
    PrintUtils.print_bg_color(
        f"{outcome.name}: {verdict}, {outcome.duration:.1f} s", bg_color
    )
    for fmt, path in outcome.paths.items():
        PrintUtils.print_color(f"  {fmt:<4} {path}", Color.CYAN)


# ================================================
# Sub-commands
# ================================================


def cmd_run(args: argparse.Namespace) -> int:
    configs = collect_scenarios(args)
    outcomes = run_all(configs, args.jobs)
    for outcome in outcomes:
        print_outcome(outcome)
    return max(outcome.exit_code for outcome in outcomes)


def cmd_validate(args: argparse.Namespace) -> int:
    for config in collect_scenarios(args):
        PrintUtils.print_color(f"{config.name}: ok", Color.GREEN)
    return EXIT_OK


def cmd_presets(_args: argparse.Namespace) -> int:
    for name in sorted(PRESETS):
        config = load_preset(name)
        PrintUtils.print_color(
            f"{name:<18} t_end={config.simulation.t_end:g} s, "
            f"{len(config.waypoints)} waypoint(s)",
            Color.CYAN,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Simulate a flying hand grasping an object off a wall.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logs")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, handler, help_text in (
        ("run", cmd_run, "simulate scenarios and write their outputs"),
        ("validate", cmd_validate, "parse and check scenarios without running"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("scenarios", nargs="*", help="scenario TOML files")
        sub.add_argument(
            "--preset", action="append", choices=sorted(PRESETS), help="built-in"
        )
        sub.add_argument("--dt", type=float, help="override the time step (s)")
        sub.add_argument("--t-end", type=float, help="override the duration (s)")
        sub.add_argument("--out-dir", help="override the output directory")
        sub.add_argument(
            "--strict-passivity",
            action="store_true",
            help="exit with code 3 when the passivity check fails",
        )
        sub.add_argument("--jobs", type=int, default=1, help="worker processes")
        sub.set_defaults(handler=handler)

    presets = commands.add_parser("presets", help="list the built-in scenarios")
    presets.set_defaults(handler=cmd_presets)
    return parser


# Main function that parses the command line and dispatches it
def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except ScenarioParseError as error:
        PrintUtils.print_bg_color(f"parse error: {error}", BgColor.RED)
        return EXIT_VALIDATION
    except ScenarioValidationError as error:
        PrintUtils.print_bg_color(str(error), BgColor.RED)
        return EXIT_VALIDATION
    except FlyingHandError as error:
        PrintUtils.print_bg_color(str(error), BgColor.RED)
        return EXIT_DIVERGED


# Entry point of the script when executed directly (e.g., python main.py run)
if __name__ == "__main__":
    sys.exit(main())
