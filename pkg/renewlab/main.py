"""
Command Line Entry Point for renewlab

    renewlab <tails|spectrum|renewal|mix|rates|norms|accept> [--config FILE]
             [--out DIR] [--seed N] [--threads N] [--gate-slack X]

Every subcommand writes manifest.json, its CSV files and summary.txt into one
run directory and prints one line per gate. Exit code 0 means every gate
passed, 1 a gate or numerical failure, 2 a configuration error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from renewlab import __version__
from renewlab.acceptance import SUBCOMMANDS, Laboratory, accept, enforce_gates
from renewlab.config import get_settings
from renewlab.errors import ConfigError, GateFailure, LabError
from renewlab.schemas import ExperimentConfig, GateResult
from renewlab.storage import RunDirectory

logger = logging.getLogger(__name__)

COMMANDS = ("tails", "spectrum", "renewal", "mix", "rates", "norms", "accept")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="renewlab", description="Operator renewal experiments for intermittent maps"
    )
    parser.add_argument("command", choices=COMMANDS, help="Experiment to run")
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment configuration")
    parser.add_argument("--out", type=Path, default=None, help="Run directory")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (u64)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")
    parser.add_argument("--gate-slack", type=float, default=None, help="Tolerance multiplier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Load the configuration file (or defaults) and apply command-line overrides.

    Raises:
        ConfigError: If the file cannot be read or an override is invalid
    """
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        seed=args.seed, threads=args.threads, gate_slack=args.gate_slack, output_dir=args.out
    )


def run_command(command: str, config: ExperimentConfig) -> List[GateResult]:
    """
    Run one subcommand into its run directory and write manifest and summary.

    Returns:
        List[GateResult]: Gates in evaluation order
    """
    settings = get_settings()
    path = config.output_dir or settings.output_root / f"{command}-{config.seed}"
    run = RunDirectory(path)
    lab = Laboratory(config, settings, run)
    logger.info("Running %s into %s with %d threads", command, run.path, lab.threads)
    gates = accept(lab) if command == "accept" else SUBCOMMANDS[command](lab)
    run.write_manifest(
        config,
        settings,
        extra={
            "command": command,
            "observables": lab.observables,
            "passed": all(g.passed for g in gates),
        },
    )
    run.write_summary([g.line() for g in gates])
    return gates


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        config = resolve_config(args)
        gates = run_command(args.command, config)
        for gate in gates:
            print(f"{'✅' if gate.passed else '❌'} {gate.line()}")
        enforce_gates(gates)
    except ConfigError as exc:
        print(f"❌ Configuration error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except GateFailure as exc:
        print(f"⚠️  Gate {exc.gate} failed; {exc.detail}")
        return exc.exit_code
    except LabError as exc:
        print(f"❌ {type(exc).__name__}: {exc.detail}", file=sys.stderr)
        return exc.exit_code

    print(f"✅ All {len(gates)} gates passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
