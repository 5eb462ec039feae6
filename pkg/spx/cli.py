#!/usr/bin/env python3
"""Command-line interface for spx."""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from .config import Config
from .exceptions import SpxError
from .experiment_tracker import ExperimentTracker
from .harness import BENCHMARKS, Runner, render_markdown, run_benchmark
from .netsim import ATTACKS, Protocol, ScenarioSpec, attack_campaign, run_scenario

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def load_config(args: argparse.Namespace) -> Config:
    """Config file (if any), then environment, then command-line flags."""
    config = Config.from_file(args.config) if args.config else Config.from_env()
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "runs", None) is not None:
        config.runs = args.runs
    if getattr(args, "pattern", None):
        config.noise_pattern = args.pattern
    if args.out_dir:
        config.out_dir = args.out_dir
    config.verbose = config.verbose or args.verbose
    config.validate()
    return config


def cmd_bench(args: argparse.Namespace, config: Config) -> int:
    tracker = None if args.no_save else ExperimentTracker(config.out_dir)
    table = run_benchmark(args.benchmark, config, Protocol(args.protocol), Runner(args.runner), tracker)
    if args.markdown:
        print(render_markdown(args.benchmark, table), end="")
    else:
        print(table.to_string(index=False))
    if tracker is not None:
        print(f"\nSaved to {tracker.base_dir}")
    if args.benchmark == "overhead" and not table["match"].all():
        return 1
    if args.benchmark == "concurrency" and not table["flat"].all():
        return 1
    return 0


def cmd_attack(args: argparse.Namespace, config: Config) -> int:
    spec = ScenarioSpec.from_config(config, protocol=Protocol(args.protocol))
    seeds = [config.seed + trial for trial in range(args.trials)]
    reports = attack_campaign(args.attack, spec, seeds, strawman=args.strawman)
    defeated = sum(r.defeated for r in reports)
    variant = "strawman" if args.strawman else "spx"
    print(f"{args.attack} vs {spec.label} ({variant}): {defeated}/{len(reports)} defeated, "
          f"{len(reports) - defeated}/{len(reports)} succeeded")

    if not args.no_save:
        tracker = ExperimentTracker(config.out_dir)
        tracker.start_experiment(f"attack_{args.attack}_{variant}", metadata={"attack": args.attack, "seeds": seeds})
        tracker.save_output("".join(json.dumps(r.to_dict()) + "\n" for r in reports), "attacks.jsonl")
        tracker.finish_experiment()

    # Against SPX every attack must fail; the strawman exists to show it would not.
    if not args.strawman and defeated < len(reports):
        return 1
    return 0


def cmd_run(args: argparse.Namespace, config: Config) -> int:
    spec = ScenarioSpec.from_file(args.topology)
    if args.seed is not None or os.getenv("SPX_SEED"):
        spec = replace(spec, seed=config.seed)
    result = run_scenario(spec)
    for name, outcomes in result.outcomes.items():
        for outcome in outcomes:
            print(f"{name:>10} {outcome.conn:<24} {outcome.status.value:<12} {outcome.reason or ''}")
    if args.trace:
        result.trace.save(args.trace)
        print(f"\nTrace written to {args.trace}")
    return 0 if result.all_succeeded else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spx",
        description="SPX: edge-ready extensions to end-to-end secure protocols",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Overhead table (extra bytes and RTTs) for TLX and every NoiXe pattern
  spx bench overhead --markdown

  # Handshake times for NoiXe XX, 20 runs, over loopback sockets
  spx bench handshake --protocol noixe --pattern XX --runner loopback

  # Cuckoo attack against SPX, then against the strawman design
  spx attack cuckoo --trials 100
  spx attack cuckoo --strawman

  # A passive tap on every link never sees key material
  spx attack passive --trials 10

  # Run one scenario from a topology file and keep its trace
  spx run --topology scenario.conf --trace trace.jsonl
        """
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Config file in key = value format")
    common.add_argument("--seed", type=int, help="RNG seed (default: 0, or SPX_SEED)")
    common.add_argument("--out-dir", help="Directory for experiment outputs (default: ./experiments)")
    common.add_argument("--no-save", action="store_true", help="Do not write experiment outputs")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable verbose output")

    protocol = argparse.ArgumentParser(add_help=False)
    protocol.add_argument(
        "--protocol",
        choices=[p.value for p in Protocol],
        default=Protocol.TLX.value,
        help="Protocol family (default: tlx)"
    )
    protocol.add_argument("--pattern", help="Noise handshake pattern (default: XX)")

    commands = parser.add_subparsers(dest="command", required=True)

    bench = commands.add_parser("bench", parents=[common, protocol], help="Run a benchmark")
    bench.add_argument("benchmark", choices=sorted(BENCHMARKS))
    bench.add_argument(
        "--runner",
        choices=[r.value for r in Runner],
        default=Runner.SIM.value,
        help="Virtual-time simulator or loopback sockets (default: sim)"
    )
    bench.add_argument("--runs", type=int, help="Repetitions per configuration (default: 20)")
    bench.add_argument("--markdown", action="store_true", help="Print the result as a markdown table")
    bench.set_defaults(handler=cmd_bench)

    attack = commands.add_parser("attack", parents=[common, protocol], help="Mount an attack on the edge")
    attack.add_argument("attack", choices=sorted(ATTACKS))
    attack.add_argument("--strawman", action="store_true",
                        help="Attack the design without channel binding instead of SPX")
    attack.add_argument("--trials", type=int, default=100, help="Number of seeded runs (default: 100)")
    attack.set_defaults(handler=cmd_attack)

    run = commands.add_parser("run", parents=[common], help="Run one scenario from a topology file")
    run.add_argument("--topology", required=True, help="Topology file in key = value format")
    run.add_argument("--trace", help="Write the frame trace as JSON lines")
    run.set_defaults(handler=cmd_run)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args)
        return args.handler(args, config)
    except SpxError as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
