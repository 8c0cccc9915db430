"""
CQLite Scenario Runner - Multi-robot exploration trials

Verbs:
1. run:     run a scenario's trials with its configured policy
2. compare: run cqlite, greedy_frontier and full_share on the same seeds
3. genmap:  print a seeded closed map with rectangular obstacles

Usage:
    python cqlite_runner.py run scenarios/standard.cfg
    python cqlite_runner.py compare scenarios/standard.cfg --out output/compare
    python cqlite_runner.py genmap 50 50 0.2 7 > maps/generated_50x50.txt
"""

import sys
import argparse
import logging
from datetime import datetime
from typing import Dict, List, Optional

import config
from exploration_engine.map_generator import MapGenerationError, generate_map
from exploration_engine.scenario import ConfigError, emit_config, load_scenario
from exploration_engine.simulator import SimConfigError
from exploration_engine.trial_runner import TrialSummary, run_trials
from exploration_engine.world import MapParseError
from utils import set_console_level

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def print_header(text: str):
    """Print a formatted header"""
    print("\n" + "=" * 70)
    print(f"  {text}")
    print("=" * 70)


def print_summaries(summaries: Dict[str, TrialSummary]):
    """Print per-policy mean metrics"""
    print(f"\n{'policy':<18}{'explored %':>12}{'overlap %':>12}{'bytes':>14}{'merges/it':>12}{'time s':>10}")
    print("-" * 78)
    for policy, summary in summaries.items():
        print(
            f"{policy:<18}{summary.mean('exploration_pct'):>12.2f}{summary.mean('overlap_pct'):>12.2f}"
            f"{summary.mean('total_bytes'):>14.0f}{summary.mean('merge_ratio'):>12.3f}"
            f"{summary.mean('sim_time_s'):>10.1f}"
        )
    for policy, summary in summaries.items():
        status = "✓" if summary.all_completed else "✗"
        print(f"  {status} {policy}: {summary.path}")


def run_scenario(path: str, out: Optional[str], snapshots: Optional[int], quiet: bool,
                 policies: Optional[List[str]] = None) -> int:
    """
    Load a scenario and run its trials

    Args:
        path: Scenario file
        out: Output directory override
        snapshots: Snapshot interval override
        quiet: Suppress banners
        policies: Policies to compare (None = scenario policy)

    Returns:
        Exit code
    """
    start_time = datetime.now()
    scenario = load_scenario(path)

    if not quiet:
        print_header("CQLITE EXPLORATION TRIALS")
        print(f"\nScenario: {path}")
        print(f"  Output directory: {out or scenario.output}")
        print(f"  Trials: {scenario.trials} (seeds {scenario['seed']}..{scenario['seed'] + scenario.trials - 1})")
        print(f"  Policies: {', '.join(policies or [scenario['policy']])}")
        print("\nEffective configuration:")
        for line in emit_config(scenario).splitlines():
            print(f"  {line}")

    summaries = run_trials(scenario, out_dir=out, policies=policies, snapshot_every=snapshots, quiet=quiet)

    if not quiet:
        print_header("RESULTS")
        print_summaries(summaries)
        elapsed = (datetime.now() - start_time).total_seconds()
        print(f"\nTotal time: {elapsed:.1f}s")

    ok = all(s.all_completed for s in summaries.values())
    if not quiet:
        print(f"\n{'✓ All trials completed' if ok else '✗ Some trials failed'}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Multi-robot exploration with lite Q-value sharing",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run the scenario's trials
  python cqlite_runner.py run scenarios/standard.cfg

  # Compare all policies on paired seeds, writing to a custom folder
  python cqlite_runner.py compare scenarios/standard.cfg --out output/compare

  # Union-map snapshot every 10 ticks
  python cqlite_runner.py run scenarios/room.cfg --snapshots 10

  # Generate a 50x50 map with 20% obstacles
  python cqlite_runner.py genmap 50 50 0.2 7
"""
    )
    sub = parser.add_subparsers(dest='verb', required=True)

    for verb, help_text in (('run', 'Run a scenario'), ('compare', 'Run every policy on the same seeds')):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument('scenario', help='Scenario file (key = value lines)')
        p.add_argument('--out', default=None, help='Output directory (default: scenario output)')
        p.add_argument('--snapshots', type=int, default=None, metavar='K',
                       help='Write the team map every K ticks')
        p.add_argument('--quiet', action='store_true', help='Only warnings and errors')

    g = sub.add_parser('genmap', help='Print a generated map')
    g.add_argument('width', type=int)
    g.add_argument('height', type=int)
    g.add_argument('density', type=float)
    g.add_argument('seed', type=int)
    g.add_argument('--out', default=None, help='Write to this file instead of stdout')
    g.add_argument('--quiet', action='store_true')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, 'quiet', False):
        set_console_level(logging.WARNING)

    try:
        if args.verb == 'genmap':
            text = generate_map(args.width, args.height, args.density, args.seed)
            if args.out:
                with open(args.out, 'w', encoding='utf-8') as f:
                    f.write(text)
                if not args.quiet:
                    print(f"✓ Map written to {args.out}")
            else:
                sys.stdout.write(text)
            return EXIT_OK

        policies = None
        if args.verb == 'compare':
            policies = load_scenario(args.scenario).policies or list(config.POLICIES)
        return run_scenario(args.scenario, args.out, args.snapshots, args.quiet, policies)

    except (ConfigError, SimConfigError, MapParseError, ValueError) as e:
        print(f"\n✗ Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("\n\n✗ Interrupted by user", file=sys.stderr)
        return EXIT_RUNTIME
    except (MapGenerationError, OSError, RuntimeError) as e:
        print(f"\n✗ Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        print(f"\n✗ Unexpected error: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
