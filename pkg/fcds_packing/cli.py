"""CLI entry point for the FCDS packing simulator."""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from .config import ConfigError, RunConfig, build_config, read_config_file
from .congest_sim import ProtocolError
from .fcds_protocol import PreconditionError
from .graph_core import GraphFormatError, GraphParameterError
from .harness import RunOutcome, cmd_generate, cmd_run, cmd_sweep, cmd_verify
from .oracle_verifier import VERIFY_LEVELS, VerificationError

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_INPUT = 2


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--graph", help="graph file, or harary:N:K, ringclique:D:M, complete:N")
    parser.add_argument("--t", type=int, help="number of classes (default ceil(κ/2))")
    parser.add_argument("--lmul", type=float, help="layer multiplier, L = ceil(lmul * ceil(log2 n))")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--out", help="output file")
    parser.add_argument("--verify-level", choices=VERIFY_LEVELS, help="oracle depth")
    parser.add_argument("--exact-matching-cap", type=int,
                        help="largest helper graph checked against an exact maximum matching")
    parser.add_argument("--max-disjoint-paths-cap", type=int,
                        help="largest path set handed to the disjoint path oracle")
    parser.add_argument("--verbose", action="store_true", default=None, help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcds", description="Distributed FCDS packing simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="write a test graph")
    generate.add_argument("kind", help="harary, ringclique, complete or file")
    generate.add_argument("args", nargs="+", help="generator integers, or the source path")
    generate.add_argument("-o", "--out", required=True, help="edge-list file to write")

    for name, text in (("run", "run once and write a JSON report"),
                       ("verify", "run once with all oracles")):
        _add_run_flags(commands.add_parser(name, help=text))

    sweep = commands.add_parser("sweep", help="run many seeds and write a CSV")
    _add_run_flags(sweep)
    sweep.add_argument("--seeds", type=int, help="number of seeds")
    sweep.add_argument("--jobs", type=int, help="parallel workers")

    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, object] = {
        "graph": args.graph,
        "t": args.t,
        "lmul": args.lmul,
        "seed": args.seed,
        "out": args.out,
        "verify_level": args.verify_level,
        "verbose": args.verbose,
        "exact_matching_cap": args.exact_matching_cap,
        "max_disjoint_paths_cap": args.max_disjoint_paths_cap,
        "seeds": getattr(args, "seeds", None),
        "jobs": getattr(args, "jobs", None),
    }
    file_values = read_config_file(args.config) if args.config else None
    return build_config(file_values, overrides)


def _print_outcome(outcome: RunOutcome) -> None:
    verification = outcome.verification
    params = outcome.result.params
    report = outcome.result.report

    print(f"✅ Protocol finished in {report.rounds_total} rounds (t={params.t}, L={params.L})")
    print(f"   Valid CDS classes: {verification.valid_cds_count}/{params.t}, "
          f"packing size {verification.packing_size}")
    for class_id, verdict in sorted(verification.classes.items()):
        print(f"   class {class_id}: dominating={verdict.dominating} connected={verdict.connected}")
    if outcome.result.truncated:
        print("ℹ️  Some phase hit its round cap; see the report")
    if verification.helper_mismatches:
        print(f"   helper graph mismatches: {len(verification.helper_mismatches)}")
    for shortfall in verification.connectivity_shortfalls:
        print(f"ℹ️  {shortfall}")


def _report_violations(outcome: RunOutcome) -> int:
    if outcome.ok:
        return EXIT_OK
    for violation in outcome.verification.structural_violations:
        print(f"❌ {violation}", file=sys.stderr)
    return EXIT_VIOLATION


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)

    try:
        if args.command == "generate":
            print(f"🔍 Generating {args.kind} graph...")
            stats = cmd_generate(args.kind, args.args, args.out)
            print(f"✅ Wrote {args.out}")
            print(f"   {stats.summary_line()}")
            return EXIT_OK

        config = _load_config(args)
        logging.basicConfig(
            level=logging.DEBUG if config.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )

        if args.command == "sweep":
            print(f"🔍 Sweeping {config.seeds} seed(s) on {config.graph}...")
            sweep = cmd_sweep(config)
            if not config.out:
                print(sweep.text, end="")
            else:
                print(f"✅ Wrote {len(sweep.rows)} row(s) to {config.out}")
            if sweep.ok:
                return EXIT_OK
            for violation in sweep.violations:
                print(f"❌ {violation}", file=sys.stderr)
            return EXIT_VIOLATION

        print(f"🔍 Running on {config.graph} with seed {config.seed}...")
        if args.command == "verify":
            outcome, text = cmd_verify(config)
        else:
            outcome, text = cmd_run(config)

        _print_outcome(outcome)
        if config.out:
            print(f"\n✨ Report written to {config.out}")
        else:
            print(text, end="")
        if args.command == "verify" and outcome.ok:
            print("✅ All structural checks passed")
        return _report_violations(outcome)

    except (ConfigError, GraphFormatError, GraphParameterError, PreconditionError, OSError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (ProtocolError, VerificationError) as e:
        print(f"❌ Protocol violation: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    except Exception as e:
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
