"""Command line entry point: ``contractacl run`` and ``contractacl verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .chain import SnapshotError, verify_snapshot
from .errors import ScenarioError
from .scenario import bundled_scenario, run_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contractacl",
        description="Replay IoT access-control scenarios on a simulated proof-of-work ledger.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and check its expectations")
    run.add_argument("scenario", nargs="?", help="scenario path (default: bundled casestudy.scn)")
    run.add_argument("--difficulty", type=int, help="override proof-of-work difficulty in leading zero bits")
    run.add_argument("--seed", type=int, help="override the world seed")
    run.add_argument("--out", default="run-output", help="directory for runlog.jsonl and snapshot.json")
    run.add_argument("--strict-time", action="store_true", default=None,
                     help="ACCs use the block timestamp instead of the request's time argument")

    verify = sub.add_parser("verify", help="replay a chain snapshot on a fresh node")
    verify.add_argument("snapshot", help="snapshot.json written by 'run'")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        path = args.scenario or bundled_scenario()
        try:
            result = run_scenario(path, args.difficulty, args.seed, args.out, args.strict_time)
        except ScenarioError as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return EXIT_BAD_INPUT
        for failure in result.failures:
            print(f"FAIL {failure}")
        checks = sum(1 for r in result.records if "expect" in r)
        height = result.network.reference_node.height
        print(f"{'ok' if result.ok else 'failed'}: {checks} expectations, {height} blocks; "
              f"log {result.runlog_path}, snapshot {result.snapshot_path}")
        return EXIT_OK if result.ok else EXIT_FAILED

    try:
        valid = verify_snapshot(args.snapshot)
    except (OSError, SnapshotError) as exc:
        print(f"cannot read snapshot: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    print("valid" if valid else "INVALID")
    return EXIT_OK if valid else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
