#!/usr/bin/env python3
"""Run every bundled audit config through the command-line front end.

Results land under --out (one subdirectory per audit).  Exits nonzero if
any audit fails, so this doubles as a slow self-check:

    python3 scripts/run_audits.py --out results
    python3 scripts/run_audits.py --out results --quick   # ~100x fewer trials
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from kcompress.cli import dispatch

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")

AUDITS = [
    ("validate-scheme", "validity_sweep.cfg"),
    ("concentration", "rectangle_concentration.cfg"),
    ("concentration", "sum_threshold_concentration.cfg"),
    ("bound-table", "rectangle_concentration.cfg"),
    ("bound-table", "sum_threshold_concentration.cfg"),
    ("pac", "rectangle_pac.cfg"),
    ("pac", "sum_threshold_pac.cfg"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output root directory")
    parser.add_argument("--quick", action="store_true", help="run with 20 trials per cell")
    parser.add_argument("--seed", type=int, default=None, help="override every config seed")
    args = parser.parse_args()

    failures = 0
    for command, cfg_name in AUDITS:
        label = f"{command}-{cfg_name.removesuffix('.cfg')}"
        out_dir = os.path.join(args.out, label)
        argv = [command, "--config", os.path.join(CONFIG_DIR, cfg_name), "--out", out_dir]
        if args.quick:
            argv += ["--trials", "20"]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        print(f"== {label}")
        code = dispatch(argv)
        if code != 0:
            failures += 1
            print(f"== {label}: exit {code}", file=sys.stderr)
    if failures:
        print(f"{failures} audit(s) failed", file=sys.stderr)
        return 1
    print(f"all {len(AUDITS)} audits passed; outputs in {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
