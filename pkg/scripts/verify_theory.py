#!/usr/bin/env python3
"""Run every simulation-vs-theory verification suite and print the z-table.

Usage:
    python scripts/verify_theory.py [--seed SEED] [--out DIR] [--tamper]

Exit code 0 means every suite passed; 1 means at least one failed
(--tamper deliberately perturbs a constant in each suite and should
therefore exit 1).
"""

import argparse
import sys

from fgd_lab.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    parser.add_argument("--tamper", action="store_true")
    args = parser.parse_args()

    argv = ["verify", "--suite", "all", "--seed", str(args.seed)]
    if args.out:
        argv += ["--out", args.out]
    if args.tamper:
        argv.append("--tamper")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
