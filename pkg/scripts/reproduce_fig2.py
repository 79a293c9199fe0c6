#!/usr/bin/env python3
"""Run the full rate study for both dimensions and plot it.

Writes out/fig2_d10/ and out/fig2_d100/, each containing trajectories.csv,
summary.json, and figure.svg. The d=100 panel takes a few minutes.

Usage:
    python scripts/reproduce_fig2.py [--seed SEED] [--out DIR]
"""

import argparse
import sys

from fgd_lab.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--out", default="out")
    args = parser.parse_args()

    for d in (10, 100):
        out_dir = f"{args.out}/fig2_d{d}"
        print(f"running rate study at d={d} -> {out_dir}")
        code = cli_main([
            "reproduce-fig2", "--d", str(d), "--seed", str(args.seed), "--out", out_dir,
        ])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
