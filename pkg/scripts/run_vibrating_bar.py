#!/usr/bin/env python3
"""Convergence ladder for the vibrating bar.

Runs refinement levels with and without the hydrostatic projection and
prints the L2 displacement error and observed order for each.
"""

import argparse

from bsmpm.io_cli import execute_converge


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--levels", default="1..3")
    args = ap.parse_args()
    levels = [int(x) for x in args.levels.split("..")]
    levels = list(range(levels[0], levels[-1] + 1))
    for projection in ("pminus1", "off"):
        print(f"--- projection {projection} ---")
        execute_converge("vibrating_bar", args.degree, projection, levels)


if __name__ == "__main__":
    main()
