#!/usr/bin/env python3
"""Taylor bar impact: final radius and height of the deformed bar.

Runs the quadratic-splines-with-linear-projection and the
linear-splines-with-constant-projection variants and prints the final
dimensions in cm.
"""

import argparse

from bsmpm.fbar import Projection
from bsmpm.scenes import build_state, final_bar_dimensions, taylor_bar_scene
from bsmpm.solver import run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", choices=["desk", "paper"], default="desk")
    args = ap.parse_args()
    for degree, projection in ((2, Projection.PMINUS1), (1, Projection.CONSTANTS)):
        cfg = taylor_bar_scene(
            resolution=args.resolution, degree=degree, projection=projection
        )
        state = build_state(cfg)
        summary = run(state, cfg.time)
        r, h = final_bar_dimensions(state.particles)
        print(
            f"p={degree} {projection.value:9s} radius {r:.3f} cm  "
            f"height {h:.3f} cm  ({summary.wall_time:.0f} s)"
        )


if __name__ == "__main__":
    main()
