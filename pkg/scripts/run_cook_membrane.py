#!/usr/bin/env python3
"""Cook's membrane study: tip displacement and pressure roughness.

Compares quadratic splines with the projection onto linears against the
plain runs, at one or more refinement levels.
"""

import argparse

from bsmpm.fbar import Projection
from bsmpm.scenes import (
    build_state,
    cook_membrane_scene,
    cook_tip_displacement,
    pressure_roughness,
)
from bsmpm.solver import run


def one(level, degree, projection):
    cfg = cook_membrane_scene(level=level, degree=degree, projection=projection)
    state = build_state(cfg)
    summary = run(state, cfg.time)
    tip = cook_tip_displacement(state.particles)
    rough = pressure_roughness(state.particles, state.grid)
    print(
        f"M{level} p={degree} {projection.value:8s} tip {tip:.5f} m  "
        f"roughness {rough:.4f} Pa  ({summary.wall_time:.0f} s)"
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2])
    args = ap.parse_args()
    for level in args.levels:
        one(level, 2, Projection.PMINUS1)
        one(level, 2, Projection.OFF)
        one(level, 1, Projection.OFF)


if __name__ == "__main__":
    main()
