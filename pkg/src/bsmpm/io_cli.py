"""Configuration parsing, result emission, and the command-line interface.

Configs are small YAML documents naming a scene plus overrides; snapshots
and series are plain delimited text so outputs are bit-reproducible and
trivially diffable.
"""

from __future__ import annotations

import argparse
import inspect
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import scenes as scenes_mod
from . import solver as solver_mod
from .errors import ConfigurationError, NumericalFatalError, OutOfDomainError
from .fbar import Projection
from .particles import ParticleSet
from .scenes import SCENE_BUILDERS, SceneConfig, build_state
from .solver import SimState, TimeControls

SNAPSHOT_FORMAT = "bsmpm-snapshot"
SNAPSHOT_VERSION = 1
SNAPSHOT_COLUMNS = (
    "id", "x", "y", "z", "vx", "vy", "vz",
    "hydrostatic_stress", "von_mises", "eps_plastic", "volume",
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

_CONFIG_KEYS = {
    "scene", "level", "resolution", "degree", "projection",
    "dt", "t_end", "cadence",
}


@dataclass(frozen=True)
class RunManifest:
    """A scene (or config file) plus command-line overrides."""

    target: str
    degree: Optional[int] = None
    projection: Optional[str] = None
    level: Optional[int] = None
    dt: Optional[float] = None
    t_end: Optional[float] = None
    cadence: Optional[int] = None
    out_dir: Optional[str] = None


def _build_scene(name: str, overrides: dict) -> SceneConfig:
    """Invoke a scene builder with only the overrides it accepts; reject
    overrides the scene has no parameter for."""
    try:
        builder = SCENE_BUILDERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scene {name!r}; expected one of {sorted(SCENE_BUILDERS)}"
        ) from None
    params = inspect.signature(builder).parameters
    kwargs = {}
    time_overrides = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("dt", "t_end", "cadence"):
            time_overrides[key] = value
        elif key in params:
            kwargs[key] = value
        else:
            raise ConfigurationError(
                f"scene {name!r} does not accept the key {key!r}"
            )
    config = builder(**kwargs)
    if time_overrides:
        t = config.time
        config = replace(
            config,
            time=TimeControls(
                dt=float(time_overrides.get("dt", t.dt)),
                t_end=float(time_overrides.get("t_end", t.t_end)),
                cadence=int(time_overrides.get("cadence", t.cadence)),
            ),
        )
    return config


def _parse_config_dict(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigurationError(f"config syntax error{where}: {exc}") from None
    if data is None:
        raise ConfigurationError("empty config")
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"config must be a key-value mapping, got {type(data).__name__}"
        )
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(
            f"unknown config key {sorted(unknown)[0]!r}; expected keys from "
            f"{sorted(_CONFIG_KEYS)}"
        )
    if "scene" not in data:
        raise ConfigurationError("config is missing the 'scene' key")
    return data


def _config_from_dict(data: dict) -> SceneConfig:
    overrides = {k: v for k, v in data.items() if k != "scene"}
    if "degree" in overrides:
        overrides["degree"] = int(overrides["degree"])
    if "projection" in overrides:
        raw = overrides["projection"]
        if raw is False:
            raw = "off"  # YAML 1.1 reads a bare 'off' as a boolean
        proj = Projection.parse(str(raw))
        if proj is Projection.PMINUS1 and overrides.get("degree") == 1:
            proj = Projection.CONSTANTS  # the p - 1 space of linears
        overrides["projection"] = proj
    return _build_scene(str(data["scene"]), overrides)


def parse_config(text: str) -> SceneConfig:
    """Parse a YAML scene config into a validated SceneConfig.

    Unknown keys are errors naming the key; YAML syntax errors are
    reported with their line number. ``projection: pminus1`` with degree 1
    resolves to per-cell constants.
    """
    return _config_from_dict(_parse_config_dict(text))


def load_config(path) -> SceneConfig:
    return parse_config(Path(path).read_text())


def manifest_config(manifest: RunManifest) -> SceneConfig:
    """SceneConfig for a manifest: a scene name or config file, with the
    manifest's overrides layered on top of the file's keys."""
    target = manifest.target
    if target in SCENE_BUILDERS:
        data = {"scene": target}
    else:
        path = Path(target)
        if not path.exists():
            raise ConfigurationError(
                f"{target!r} is neither a scene name nor a config file; "
                f"scenes: {sorted(SCENE_BUILDERS)}"
            )
        data = _parse_config_dict(path.read_text())
    overrides = {
        "degree": manifest.degree,
        "projection": manifest.projection,
        "level": manifest.level,
        "dt": manifest.dt,
        "t_end": manifest.t_end,
        "cadence": manifest.cadence,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return _config_from_dict(data)


def von_mises_stress(pset: ParticleSet) -> np.ndarray:
    """sqrt(3/2 s:s) with s the stress deviator."""
    hyd = np.trace(pset.sigma, axis1=-2, axis2=-1) / 3.0
    s = pset.sigma.copy()
    for a in range(3):
        s[:, a, a] -= hyd
    return np.sqrt(1.5 * (s * s).sum(axis=(1, 2)))


def write_snapshot(pset: ParticleSet, path) -> None:
    """One particle per row, comma-delimited, 17 significant digits."""
    hyd = np.trace(pset.sigma, axis1=-2, axis2=-1) / 3.0
    vm = von_mises_stress(pset)
    with open(path, "w") as f:
        f.write(f"# {SNAPSHOT_FORMAT} v{SNAPSHOT_VERSION}\n")
        f.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for i in range(pset.n):
            row = (
                pset.x[i, 0], pset.x[i, 1], pset.x[i, 2],
                pset.v[i, 0], pset.v[i, 1], pset.v[i, 2],
                hyd[i], vm[i], pset.eps_p[i], pset.V[i],
            )
            f.write(str(i) + "," + ",".join("%.17g" % v for v in row) + "\n")


def read_snapshot(path) -> dict:
    """Snapshot file back as a dict of column arrays; rejects files whose
    header does not declare a supported version."""
    with open(path) as f:
        header = f.readline().strip()
        expected = f"# {SNAPSHOT_FORMAT} v{SNAPSHOT_VERSION}"
        if header != expected:
            raise ConfigurationError(
                f"unsupported snapshot header {header!r}; expected {expected!r}"
            )
        columns = f.readline().strip().split(",")
        if tuple(columns) != SNAPSHOT_COLUMNS:
            raise ConfigurationError(f"unexpected snapshot columns {columns}")
        rows = [line.strip().split(",") for line in f if line.strip()]
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    out = {name: data[:, j] for j, name in enumerate(columns)}
    out["id"] = out["id"].astype(np.int64)
    return out


def write_series(metrics: Sequence[dict], path) -> None:
    """Per-step metric rows (equal-keyed dicts) as a CSV file."""
    with open(path, "w") as f:
        if not metrics:
            return
        keys = list(metrics[0])
        f.write(",".join(keys) + "\n")
        for row in metrics:
            f.write(",".join("%.17g" % row[k] for k in keys) + "\n")


def convergence_report(runs: Sequence[tuple[float, float]]) -> list[dict]:
    """Rows of (h, error, order) with order = log2(e_prev / e_this); the
    first row's order is None. Non-monotone errors give negative orders."""
    report = []
    prev = None
    for h, err in runs:
        order = None
        if prev is not None and err > 0.0 and prev > 0.0:
            order = math.log2(prev / err)
        report.append({"h": h, "error": err, "order": order})
        prev = err
    return report


def format_report(report: Sequence[dict]) -> str:
    lines = [f"{'h':>12}  {'error':>14}  {'order':>7}"]
    for row in report:
        order = "" if row["order"] is None else f"{row['order']:7.3f}"
        lines.append(f"{row['h']:12.6g}  {row['error']:14.8g}  {order}")
    return "\n".join(lines)


def execute_run(manifest: RunManifest) -> SimState:
    """Build and run the manifest's scene, emitting snapshots and a metric
    series when an output directory is set. Returns the final state."""
    config = manifest_config(manifest)
    state = build_state(config)
    out_dir = Path(manifest.out_dir) if manifest.out_dir else None
    series: list[dict] = []

    def observe(s: SimState) -> None:
        series.append(
            {
                "step": s.step_count,
                "t": s.t,
                "kinetic_energy": s.particles.kinetic_energy(),
                "internal_work": s.internal_work,
            }
        )
        if out_dir is not None:
            write_snapshot(s.particles, out_dir / f"snap_{s.step_count:08d}.csv")

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    controls = config.time
    observers = (observe,) if controls.cadence else ()
    summary = solver_mod.run(state, controls, observers)
    if out_dir is not None:
        write_snapshot(state.particles, out_dir / "snap_final.csv")
        write_series(series, out_dir / "series.csv")
    print(
        f"{config.name}: {summary.n_steps} steps to t={summary.t:g} s in "
        f"{summary.wall_time:.1f} s wall; max speed {summary.max_speed:.6g}"
    )
    return state


_CONVERGE_METRICS = {
    "vibrating_bar": lambda s: scenes_mod.l2_displacement_error(s.particles, s.t),
    "cook_membrane": lambda s: scenes_mod.cook_tip_displacement(s.particles),
}


def execute_converge(
    scene: str, degree: int, projection: str, levels: Sequence[int]
) -> list[dict]:
    """Run a scene over a level ladder and report (h, error, order).

    The vibrating bar measures the analytic L2 displacement error; Cook's
    membrane measures successive tip-displacement differences (the finest
    level is the reference and has no row of its own).
    """
    if scene not in _CONVERGE_METRICS:
        raise ConfigurationError(
            f"converge supports {sorted(_CONVERGE_METRICS)}, not {scene!r}"
        )
    proj = Projection.parse(projection)
    if proj is Projection.PMINUS1 and degree == 1:
        proj = Projection.CONSTANTS
    values = []
    for level in levels:
        config = _build_scene(
            scene, {"level": level, "degree": degree, "projection": proj}
        )
        state = build_state(config)
        solver_mod.run(state, config.time)
        h = float(
            min(
                (b - a) / n
                for a, b, n in zip(
                    config.domain_min, config.domain_max, config.n_elements
                )
            )
        )
        values.append((h, _CONVERGE_METRICS[scene](state)))
    if scene == "vibrating_bar":
        runs = values
    else:
        runs = [
            (h, abs(v - values[-1][1])) for h, v in values[:-1]
        ]
    report = convergence_report(runs)
    print(format_report(report))
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _parse_levels(text: str) -> list[int]:
    """'1..3' or '2' -> list of levels."""
    try:
        if ".." in text:
            a, b = text.split("..")
            levels = list(range(int(a), int(b) + 1))
        else:
            levels = [int(text)]
    except ValueError:
        raise ConfigurationError(
            f"bad levels spec {text!r}; expected 'N' or 'A..B'"
        ) from None
    if not levels:
        raise ConfigurationError(f"empty level range {text!r}")
    return levels


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsmpm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scene or config file")
    p_run.add_argument("target", help="scene name or YAML config path")
    p_run.add_argument("--degree", type=int)
    p_run.add_argument(
        "--projection", choices=[m.value for m in Projection]
    )
    p_run.add_argument("--level", type=int)
    p_run.add_argument("--out", dest="out_dir")
    p_run.add_argument("--cadence", type=int)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--tend", dest="t_end", type=float)

    p_conv = sub.add_parser("converge", help="level-ladder convergence study")
    p_conv.add_argument("scene")
    p_conv.add_argument("--degree", type=int, default=2)
    p_conv.add_argument(
        "--projection", choices=[m.value for m in Projection], default="pminus1"
    )
    p_conv.add_argument("--levels", default="1..3")

    sub.add_parser("list-scenes", help="list available scenes")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "list-scenes":
            for name in sorted(SCENE_BUILDERS):
                print(name)
            return EXIT_OK
        if args.command == "run":
            manifest = RunManifest(
                target=args.target,
                degree=args.degree,
                projection=args.projection,
                level=args.level,
                dt=args.dt,
                t_end=args.t_end,
                cadence=args.cadence,
                out_dir=args.out_dir,
            )
            execute_run(manifest)
            return EXIT_OK
        execute_converge(
            args.scene, args.degree, args.projection, _parse_levels(args.levels)
        )
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFatalError, OutOfDomainError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
