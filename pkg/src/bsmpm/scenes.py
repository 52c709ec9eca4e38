"""Benchmark scene builders, analytic references, and diagnostics.

Four scenes: a vibrating elastic bar with an exact solution, the
near-incompressible Cook's membrane, a plane-strain elasto-plastic block
collapse, and a 3D Taylor bar impact (quarter symmetry). All scenes run
the 3D solver; plane-strain scenes lock the out-of-plane axis at every
control point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .constitutive import ElasticParams, J2Params
from .errors import ConfigurationError
from .fbar import Projection, make_projection_grid
from .grid import BackgroundGrid, BoundaryCondition, BoundaryConditionSet
from .particles import ParticleBlock, ParticleSet, init_block, merge
from .solver import SimState, TimeControls
from .splines import TensorBasis3D


@dataclass(frozen=True)
class TractionLoad:
    """A total force lumped uniformly over the particles selected (by
    initial position) with ``select``."""

    select: Callable[[np.ndarray], np.ndarray]
    total_force: tuple[float, float, float]


@dataclass(frozen=True)
class SceneConfig:
    name: str
    domain_min: tuple[float, float, float]
    domain_max: tuple[float, float, float]
    n_elements: tuple[int, int, int]
    degree: int
    projection: Projection
    material: Union[ElasticParams, J2Params]
    blocks: tuple[ParticleBlock, ...]
    bcs: BoundaryConditionSet
    time: TimeControls
    body_force: tuple[float, float, float] = (0.0, 0.0, 0.0)
    plane_strain: bool = False
    tractions: tuple[TractionLoad, ...] = ()
    initial_velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not 1 <= self.degree <= 3:
            raise ConfigurationError(f"degree must be in 1..3: {self.degree}")


def build_state(config: SceneConfig) -> SimState:
    """Materialize a scene into a ready-to-run simulation state."""
    tb = TensorBasis3D.create(
        config.domain_min, config.domain_max, config.n_elements, config.degree
    )
    bg = BackgroundGrid(basis=tb)
    pset = merge([init_block(b, tb) for b in config.blocks])
    if config.initial_velocity is not None:
        pset.v[:] = config.initial_velocity(pset.x)
    if config.plane_strain:
        pset.v[:, 2] = 0.0
    for load in config.tractions:
        tagged = np.flatnonzero(load.select(pset.x0))
        if tagged.size == 0:
            raise ConfigurationError(
                f"traction selector tagged no particles in {config.name}"
            )
        pset.f_ext[tagged] += np.asarray(load.total_force) / tagged.size
    bcs = config.bcs
    if config.plane_strain and 2 not in bcs.lock_axes:
        bcs = BoundaryConditionSet(
            conditions=list(bcs.conditions), lock_axes=tuple(bcs.lock_axes) + (2,)
        )
    return SimState(
        grid=bg,
        particles=pset,
        bcs=bcs,
        material=config.material,
        body_force=np.asarray(config.body_force, dtype=float),
        projection=config.projection,
        projection_grid=make_projection_grid(tb, config.projection),
    )


def _level_dt(level: int) -> float:
    return 2e-4 * 2.0 ** (1 - level)


# ----------------------------------------------------------------- vibrating bar

BAR_LENGTH = 25.0
BAR_E = 100.0
BAR_RHO = 1.0
BAR_V0 = 0.1
BAR_WAVE_SPEED = float(np.sqrt(BAR_E / BAR_RHO))
_BAR_ELEMENTS = {1: (12, 2, 1), 2: (25, 5, 1), 3: (50, 10, 1)}


def vibrating_bar_scene(
    level: int = 2,
    degree: int = 2,
    projection: Projection = Projection.PMINUS1,
) -> SceneConfig:
    """Bar fixed at both ends with a sinusoidal initial velocity."""
    if level not in _BAR_ELEMENTS:
        raise ConfigurationError(f"vibrating bar level must be 1..3: {level}")

    def v_init(x):
        v = np.zeros_like(x)
        v[:, 0] = BAR_V0 * np.sin(np.pi * x[:, 0] / BAR_LENGTH)
        return v

    return SceneConfig(
        name="vibrating_bar",
        domain_min=(0.0, 0.0, 0.0),
        domain_max=(BAR_LENGTH, 5.0, 1.0),
        n_elements=_BAR_ELEMENTS[level],
        degree=degree,
        projection=projection,
        material=ElasticParams(E=BAR_E, nu=0.0, rho=BAR_RHO),
        blocks=(
            ParticleBlock(
                lo=(0.0, 0.0, 0.0),
                hi=(BAR_LENGTH, 5.0, 1.0),
                ppc=(4, 4, 2),
                density=BAR_RHO,
            ),
        ),
        bcs=BoundaryConditionSet(
            conditions=[
                BoundaryCondition("x_min", "roller"),
                BoundaryCondition("x_max", "roller"),
            ]
        ),
        time=TimeControls(dt=_level_dt(level), t_end=0.5),
        plane_strain=True,
        initial_velocity=v_init,
    )


def vibrating_bar_analytic(x, t: float):
    """Exact longitudinal displacement of the fixed-fixed bar."""
    c = BAR_WAVE_SPEED
    amp = BAR_V0 * BAR_LENGTH / (np.pi * c)
    return amp * np.sin(np.pi * c * t / BAR_LENGTH) * np.sin(
        np.pi * np.asarray(x) / BAR_LENGTH
    )


def l2_displacement_error(pset: ParticleSet, t: float) -> float:
    """Volume-weighted normalized L2 norm of the displacement error."""
    u = pset.displacement()
    u_exact = np.zeros_like(u)
    u_exact[:, 0] = vibrating_bar_analytic(pset.x0[:, 0], t)
    w = pset.V
    err2 = (w * ((u - u_exact) ** 2).sum(axis=1)).sum() / w.sum()
    return float(np.sqrt(err2))


# --------------------------------------------------------------- Cook's membrane

COOK_WIDTH = 48.0
COOK_LEFT_HEIGHT = 44.0
COOK_RIGHT_BOTTOM = 44.0
COOK_RIGHT_TOP = 60.0
COOK_TRACTION = 0.25  # N/m, vertical, on the right edge
_COOK_ELEMENTS = {1: (25, 31, 1), 2: (50, 62, 1), 3: (100, 124, 1)}


def _cook_mask(pos: np.ndarray) -> np.ndarray:
    """Standard tapered quadrilateral (0,0)-(48,44)-(48,60)-(0,44)."""
    x, y = pos[:, 0], pos[:, 1]
    s = x / COOK_WIDTH
    bottom = COOK_RIGHT_BOTTOM * s
    top = COOK_LEFT_HEIGHT + (COOK_RIGHT_TOP - COOK_LEFT_HEIGHT) * s
    return (y >= bottom) & (y <= top)


def cook_membrane_scene(
    level: int = 1,
    degree: int = 2,
    projection: Projection = Projection.PMINUS1,
) -> SceneConfig:
    """Near-incompressible tapered panel, fixed left edge, vertical
    traction on the right edge."""
    if level not in _COOK_ELEMENTS:
        raise ConfigurationError(f"Cook level must be 1..3: {level}")
    n_el = _COOK_ELEMENTS[level]
    h_x = 49.0 / n_el[0]
    spacing = h_x / 3  # in-plane particle spacing of the 3-ppc lattice
    edge_len = COOK_RIGHT_TOP - COOK_RIGHT_BOTTOM
    total = COOK_TRACTION * edge_len * 1.0  # out-of-plane thickness 1 m

    def right_edge(pos):
        return pos[:, 0] > COOK_WIDTH - spacing

    return SceneConfig(
        name="cook_membrane",
        domain_min=(0.0, 0.0, 0.0),
        domain_max=(49.0, 61.0, 1.0),
        n_elements=n_el,
        degree=degree,
        projection=projection,
        material=ElasticParams(E=1000.0, nu=0.499, rho=1.0),
        blocks=(
            ParticleBlock(
                lo=(0.0, 0.0, 0.0),
                hi=(COOK_WIDTH, COOK_RIGHT_TOP, 1.0),
                ppc=(3, 3, 2),
                density=1.0,
                mask=_cook_mask,
            ),
        ),
        bcs=BoundaryConditionSet(conditions=[BoundaryCondition("x_min", "fixed")]),
        time=TimeControls(dt=_level_dt(level), t_end=3.0),
        plane_strain=True,
        tractions=(TractionLoad(select=right_edge, total_force=(0.0, total, 0.0)),),
    )


def cook_tip_index(pset: ParticleSet) -> int:
    """Particle starting closest to the top-right corner (48, 60)."""
    d = (pset.x0[:, 0] - COOK_WIDTH) ** 2 + (pset.x0[:, 1] - COOK_RIGHT_TOP) ** 2
    return int(np.argmin(d))


def cook_tip_displacement(pset: ParticleSet) -> float:
    """Vertical displacement of the top-right-corner particle."""
    i = cook_tip_index(pset)
    return float(pset.x[i, 1] - pset.x0[i, 1])


# --------------------------------------------------------- elasto-plastic collapse


def elastoplastic_collapse_scene(
    degree: int = 2,
    projection: Projection = Projection.PMINUS1,
) -> SceneConfig:
    """Half-symmetric collapse of a plane-strain block under body force."""
    elastic = ElasticParams(E=1.0e5, nu=0.3, rho=1.0)
    return SceneConfig(
        name="elastoplastic_collapse",
        domain_min=(0.0, 0.0, 0.0),
        domain_max=(15.0, 10.0, 1.0),
        n_elements=(30, 20, 1),
        degree=degree,
        projection=projection,
        material=J2Params(elastic=elastic, sig_y=1.5e4),
        blocks=(
            ParticleBlock(
                lo=(0.0, 0.0, 0.0),
                hi=(8.0, 8.0, 1.0),
                ppc=(5, 5, 2),
                density=elastic.rho,
            ),
        ),
        bcs=BoundaryConditionSet(
            conditions=[
                BoundaryCondition("x_min", "roller"),
                BoundaryCondition("y_min", "roller"),
            ]
        ),
        time=TimeControls(dt=5e-4, t_end=0.3),
        body_force=(0.0, -3.0e3, 0.0),  # per unit mass; rho = 1
        plane_strain=True,
    )


def max_vertical_displacement(pset: ParticleSet) -> float:
    """Largest downward particle displacement."""
    return float((pset.x0[:, 1] - pset.x[:, 1]).max())


# -------------------------------------------------------------------- Taylor bar

TAYLOR_RADIUS = 0.391e-2  # m
TAYLOR_HEIGHT = 2.346e-2  # m
TAYLOR_SPEED = 373.0  # m/s toward the wall


def taylor_bar_scene(
    resolution: str = "desk",
    degree: int = 2,
    projection: Projection = Projection.PMINUS1,
) -> SceneConfig:
    """Quarter-symmetric cylindrical bar impacting a rigid wall at z=0."""
    if resolution not in ("desk", "paper"):
        raise ConfigurationError(
            f"Taylor bar resolution must be 'desk' or 'paper': {resolution!r}"
        )
    if resolution == "paper":
        n_el = (20, 20, 40)
        dt = 1e-8
    else:
        n_el = (10, 10, 20)
        dt = 2e-8
    elastic = ElasticParams(E=78.2e9, nu=0.3, rho=2700.0)

    def quarter_cylinder(pos):
        return pos[:, 0] ** 2 + pos[:, 1] ** 2 <= TAYLOR_RADIUS**2

    def v_init(x):
        v = np.zeros_like(x)
        v[:, 2] = -TAYLOR_SPEED
        return v

    return SceneConfig(
        name="taylor_bar",
        domain_min=(0.0, 0.0, 0.0),
        domain_max=(1.2e-2, 1.2e-2, 2.4e-2),
        n_elements=n_el,
        degree=degree,
        projection=projection,
        material=J2Params(
            elastic=elastic, sig_y=0.29e9, hard_a=125.0, hard_m=0.1
        ),
        blocks=(
            ParticleBlock(
                lo=(0.0, 0.0, 0.0),
                hi=(TAYLOR_RADIUS, TAYLOR_RADIUS, TAYLOR_HEIGHT),
                ppc=(5, 5, 5),
                density=elastic.rho,
                mask=quarter_cylinder,
            ),
        ),
        bcs=BoundaryConditionSet(
            conditions=[
                BoundaryCondition("x_min", "roller"),
                BoundaryCondition("y_min", "roller"),
                BoundaryCondition("z_min", "roller"),
            ]
        ),
        time=TimeControls(dt=dt, t_end=4e-5),
        initial_velocity=v_init,
    )


def final_bar_dimensions(pset: ParticleSet) -> tuple[float, float]:
    """(radius, height) in cm: max centroid distance from the axis and max
    axial coordinate."""
    r = float(np.sqrt(pset.x[:, 0] ** 2 + pset.x[:, 1] ** 2).max())
    h = float(pset.x[:, 2].max())
    return r * 100.0, h * 100.0


# ------------------------------------------------------------------- diagnostics


def hydrostatic_stress(pset: ParticleSet) -> np.ndarray:
    return np.trace(pset.sigma, axis1=-2, axis2=-1) / 3.0


def pressure_roughness(
    pset: ParticleSet, grid: BackgroundGrid, q: Optional[np.ndarray] = None
) -> float:
    """Mean per-cell standard deviation of particle hydrostatic stress,
    over cells holding at least two particles. Pass ``q`` to measure a
    different per-particle scalar."""
    tb = grid.basis
    nel = np.array(tb.n_elements)
    cell = ((pset.x - tb.domain_min) / tb.spacing).astype(np.int64)
    cell = np.clip(cell, 0, nel - 1)
    flat = cell[:, 0] + nel[0] * (cell[:, 1] + nel[1] * cell[:, 2])
    if q is None:
        q = hydrostatic_stress(pset)
    ncells = int(np.prod(nel))
    count = np.bincount(flat, minlength=ncells)
    s1 = np.bincount(flat, weights=q, minlength=ncells)
    s2 = np.bincount(flat, weights=q * q, minlength=ncells)
    occupied = count >= 2
    c = count[occupied]
    mean = s1[occupied] / c
    var = np.maximum(s2[occupied] / c - mean**2, 0.0)
    return float(np.sqrt(var).mean())


SCENE_BUILDERS = {
    "vibrating_bar": vibrating_bar_scene,
    "cook_membrane": cook_membrane_scene,
    "elastoplastic_collapse": elastoplastic_collapse_scene,
    "taylor_bar": taylor_bar_scene,
}
