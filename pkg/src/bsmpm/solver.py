"""Explicit MUSL time loop with optional lower-order projection hooks.

One step: scatter mass/momentum and forces at the old particle positions
(internal forces carry the double-projected stress when projection is on),
solve nodal acceleration, advance particle kinematics, re-scatter the
updated momentum, gather the particle velocity gradient from the updated
nodal velocity, (optionally) replace its divergence by the projected one,
then update deformation gradient, volume, and stress. The particle stress
state is the constitutive stress; the hydrostatic projection enters only
the force integrand. All transfers within a step use the basis evaluated
at the step's starting positions.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import fbar, grid as grid_mod, kernels
from .constitutive import ElasticParams, J2Params, RETURN_MAX_ITER, RETURN_TOL_REL
from .errors import ConfigurationError, NumericalFatalError, OutOfDomainError
from .fbar import Projection, ProjectionGrid
from .grid import BackgroundGrid, BoundaryConditionSet, basis_tables
from .particles import ParticleSet

RELATIVE_MASS_CUTOFF = 1e-12
CFL_FACTOR = 1.0
_NO_RECON = np.zeros(0)


@dataclass
class TimeControls:
    dt: float
    t_end: float
    cadence: int = 0  # observer invocation period in steps; 0 = never

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigurationError(f"time step must be positive: {self.dt}")
        if self.t_end < 0.0:
            raise ConfigurationError(f"negative end time: {self.t_end}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class SimState:
    grid: BackgroundGrid
    particles: ParticleSet
    bcs: BoundaryConditionSet
    material: Union[ElasticParams, J2Params]
    body_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    projection: Projection = Projection.OFF
    projection_grid: Optional[ProjectionGrid] = None
    t: float = 0.0
    step_count: int = 0
    internal_work: float = 0.0  # accumulated stress power, energy diagnostics
    mass_cutoff: float = field(init=False)
    # reconstructed projected divergence of the last step (diagnostics)
    last_projected_div: Optional[np.ndarray] = field(default=None, init=False)

    def __post_init__(self):
        self.body_force = np.asarray(self.body_force, dtype=float)
        self.mass_cutoff = RELATIVE_MASS_CUTOFF * float(self.particles.mass.mean())
        if self.projection is not Projection.OFF and self.projection_grid is None:
            self.projection_grid = fbar.make_projection_grid(
                self.grid.basis, self.projection
            )
        n = self.particles.n
        self._work = np.zeros(n)
        self._hyd = np.zeros(n)
        self._div = np.zeros(n)
        self._recon = np.zeros(n)
        self._tbuf = None
        self._ptbuf = None
        if self.projection_grid is not None:
            m = self.projection_grid.basis.n_nodes
            self._pnum = np.zeros(m)
            self._pden = np.zeros(m)
            self._pval = np.zeros(m)
            self._sigma_eff = np.zeros((n, 3, 3))

    @property
    def elastic(self) -> ElasticParams:
        return (
            self.material.elastic
            if isinstance(self.material, J2Params)
            else self.material
        )


@dataclass
class RunSummary:
    n_steps: int
    t: float
    wall_time: float
    max_speed: float
    total_mass: float


def check_cfl(state: SimState, dt: float) -> float:
    """Warn when dt exceeds the dilatational-wave CFL limit; returns the
    limit."""
    h = float(state.grid.basis.spacing.min())
    limit = CFL_FACTOR * h / state.elastic.wave_speed
    if dt > limit:
        warnings.warn(
            f"dt={dt:g} exceeds CFL estimate {limit:g} (h={h:g})",
            stacklevel=2,
        )
    return limit


def _project_reconstruct(state: SimState, pt, q: np.ndarray, out: np.ndarray):
    """Lumped-L2 projection of q followed by reconstruction at the
    particles, using the state's preallocated nodal buffers."""
    p = state.particles
    state._pnum[:] = 0.0
    state._pden[:] = 0.0
    kernels.scatter_scalar_volume(
        pt.first, pt.avals, pt.p1, pt.nbx, pt.nby, q, p.V,
        state._pnum, state._pden,
    )
    cutoff = fbar.RELATIVE_VOLUME_CUTOFF * float(p.V.mean())
    kernels.lumped_values(state._pnum, state._pden, cutoff, state._pval)
    kernels.gather_scalar(
        pt.first, pt.avals, pt.p1, pt.nbx, pt.nby, state._pval, out
    )


def step(state: SimState, dt: float) -> None:
    """Advance the state by one MUSL step of size dt."""
    g = state.grid
    p = state.particles
    elastic = state.elastic
    try:
        grid_mod.reset(g)
        t = state._tbuf = basis_tables(g.basis, p.x, state._tbuf)
        projecting = state.projection is not Projection.OFF
        if projecting:
            pt = state._ptbuf = basis_tables(
                state.projection_grid.basis, p.x, state._ptbuf
            )

        # the internal-force integrand carries the double-projected stress;
        # the particle state keeps the constitutive stress
        if projecting:
            kernels.hydrostatic_of(p.sigma, state._hyd)
            _project_reconstruct(state, pt, state._hyd, state._div)
            kernels.corrected_stress(
                p.sigma, state._div, state._hyd, state._sigma_eff
            )
            sigma_force = state._sigma_eff
        else:
            sigma_force = p.sigma

        # mass, momentum, forces from the particles (old positions)
        kernels.scatter_all(
            t.first, t.avals, t.aderivs, t.p1, t.nbx, t.nby,
            p.mass, p.v, sigma_force, p.V, state.body_force, p.f_ext,
            g.mass, g.momentum, g.f_int, g.f_ext,
        )
        grid_mod.nodal_velocity(g, state.mass_cutoff)

        # nodal acceleration with boundary conditions
        kernels.accel_from_forces(
            g.f_int, g.f_ext, g.mass, state.mass_cutoff, g.accel
        )
        grid_mod.apply_bcs(g, state.bcs, "velocity")
        grid_mod.apply_bcs(g, state.bcs, "acceleration")
        g.velocity += dt * g.accel
        if not np.isfinite(g.accel).all():
            raise NumericalFatalError("non-finite nodal acceleration")

        # particle kinematics, then the MUSL momentum re-scatter
        kernels.advance_and_rescatter(
            t.first, t.avals, t.p1, t.nbx, t.nby,
            g.accel, g.velocity, p.mass, p.v, p.x, dt, g.momentum_upd,
        )
        kernels.divide_by_mass(
            g.momentum_upd, g.mass, state.mass_cutoff, g.velocity_upd
        )
        grid_mod.apply_bcs(g, state.bcs, "updated_velocity")

        # velocity gradient (basis still at the old positions)
        kernels.gather_velocity_gradient(
            t.first, t.avals, t.aderivs, t.p1, t.nbx, t.nby,
            g.velocity_upd, p.L,
        )
        if projecting:
            kernels.trace_of(p.L, state._div)
            _project_reconstruct(state, pt, state._div, state._recon)
            state.last_projected_div = state._recon
            recon = state._recon
        else:
            recon = _NO_RECON

        # fused per-particle tail: F-bar gradient, deformation update,
        # Jaumann rate, radial return, stress power (p.L ends up holding
        # the gradient actually applied)
        plastic = isinstance(state.material, J2Params)
        m = state.material if plastic else None
        code, bad = kernels.particle_update(
            p.L, recon, projecting, dt, p.F, p.V0, p.V, p.sigma, p.eps_p,
            elastic.lam, elastic.mu,
            plastic,
            m.sig_y if plastic else 0.0,
            m.hard_a if plastic else 0.0,
            m.hard_m if plastic else 0.0,
            RETURN_MAX_ITER,
            RETURN_TOL_REL * (m.sig_y if plastic else 1.0),
            state._work, state._hyd,
        )
        if code == kernels.ERR_INVERTED:
            raise NumericalFatalError(
                f"particle {bad} inverted (det F <= 0) at x={p.x[bad]}"
            )
        if code == kernels.ERR_NO_CONVERGENCE:
            raise NumericalFatalError(
                f"radial return did not converge for particle {bad}"
            )
        # midpoint stress power, for energy-balance diagnostics
        state.internal_work += dt * float(state._work.sum())
    except (NumericalFatalError, OutOfDomainError) as exc:
        raise type(exc)(f"step {state.step_count}: {exc}") from exc

    state.t += dt
    state.step_count += 1


def effective_stress(state: SimState) -> np.ndarray:
    """The stress entering the momentum equation: the double-projected
    stress when projection is on, otherwise the particle stress."""
    if state.projection is Projection.OFF:
        return state.particles.sigma
    return fbar.double_bar_stress(
        state.particles.sigma, state.particles, state.projection_grid
    )


Observer = Callable[[SimState], None]


def run(
    state: SimState,
    controls: TimeControls,
    observers: tuple[Observer, ...] = (),
) -> RunSummary:
    """Step until t_end, invoking observers every ``cadence`` steps (and
    after the final step)."""
    check_cfl(state, controls.dt)
    n = controls.n_steps
    start = time.perf_counter()
    for k in range(n):
        step(state, controls.dt)
        if controls.cadence and (
            state.step_count % controls.cadence == 0 or k == n - 1
        ):
            for obs in observers:
                obs(state)
    wall = time.perf_counter() - start
    speeds = np.linalg.norm(state.particles.v, axis=1)
    return RunSummary(
        n_steps=state.step_count,
        t=state.t,
        wall_time=wall,
        max_speed=float(speeds.max()) if speeds.size else 0.0,
        total_mass=float(state.particles.mass.sum()),
    )
