"""Material point storage and per-particle kinematic updates.

Particles live in structure-of-arrays form (one numpy array per field);
all operations are batch operations over the whole set, matching the
solver's phase structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalFatalError
from .grid import BackgroundGrid, basis_tables
from .splines import TensorBasis3D


@dataclass
class ParticleSet:
    """State arrays for n material points.

    F is the deformation gradient, sigma the Cauchy stress, eps_p the
    equivalent plastic strain, L a velocity-gradient scratch buffer, and
    f_ext a constant per-particle external force (lumped tractions).
    x0 keeps the initial positions for displacement metrics.
    """

    mass: np.ndarray
    V0: np.ndarray
    V: np.ndarray
    x0: np.ndarray
    x: np.ndarray
    v: np.ndarray
    F: np.ndarray
    sigma: np.ndarray
    eps_p: np.ndarray
    L: np.ndarray
    f_ext: np.ndarray
    material_id: np.ndarray

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "ParticleSet":
        return cls(
            mass=np.zeros(n),
            V0=np.zeros(n),
            V=np.zeros(n),
            x0=np.zeros((n, 3)),
            x=np.zeros((n, 3)),
            v=np.zeros((n, 3)),
            F=np.tile(np.eye(3), (n, 1, 1)),
            sigma=np.zeros((n, 3, 3)),
            eps_p=np.zeros(n),
            L=np.zeros((n, 3, 3)),
            f_ext=np.zeros((n, 3)),
            material_id=np.zeros(n, dtype=np.int64),
        )

    def copy(self) -> "ParticleSet":
        return ParticleSet(
            **{k: getattr(self, k).copy() for k in self.__dataclass_fields__}
        )

    def total_momentum(self) -> np.ndarray:
        return (self.mass[:, None] * self.v).sum(axis=0)

    def kinetic_energy(self) -> float:
        return float(0.5 * (self.mass * (self.v**2).sum(axis=1)).sum())

    def displacement(self) -> np.ndarray:
        return self.x - self.x0


@dataclass(frozen=True)
class ParticleBlock:
    """Axis-aligned seeding box with a per-cell sub-lattice of particles.

    ppc counts particles per background cell per axis. An optional mask
    keeps only candidates whose centroid satisfies it (vectorized predicate
    on an (n, 3) position array); V0 stays the full sub-cell volume.
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    ppc: tuple[int, int, int]
    density: float
    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None
    material_id: int = 0


def _axis_candidates(kv, lo, hi, ppc):
    h = kv.spacing
    offsets = (np.arange(ppc) + 0.5) / ppc
    tol = 1e-9 * h
    e0 = max(int(np.floor((lo - kv.x_min) / h)), 0)
    e1 = min(int(np.ceil((hi - kv.x_min) / h)), kv.n_elements)
    cells = np.arange(e0, e1)
    xs = (kv.x_min + (cells[:, None] + offsets[None, :]) * h).ravel()
    return xs[(xs >= lo - tol) & (xs <= hi + tol)]


def init_block(block: ParticleBlock, grid) -> ParticleSet:
    """Seed particles on the regular per-cell sub-lattice inside the block.

    Every particle gets the same initial volume cell_volume / prod(ppc) and
    mass density * V0; F = I, sigma = 0, eps_p = 0.
    """
    tb: TensorBasis3D = grid.basis if isinstance(grid, BackgroundGrid) else grid
    lo = np.asarray(block.lo, dtype=float)
    hi = np.asarray(block.hi, dtype=float)
    tol = 1e-9 * tb.spacing
    if np.any(lo < tb.domain_min - tol) or np.any(hi > tb.domain_max + tol):
        raise ConfigurationError(
            f"particle block [{block.lo}, {block.hi}] exceeds the "
            f"background domain"
        )
    axes = [
        _axis_candidates(tb.kv[a], lo[a], hi[a], block.ppc[a]) for a in range(3)
    ]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    if block.mask is not None:
        pos = pos[block.mask(pos)]
    n = pos.shape[0]
    pset = ParticleSet.zeros(n)
    v0 = float(np.prod(tb.spacing) / np.prod(block.ppc))
    pset.V0[:] = v0
    pset.V[:] = v0
    pset.mass[:] = block.density * v0
    pset.x0[:] = pos
    pset.x[:] = pos
    pset.material_id[:] = block.material_id
    return pset


def merge(sets: list[ParticleSet]) -> ParticleSet:
    if len(sets) == 1:
        return sets[0]
    fields = ParticleSet.__dataclass_fields__
    return ParticleSet(
        **{
            k: np.concatenate([getattr(s, k) for s in sets], axis=0)
            for k in fields
        }
    )


def update_particle_kinematics(
    pset: ParticleSet, grid: BackgroundGrid, dt: float, tables=None
) -> None:
    """Gather nodal acceleration and updated nodal velocity at the old
    positions; advance particle velocity and position."""
    if tables is None:
        tables = basis_tables(grid.basis, pset.x)
    t = tables
    kernels.gather_kinematics(
        t.first, t.avals, t.p1, t.nbx, t.nby,
        grid.accel, grid.velocity, pset.v, pset.x, dt,
    )


def update_deformation_gradient(
    pset: ParticleSet, L: np.ndarray, dt: float
) -> None:
    """F <- (I + dt L) F and V <- det(F) V0; fatal on inversion."""
    bad = kernels.update_deformation(L, dt, pset.F, pset.V0, pset.V)
    if bad != kernels.OK:
        raise NumericalFatalError(
            f"particle {bad} inverted (det F <= 0) at x={pset.x[bad]}"
        )


def rate_and_spin(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric (rate of deformation) and antisymmetric (spin) parts."""
    lt = np.swapaxes(L, -1, -2)
    return 0.5 * (L + lt), 0.5 * (L - lt)
