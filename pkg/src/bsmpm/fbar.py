"""Volumetric-locking treatment: lumped-L2 projection of the velocity
divergence and of the hydrostatic stress onto a lower-order grid, plus the
modified velocity gradient and double-projected stress built from them.

The projection grid shares the element partition of the main grid; its
degree is one lower (or zero, i.e. per-cell constants). Projected nodal
values are volume-weighted particle averages, reconstruction is a plain
basis gather, so constants are fixed points and only dilatational content
is ever altered.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import comb

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .grid import basis_tables
from .splines import TensorBasis3D

RELATIVE_VOLUME_CUTOFF = 1e-12


class Projection(Enum):
    OFF = "off"
    CONSTANTS = "constants"
    PMINUS1 = "pminus1"

    @classmethod
    def parse(cls, text: str) -> "Projection":
        try:
            return cls(text)
        except ValueError:
            raise ConfigurationError(
                f"unknown projection mode {text!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class ProjectionGrid:
    """Lower-order tensor-product grid carrying the projection space."""

    basis: TensorBasis3D

    @property
    def degree(self) -> int:
        return self.basis.degree


def make_projection_grid(main: TensorBasis3D, mode: Projection):
    """Projection grid for the given mode, or None when projection is off.

    PMINUS1 uses degree p - 1 (which for a linear main grid is the same
    per-cell-constant space CONSTANTS selects explicitly).
    """
    if mode is Projection.OFF:
        return None
    pt = 0 if mode is Projection.CONSTANTS else max(main.degree - 1, 0)
    tb = TensorBasis3D.create(
        main.domain_min, main.domain_max, main.n_elements, pt
    )
    return ProjectionGrid(basis=tb)


@dataclass
class ProjectionField:
    """Nodal accumulators of the lumped projection: numerator sum(N q V)
    and denominator sum(N V) per projection node."""

    num: np.ndarray
    den: np.ndarray
    cutoff: float

    def values(self) -> np.ndarray:
        out = np.zeros_like(self.num)
        active = self.den > self.cutoff
        out[active] = self.num[active] / self.den[active]
        return out


def project(
    field_at_particles: np.ndarray, particles, pg: ProjectionGrid, tables=None
) -> ProjectionField:
    """Lumped-L2 projection pi(q)_j = sum(N_j q V) / sum(N_j V)."""
    if tables is None:
        tables = basis_tables(pg.basis, particles.x)
    t = tables
    n = pg.basis.n_nodes
    num = np.zeros(n)
    den = np.zeros(n)
    kernels.scatter_scalar_volume(
        t.first, t.avals, t.p1, t.nbx, t.nby,
        np.ascontiguousarray(field_at_particles), particles.V, num, den,
    )
    cutoff = RELATIVE_VOLUME_CUTOFF * float(particles.V.mean())
    return ProjectionField(num=num, den=den, cutoff=cutoff)


def reconstruct(pf: ProjectionField, pg: ProjectionGrid, particles, tables=None):
    """Evaluate the projected field back at the particles."""
    if tables is None:
        tables = basis_tables(pg.basis, particles.x)
    t = tables
    out = np.empty(t.first.shape[0])
    kernels.gather_scalar(
        t.first, t.avals, t.p1, t.nbx, t.nby, pf.values(), out
    )
    return out


def modified_velocity_gradient(L: np.ndarray, recon_div: np.ndarray):
    """L + (pi(div v) - div v) I / 3: trace replaced by the reconstructed
    projected divergence, deviatoric content untouched."""
    div = np.trace(L, axis1=-2, axis2=-1)
    out = L.copy()
    corr = (np.asarray(recon_div) - div) / 3.0
    for a in range(3):
        out[..., a, a] += corr
    return out


def double_bar_stress(sigma: np.ndarray, particles, pg: ProjectionGrid, tables=None):
    """Replace the hydrostatic stress with its projected-and-reconstructed
    counterpart; the deviator passes through exactly."""
    hyd = np.trace(sigma, axis1=-2, axis2=-1) / 3.0
    pf = project(hyd, particles, pg, tables)
    recon = reconstruct(pf, pg, particles, tables)
    out = sigma.copy()
    corr = recon - hyd
    for a in range(3):
        out[..., a, a] += corr
    return out


def constraint_ratio(p: int, n_sd: int, projection_enabled: bool) -> Fraction:
    """Constraint-counting diagnostic r = n_eq / n_c per element.

    n_eq = n_sd * p^n_sd. Without projection n_c counts the independent
    monomials of the velocity divergence of a tensor-degree-p field; with
    projection it is the dimension of the total-degree-(p-1) polynomial
    space the divergence is projected onto. Values below n_sd signal
    locking.
    """
    if not 1 <= p <= 3:
        raise ConfigurationError(f"degree must be in 1..3, got {p}")
    n_eq = n_sd * p**n_sd
    if projection_enabled:
        n_c = comb(n_sd + p - 1, n_sd)
    else:
        monomials = set()
        for axis in range(n_sd):
            caps = [p] * n_sd
            caps[axis] = p - 1
            monomials.update(
                itertools.product(*(range(c + 1) for c in caps))
            )
        n_c = len(monomials)
    return Fraction(n_eq, n_c)
