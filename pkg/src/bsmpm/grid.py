"""Background control-point lattice: nodal state, particle-to-grid
transfers, and essential boundary conditions.

Control points are stored x-fastest in a single flat index. Boundary
conditions address whole domain faces; with open knot vectors the basis is
interpolatory there, so zeroing the face control points enforces the
condition exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigurationError, OutOfDomainError
from .splines import TensorBasis3D

FACES = {
    "x_min": (0, 0),
    "x_max": (0, 1),
    "y_min": (1, 0),
    "y_max": (1, 1),
    "z_min": (2, 0),
    "z_max": (2, 1),
}

RELATIVE_MASS_CUTOFF = 1e-12


def _element_poly_coeffs(kv) -> np.ndarray:
    """Per-element polynomial coefficients of the p+1 supported basis
    functions, in the local element coordinate u in [0, 1].

    coeffs[e, r, k] is the u^k coefficient of function e + r on element e.
    Exact (splines are element-wise polynomials); obtained by collocation
    at p+1 interior points.
    """
    from .splines import eval_basis_1d

    p = kv.degree
    p1 = p + 1
    nel = kv.n_elements
    u = (np.arange(p1) + 0.5) / p1
    vand = u[:, None] ** np.arange(p1)[None, :]
    coeffs = np.empty((nel, p1, p1))
    for e in range(nel):
        nmat = np.empty((p1, p1))
        for j in range(p1):
            ev = eval_basis_1d(kv, kv.x_min + (e + u[j]) * kv.spacing)
            assert ev.first_index == e
            nmat[j] = ev.values
        coeffs[e] = np.linalg.solve(vand, nmat).T
    return coeffs


_coeff_cache: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _poly_tables(tb: TensorBasis3D):
    # key on the defining parameters, not object identity: id() values are
    # reused after garbage collection and would alias distinct grids
    key = tuple(
        (kv.degree, kv.n_elements, kv.x_min, kv.x_max) for kv in tb.kv
    )
    got = _coeff_cache.get(key)
    if got is None:
        got = tuple(_element_poly_coeffs(kv) for kv in tb.kv)
        _coeff_cache[key] = got
    return got


class BasisTables(NamedTuple):
    """Per-axis basis windows for a batch of positions.

    first is (n, 3) int64 (first supported 1D function per axis), avals and
    aderivs are (n, 3, p+1). Tensor products are formed inside the transfer
    kernels; nbx/nby give the flat-index strides of the node lattice.
    """

    first: np.ndarray
    avals: np.ndarray
    aderivs: np.ndarray
    p1: int
    nbx: int
    nby: int


def basis_tables(
    tb: TensorBasis3D, pos: np.ndarray, out: BasisTables = None
) -> BasisTables:
    """Evaluate the supported basis window at every position, per axis.

    Pass ``out`` (a previous result of matching shape) to reuse its
    buffers. Raises OutOfDomainError if any position leaves the grid.
    """
    n = pos.shape[0]
    p = tb.degree
    if out is not None:
        first, avals, aderivs = out.first, out.avals, out.aderivs
    else:
        first = np.empty((n, 3), dtype=np.int64)
        avals = np.empty((n, 3, p + 1))
        aderivs = np.empty((n, 3, p + 1))
    nel = tb.n_elements
    h = tb.spacing
    lo = tb.domain_min
    hi = tb.domain_max
    cfx, cfy, cfz = _poly_tables(tb)
    bad = kernels.compute_axis_tables(
        pos, p,
        cfx, cfy, cfz,
        nel[0], nel[1], nel[2],
        h[0], h[1], h[2],
        lo[0], lo[1], lo[2], hi[0], hi[1], hi[2],
        first, avals, aderivs,
    )
    if bad != kernels.OK:
        raise OutOfDomainError(
            f"particle {bad} at {pos[bad]} left the background domain"
        )
    return BasisTables(
        first, avals, aderivs, p + 1, int(tb.n_basis[0]), int(tb.n_basis[1])
    )


@dataclass(frozen=True)
class BoundaryCondition:
    """One constrained domain face.

    kind 'fixed' zeroes all components, 'roller' only the listed axes
    (default: the face normal), 'contact' clamps the normal component so it
    cannot point out of the domain (no penetration, free separation).
    """

    face: str
    kind: str = "fixed"
    axes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.face not in FACES:
            raise ConfigurationError(
                f"unknown face selector {self.face!r}; expected one of "
                f"{sorted(FACES)}"
            )
        if self.kind not in ("fixed", "roller", "contact"):
            raise ConfigurationError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "contact" and self.axes:
            raise ConfigurationError("contact acts on the face normal only")


@dataclass
class BoundaryConditionSet:
    conditions: list[BoundaryCondition] = field(default_factory=list)
    # axes zeroed at every control point (plane-strain z lock)
    lock_axes: tuple[int, ...] = ()

    def __post_init__(self):
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def masks_for(self, tb: TensorBasis3D):
        """(zero_mask, clamp_spec) for this grid.

        zero_mask is an (n_nodes, 3) bool array of hard-zeroed components.
        clamp_spec is an (n_nodes, 3) int8 array: +1 clamps negative values
        to zero (an x_min-type contact face), -1 clamps positive values.
        """
        key = id(tb)
        if key in self._cache:
            return self._cache[key]
        n = tb.n_nodes
        zero = np.zeros((n, 3), dtype=bool)
        clamp = np.zeros((n, 3), dtype=np.int8)
        gi = tb.node_grid_indices()
        for bc in self.conditions:
            axis, side = FACES[bc.face]
            last = tb.n_basis[axis] - 1
            on_face = gi[axis] == (0 if side == 0 else last)
            if bc.kind == "fixed":
                zero[on_face, :] = True
            elif bc.kind == "roller":
                axes = bc.axes if bc.axes else (axis,)
                for a in axes:
                    zero[on_face, a] = True
            else:  # contact: inward normal is +1 on a min face, -1 on a max face
                clamp[on_face, axis] = 1 if side == 0 else -1
        for a in self.lock_axes:
            zero[:, a] = True
        self._cache[key] = (zero, clamp)
        return zero, clamp


@dataclass
class BackgroundGrid:
    """Nodal state arrays over the tensor-product control-point lattice."""

    basis: TensorBasis3D
    mass: np.ndarray = field(init=False)
    momentum: np.ndarray = field(init=False)
    velocity: np.ndarray = field(init=False)
    f_int: np.ndarray = field(init=False)
    f_ext: np.ndarray = field(init=False)
    accel: np.ndarray = field(init=False)
    momentum_upd: np.ndarray = field(init=False)
    velocity_upd: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.basis.n_nodes
        self.mass = np.zeros(n)
        self.momentum = np.zeros((n, 3))
        self.velocity = np.zeros((n, 3))
        self.f_int = np.zeros((n, 3))
        self.f_ext = np.zeros((n, 3))
        self.accel = np.zeros((n, 3))
        self.momentum_upd = np.zeros((n, 3))
        self.velocity_upd = np.zeros((n, 3))

    @property
    def n_nodes(self) -> int:
        return self.basis.n_nodes


def reset(grid: BackgroundGrid) -> None:
    """Zero every nodal accumulator (idempotent)."""
    grid.mass[:] = 0.0
    grid.momentum[:] = 0.0
    grid.velocity[:] = 0.0
    grid.f_int[:] = 0.0
    grid.f_ext[:] = 0.0
    grid.accel[:] = 0.0
    grid.momentum_upd[:] = 0.0
    grid.velocity_upd[:] = 0.0


def scatter_mass_momentum(grid: BackgroundGrid, particles, tables=None) -> None:
    """m_i = sum N_i m_mp and (m v)_i = sum N_i m_mp v_mp."""
    if tables is None:
        tables = basis_tables(grid.basis, particles.x)
    t = tables
    kernels.scatter_mass_momentum(
        t.first, t.avals, t.p1, t.nbx, t.nby,
        particles.mass, particles.v, grid.mass, grid.momentum,
    )


def nodal_velocity(grid: BackgroundGrid, mass_cutoff: float) -> None:
    """v_i = (m v)_i / m_i where m_i exceeds the cutoff, else zero."""
    kernels.divide_by_mass(grid.momentum, grid.mass, mass_cutoff, grid.velocity)


def apply_bcs(grid: BackgroundGrid, bcs: BoundaryConditionSet, which: str) -> None:
    """Zero (or clamp, for contact faces) constrained components of the
    selected nodal field; momentum counterparts are kept consistent."""
    zero, clamp = bcs.masks_for(grid.basis)
    if which == "velocity":
        fields = (grid.velocity, grid.momentum)
    elif which == "acceleration":
        fields = (grid.accel,)
    elif which == "updated_velocity":
        fields = (grid.velocity_upd, grid.momentum_upd)
    else:
        raise ConfigurationError(f"unknown field selector {which!r}")
    has_clamp = clamp.any()
    for arr in fields:
        arr[zero] = 0.0
        if has_clamp:
            pos_clamp = (clamp == 1) & (arr < 0.0)
            neg_clamp = (clamp == -1) & (arr > 0.0)
            arr[pos_clamp] = 0.0
            arr[neg_clamp] = 0.0
