"""Open-knot B-spline bases on uniform 1D knot vectors and their
tensor-product 3D evaluation.

Degrees 0..3 are supported; degree 0 (per-cell constants) exists only for
the lower-order projection grid. Background grids are axis-aligned and
uniform, so the parametric-to-physical map is affine per axis and knots are
stored directly in physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, OutOfDomainError

MAX_DEGREE = 3


@dataclass(frozen=True)
class KnotVector:
    """Open uniform knot vector for one axis.

    ``knots`` has length ``n_basis + degree + 1``, is non-decreasing, and
    repeats the first and last values exactly ``degree + 1`` times.
    """

    degree: int
    knots: np.ndarray
    n_basis: int

    @property
    def x_min(self) -> float:
        return float(self.knots[self.degree])

    @property
    def x_max(self) -> float:
        return float(self.knots[self.n_basis])

    @property
    def n_elements(self) -> int:
        return self.n_basis - self.degree

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / self.n_elements


@dataclass(frozen=True)
class BasisEvaluation:
    """The local nonzero basis window at one point: ``degree + 1`` values
    and first derivatives starting at global function index ``first_index``."""

    first_index: int
    values: np.ndarray
    derivs: np.ndarray


def make_open_uniform_knots(
    n_elements: int, p: int, x_min: float, x_max: float
) -> KnotVector:
    """Build an open uniform knot vector with ``n_basis = n_elements + p``."""
    if not 0 <= p <= MAX_DEGREE:
        raise ConfigurationError(f"degree must be in 0..{MAX_DEGREE}, got {p}")
    if n_elements < 1:
        raise ConfigurationError(f"need at least one element, got {n_elements}")
    if not x_max > x_min:
        raise ConfigurationError(f"empty domain [{x_min}, {x_max}]")
    interior = np.linspace(x_min, x_max, n_elements + 1)
    knots = np.concatenate(
        [np.full(p, x_min), interior, np.full(p, x_max)]
    )
    return KnotVector(degree=p, knots=knots, n_basis=n_elements + p)


def find_element(kv: KnotVector, x: float) -> int:
    """Locate the element containing ``x``.

    Elements are half-open ``[e, e+1)`` except the last, which is closed so
    the right domain boundary evaluates by the limit from the left.
    """
    if x < kv.x_min or x > kv.x_max:
        raise OutOfDomainError(
            f"x={x} outside [{kv.x_min}, {kv.x_max}]"
        )
    e = int((x - kv.x_min) / kv.spacing)
    return min(max(e, 0), kv.n_elements - 1)


def eval_basis_1d(kv: KnotVector, x: float) -> BasisEvaluation:
    """Evaluate the ``p + 1`` nonzero basis values and first derivatives at
    ``x`` by the Cox-de Boor recursion."""
    p = kv.degree
    e = find_element(kv, x)
    span = e + p
    knots = kv.knots
    if p == 0:
        return BasisEvaluation(e, np.array([1.0]), np.array([0.0]))

    values = np.zeros(p + 1)
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    low = np.zeros(p)  # degree p-1 window, for the derivatives
    values[0] = 1.0
    for j in range(1, p + 1):
        if j == p:
            low[:] = values[:p]
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            tmp = values[r] / (right[r + 1] + left[j - r])
            values[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        values[j] = saved

    derivs = np.zeros(p + 1)
    for r in range(p + 1):
        i = span - p + r
        a = 0.0
        b = 0.0
        if r >= 1:
            d = knots[i + p] - knots[i]
            if d > 0.0:
                a = low[r - 1] / d
        if r <= p - 1:
            d = knots[i + p + 1] - knots[i + 1]
            if d > 0.0:
                b = low[r] / d
        derivs[r] = p * (a - b)
    return BasisEvaluation(span - p, values, derivs)


@dataclass(frozen=True)
class TensorBasis3D:
    """Tensor-product basis on an axis-aligned uniform box."""

    kv: tuple[KnotVector, KnotVector, KnotVector]
    origin: np.ndarray = field(init=False)
    spacing: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "origin", np.array([k.x_min for k in self.kv])
        )
        object.__setattr__(
            self, "spacing", np.array([k.spacing for k in self.kv])
        )

    @classmethod
    def create(
        cls,
        domain_min,
        domain_max,
        n_elements,
        degree: int,
    ) -> "TensorBasis3D":
        kvs = tuple(
            make_open_uniform_knots(int(n), degree, float(a), float(b))
            for n, a, b in zip(n_elements, domain_min, domain_max)
        )
        return cls(kv=kvs)

    @property
    def degree(self) -> int:
        return self.kv[0].degree

    @property
    def n_basis(self) -> tuple[int, int, int]:
        return tuple(k.n_basis for k in self.kv)

    @property
    def n_elements(self) -> tuple[int, int, int]:
        return tuple(k.n_elements for k in self.kv)

    @property
    def n_nodes(self) -> int:
        nx, ny, nz = self.n_basis
        return nx * ny * nz

    @property
    def domain_min(self) -> np.ndarray:
        return self.origin

    @property
    def domain_max(self) -> np.ndarray:
        return np.array([k.x_max for k in self.kv])

    def flat_index(self, ix, iy, iz):
        """x-fastest lexicographic flat control-point index."""
        nx, ny, _ = self.n_basis
        return ix + nx * (iy + ny * iz)

    def node_grid_indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-axis integer indices of every control point, flat-ordered."""
        nx, ny, nz = self.n_basis
        iz, iy, ix = np.meshgrid(
            np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij"
        )
        return ix.ravel(), iy.ravel(), iz.ravel()


def eval_basis_3d(tb: TensorBasis3D, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate the (p+1)^3 supported tensor-product functions at point ``x``.

    Returns (flat control-point indices, values, gradients (S, 3)).
    """
    ev = [eval_basis_1d(tb.kv[a], float(x[a])) for a in range(3)]
    p1 = tb.degree + 1
    s = p1 ** 3
    idx = np.empty(s, dtype=np.int64)
    vals = np.empty(s)
    grads = np.empty((s, 3))
    k = 0
    for c in range(p1):
        for b in range(p1):
            for a in range(p1):
                nx_, ny_, nz_ = ev[0].values[a], ev[1].values[b], ev[2].values[c]
                idx[k] = tb.flat_index(
                    ev[0].first_index + a,
                    ev[1].first_index + b,
                    ev[2].first_index + c,
                )
                vals[k] = nx_ * ny_ * nz_
                grads[k, 0] = ev[0].derivs[a] * ny_ * nz_
                grads[k, 1] = nx_ * ev[1].derivs[b] * nz_
                grads[k, 2] = nx_ * ny_ * ev[2].derivs[c]
                k += 1
    return idx, vals, grads
