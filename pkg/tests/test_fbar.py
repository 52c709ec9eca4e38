from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsmpm.errors import ConfigurationError
from bsmpm.fbar import (
    Projection,
    constraint_ratio,
    double_bar_stress,
    make_projection_grid,
    modified_velocity_gradient,
    project,
    reconstruct,
)
from bsmpm.grid import BackgroundGrid
from bsmpm.particles import ParticleBlock, init_block
from bsmpm.splines import TensorBasis3D

from conftest import random_cloud


def make_setup(p=2, mode=Projection.PMINUS1, nel=(4, 3, 2)):
    tb = TensorBasis3D.create((0, 0, 0), (4.0, 3.0, 1.0), nel, p)
    grid = BackgroundGrid(basis=tb)
    block = ParticleBlock(
        lo=(0, 0, 0), hi=(4.0, 3.0, 1.0), ppc=(3, 3, 3), density=1.0
    )
    pset = init_block(block, grid)
    pg = make_projection_grid(tb, mode)
    return tb, grid, pset, pg


class TestProjectionModes:
    def test_parse(self):
        assert Projection.parse("off") is Projection.OFF
        assert Projection.parse("pminus1") is Projection.PMINUS1
        with pytest.raises(ConfigurationError):
            Projection.parse("linear")

    def test_grid_degrees(self):
        tb = TensorBasis3D.create((0, 0, 0), (1, 1, 1), (2, 2, 2), 2)
        assert make_projection_grid(tb, Projection.OFF) is None
        assert make_projection_grid(tb, Projection.CONSTANTS).degree == 0
        assert make_projection_grid(tb, Projection.PMINUS1).degree == 1
        tb1 = TensorBasis3D.create((0, 0, 0), (1, 1, 1), (2, 2, 2), 1)
        assert make_projection_grid(tb1, Projection.PMINUS1).degree == 0

    def test_shares_element_partition(self):
        tb = TensorBasis3D.create((0, 0, 0), (2, 1, 1), (4, 2, 2), 3)
        pg = make_projection_grid(tb, Projection.PMINUS1)
        assert pg.basis.n_elements == tb.n_elements
        np.testing.assert_array_equal(pg.basis.domain_min, tb.domain_min)
        np.testing.assert_array_equal(pg.basis.domain_max, tb.domain_max)


class TestProjectReconstruct:
    @pytest.mark.parametrize("mode", [Projection.CONSTANTS, Projection.PMINUS1])
    def test_constant_field_is_fixed_point(self, mode):
        _, _, pset, pg = make_setup(mode=mode)
        q = np.full(pset.n, 3.7)
        pf = project(q, pset, pg)
        active = pf.den > pf.cutoff
        np.testing.assert_allclose(pf.values()[active], 3.7, rtol=1e-12)
        recon = reconstruct(pf, pg, pset)
        np.testing.assert_allclose(recon, 3.7, rtol=1e-12)

    def test_constants_node_is_cell_volume_weighted_mean(self):
        tb, _, pset, pg = make_setup(mode=Projection.CONSTANTS)
        rng = np.random.default_rng(4)
        q = rng.normal(size=pset.n)
        pset.V[:] = rng.uniform(0.5, 2.0, size=pset.n)
        pf = project(q, pset, pg)
        cell = (pset.x / tb.spacing).astype(int)
        nel = tb.n_elements
        flat = cell[:, 0] + nel[0] * (cell[:, 1] + nel[1] * cell[:, 2])
        for j in np.unique(flat):
            inside = flat == j
            expected = (q[inside] * pset.V[inside]).sum() / pset.V[inside].sum()
            assert pf.values()[j] == pytest.approx(expected, rel=1e-12)
        # reconstruction returns the containing cell's value
        recon = reconstruct(pf, pg, pset)
        np.testing.assert_allclose(recon, pf.values()[flat], rtol=1e-12)

    def test_linear_field_reconstructed_on_symmetric_layout(self):
        """p-tilde = 1 with a symmetric particle lattice reproduces linear
        fields away from lumping-affected boundaries."""
        tb = TensorBasis3D.create((0, 0, 0), (4.0, 4.0, 4.0), (4, 4, 4), 2)
        grid = BackgroundGrid(basis=tb)
        pset = init_block(
            ParticleBlock((0, 0, 0), (4.0, 4.0, 4.0), (3, 3, 3), 1.0), grid
        )
        pg = make_projection_grid(tb, Projection.PMINUS1)
        a = np.array([0.8, -0.6, 0.3])
        q = pset.x @ a
        pf = project(q, pset, pg)
        recon = reconstruct(pf, pg, pset)
        h = tb.spacing
        interior = np.all(
            (pset.x >= tb.domain_min + h) & (pset.x <= tb.domain_max - h),
            axis=1,
        )
        assert interior.any()
        np.testing.assert_allclose(recon[interior], q[interior], atol=1e-10)


class TestModifiedVelocityGradient:
    def test_matching_divergence_is_identity(self):
        rng = np.random.default_rng(0)
        L = rng.normal(size=(10, 3, 3))
        div = np.trace(L, axis1=-2, axis2=-1)
        out = modified_velocity_gradient(L, div)
        np.testing.assert_allclose(out, L, atol=1e-15)

    def test_uniaxial_example(self):
        d = 0.9
        L = np.diag([d, 0.0, 0.0])[None]
        out = modified_velocity_gradient(L, np.zeros(1))
        np.testing.assert_allclose(
            out[0], np.diag([2 * d / 3, -d / 3, -d / 3]), atol=1e-15
        )
        assert abs(np.trace(out[0])) <= 1e-14 * d

    def test_trace_identity(self):
        rng = np.random.default_rng(1)
        L = rng.normal(size=(50, 3, 3)) * 3.0
        target = rng.normal(size=50) * 2.0
        out = modified_velocity_gradient(L, target)
        tr = np.trace(out, axis1=-2, axis2=-1)
        scale = np.abs(L).max()
        np.testing.assert_allclose(tr, target, atol=1e-14 * max(scale, 1.0))

    def test_deviator_untouched(self):
        rng = np.random.default_rng(2)
        L = rng.normal(size=(20, 3, 3))
        out = modified_velocity_gradient(L, rng.normal(size=20))
        for A, B in zip(L, out):
            np.testing.assert_allclose(
                A - np.trace(A) / 3 * np.eye(3),
                B - np.trace(B) / 3 * np.eye(3),
                atol=1e-15,
            )


class TestDoubleBarStress:
    def test_constant_stress_unchanged(self):
        _, _, pset, pg = make_setup()
        sig = np.tile(np.diag([4.0, 1.0, -2.0]), (pset.n, 1, 1))
        out = double_bar_stress(sig, pset, pg)
        np.testing.assert_allclose(out, sig, rtol=1e-12, atol=1e-12)

    def test_hydrostatic_equals_projected(self):
        _, _, pset, pg = make_setup()
        rng = np.random.default_rng(3)
        sig = rng.normal(size=(pset.n, 3, 3))
        sig = 0.5 * (sig + np.swapaxes(sig, 1, 2))
        hyd = np.trace(sig, axis1=-2, axis2=-1) / 3.0
        out = double_bar_stress(sig, pset, pg)
        out_hyd = np.trace(out, axis1=-2, axis2=-1) / 3.0
        expected = reconstruct(project(hyd, pset, pg), pg, pset)
        scale = np.abs(hyd).max()
        np.testing.assert_allclose(out_hyd, expected, atol=1e-14 * scale)

    def test_deviator_preserved_exactly(self):
        _, _, pset, pg = make_setup()
        rng = np.random.default_rng(5)
        sig = rng.normal(size=(pset.n, 3, 3))
        sig = 0.5 * (sig + np.swapaxes(sig, 1, 2))
        out = double_bar_stress(sig, pset, pg)
        # the correction only touches the diagonal
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_array_equal(sig[:, off], out[:, off])
        for A, B in zip(sig, out):
            np.testing.assert_allclose(
                A - np.trace(A) / 3 * np.eye(3),
                B - np.trace(B) / 3 * np.eye(3),
                atol=1e-15 * np.abs(A).max(),
            )


class TestConstraintRatio:
    def test_quadratic_2d_values(self):
        assert constraint_ratio(2, 2, False) == Fraction(8, 8)
        assert constraint_ratio(2, 2, True) == Fraction(8, 3)

    def test_linear_2d_projection_counts_single_constraint(self):
        r = constraint_ratio(1, 2, True)
        assert r.denominator == 1  # n_c = 1 per element
        assert r == Fraction(2, 1)

    def test_degree_validation(self):
        with pytest.raises(ConfigurationError):
            constraint_ratio(0, 2, True)
        with pytest.raises(ConfigurationError):
            constraint_ratio(4, 2, False)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(5, 60),
    seed=st.integers(0, 2**32 - 1),
    mode=st.sampled_from([Projection.CONSTANTS, Projection.PMINUS1]),
)
def test_projection_round_trip_bounds(n, seed, mode):
    """Reconstruction of a projection stays within the data range
    (averages of averages cannot overshoot)."""
    tb = TensorBasis3D.create((0, 0, 0), (4.0, 3.0, 1.0), (4, 3, 2), 2)
    pg = make_projection_grid(tb, mode)
    rng = np.random.default_rng(seed)
    pset = random_cloud(tb, n, rng)
    q = rng.uniform(-5.0, 7.0, size=n)
    recon = reconstruct(project(q, pset, pg), pg, pset)
    assert recon.min() >= q.min() - 1e-10
    assert recon.max() <= q.max() + 1e-10
