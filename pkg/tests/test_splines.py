import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsmpm.errors import ConfigurationError, OutOfDomainError
from bsmpm.splines import (
    TensorBasis3D,
    eval_basis_1d,
    eval_basis_3d,
    find_element,
    make_open_uniform_knots,
)


class TestKnotVectors:
    def test_linear_two_elements(self):
        kv = make_open_uniform_knots(2, 1, 0.0, 2.0)
        assert kv.n_basis == 3
        np.testing.assert_array_equal(kv.knots, [0, 0, 1, 2, 2])

    def test_quadratic_two_elements(self):
        kv = make_open_uniform_knots(2, 2, 0.0, 2.0)
        assert kv.n_basis == 4
        np.testing.assert_array_equal(kv.knots, [0, 0, 0, 1, 2, 2, 2])

    def test_cubic_single_element_is_bernstein(self):
        kv = make_open_uniform_knots(1, 3, 0.0, 1.0)
        assert kv.n_basis == 4
        np.testing.assert_array_equal(kv.knots, [0, 0, 0, 0, 1, 1, 1, 1])
        # Bernstein values at x: C(3,k) x^k (1-x)^(3-k)
        ev = eval_basis_1d(kv, 0.3)
        bern = [(1 - 0.3) ** 3, 3 * 0.3 * 0.7**2, 3 * 0.3**2 * 0.7, 0.3**3]
        np.testing.assert_allclose(ev.values, bern, atol=1e-15)

    def test_properties(self):
        kv = make_open_uniform_knots(5, 2, 1.0, 11.0)
        assert kv.x_min == 1.0
        assert kv.x_max == 11.0
        assert kv.n_elements == 5
        assert kv.spacing == 2.0

    @pytest.mark.parametrize(
        "args", [(2, 4, 0.0, 1.0), (2, -1, 0.0, 1.0), (0, 2, 0.0, 1.0),
                 (2, 2, 1.0, 1.0), (2, 2, 2.0, 1.0)]
    )
    def test_invalid_construction(self, args):
        n, p, a, b = args
        with pytest.raises(ConfigurationError):
            make_open_uniform_knots(n, p, a, b)


class TestFindElement:
    def test_interior_and_boundaries(self):
        kv = make_open_uniform_knots(4, 2, 0.0, 4.0)
        assert find_element(kv, 0.0) == 0
        assert find_element(kv, 0.999) == 0
        assert find_element(kv, 1.0) == 1
        assert find_element(kv, 3.5) == 3
        # right boundary belongs to the last element
        assert find_element(kv, 4.0) == 3

    def test_outside_raises(self):
        kv = make_open_uniform_knots(4, 2, 0.0, 4.0)
        with pytest.raises(OutOfDomainError):
            find_element(kv, -0.1)
        with pytest.raises(OutOfDomainError):
            find_element(kv, 4.1)


class TestBasis1D:
    def test_linear_midpoint(self):
        kv = make_open_uniform_knots(4, 1, 0.0, 4.0)
        ev = eval_basis_1d(kv, 1.5)
        np.testing.assert_allclose(ev.values, [0.5, 0.5])

    def test_quadratic_interior_midpoint(self):
        kv = make_open_uniform_knots(5, 2, 0.0, 5.0)
        ev = eval_basis_1d(kv, 2.5)  # interior element, uniform knots
        np.testing.assert_allclose(ev.values, [1 / 8, 3 / 4, 1 / 8])

    def test_degree_zero(self):
        kv = make_open_uniform_knots(3, 0, 0.0, 3.0)
        ev = eval_basis_1d(kv, 1.5)
        assert ev.first_index == 1
        np.testing.assert_array_equal(ev.values, [1.0])
        np.testing.assert_array_equal(ev.derivs, [0.0])

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_partition_of_unity_and_nonnegativity(self, p):
        kv = make_open_uniform_knots(7, p, -1.0, 3.0)
        rng = np.random.default_rng(42)
        for x in rng.uniform(-1.0, 3.0, size=200):
            ev = eval_basis_1d(kv, x)
            assert abs(ev.values.sum() - 1.0) <= 1e-12
            assert (ev.values >= -1e-14).all()
            assert abs(ev.derivs.sum()) <= 1e-10

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_derivatives_match_finite_differences(self, p):
        kv = make_open_uniform_knots(6, p, 0.0, 6.0)
        rng = np.random.default_rng(3)
        eps = 1e-6
        for x in rng.uniform(0.5, 5.5, size=50):
            ev = eval_basis_1d(kv, x)
            plus = eval_basis_1d(kv, x + eps)
            minus = eval_basis_1d(kv, x - eps)
            if plus.first_index != ev.first_index or (
                minus.first_index != ev.first_index
            ):
                continue  # stencil straddles an element boundary
            fd = (plus.values - minus.values) / (2 * eps)
            scale = max(1.0, np.abs(ev.derivs).max())
            np.testing.assert_allclose(ev.derivs, fd, atol=1e-5 * scale)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_boundary_interpolation(self, p):
        """Open knots make the basis interpolatory at domain ends."""
        kv = make_open_uniform_knots(5, p, 0.0, 5.0)
        lo = eval_basis_1d(kv, 0.0)
        hi = eval_basis_1d(kv, 5.0)
        assert lo.first_index == 0
        np.testing.assert_allclose(lo.values[0], 1.0, atol=1e-14)
        np.testing.assert_allclose(lo.values[1:], 0.0, atol=1e-14)
        assert hi.first_index + p == kv.n_basis - 1
        np.testing.assert_allclose(hi.values[-1], 1.0, atol=1e-14)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_linear_reproduction_greville(self, p):
        """sum N_i(x) g_i = x with g_i the Greville abscissae."""
        kv = make_open_uniform_knots(6, p, 0.0, 3.0)
        greville = np.array(
            [kv.knots[i + 1 : i + p + 1].mean() for i in range(kv.n_basis)]
        )
        for x in np.linspace(0.0, 3.0, 23):
            ev = eval_basis_1d(kv, x)
            g = greville[ev.first_index : ev.first_index + p + 1]
            assert abs((ev.values * g).sum() - x) <= 1e-10
            assert abs((ev.derivs * g).sum() - 1.0) <= 1e-10


class TestBasis3D:
    def test_linear_cell_center(self):
        tb = TensorBasis3D.create((0, 0, 0), (2, 2, 2), (2, 2, 2), 1)
        idx, vals, grads = eval_basis_3d(tb, (0.5, 0.5, 0.5))
        np.testing.assert_allclose(vals, np.full(8, 1 / 8))

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_partition_of_unity(self, p):
        tb = TensorBasis3D.create((0, 0, 0), (3, 2, 1), (3, 4, 2), p)
        rng = np.random.default_rng(7)
        pts = rng.uniform((0, 0, 0), (3, 2, 1), size=(100, 3))
        for x in pts:
            _, vals, grads = eval_basis_3d(tb, x)
            assert abs(vals.sum() - 1.0) <= 1e-12
            assert np.abs(grads.sum(axis=0)).max() <= 1e-10

    def test_linear_field_reproduction(self):
        a = np.array([0.7, -1.3, 2.1])
        b = 0.4
        tb = TensorBasis3D.create((0, 0, 0), (3, 2, 1), (3, 4, 2), 2)
        p = tb.degree
        grev = [
            np.array(
                [kv.knots[i + 1 : i + p + 1].mean() for i in range(kv.n_basis)]
            )
            for kv in tb.kv
        ]
        # flat node order is x-fastest: build control values accordingly
        nx, ny, nz = tb.n_basis
        coeff = np.empty(tb.n_nodes)
        for iz in range(nz):
            for iy in range(ny):
                for ix in range(nx):
                    gpt = np.array([grev[0][ix], grev[1][iy], grev[2][iz]])
                    coeff[tb.flat_index(ix, iy, iz)] = a @ gpt + b
        rng = np.random.default_rng(11)
        for x in rng.uniform((0, 0, 0), (3, 2, 1), size=(30, 3)):
            idx, vals, grads = eval_basis_3d(tb, x)
            assert abs((vals * coeff[idx]).sum() - (a @ x + b)) <= 1e-10
            np.testing.assert_allclose(
                grads.T @ coeff[idx], a, atol=1e-9
            )

    def test_flat_index_x_fastest(self):
        tb = TensorBasis3D.create((0, 0, 0), (1, 1, 1), (2, 3, 4), 1)
        nx, ny, nz = tb.n_basis
        assert tb.flat_index(1, 0, 0) == 1
        assert tb.flat_index(0, 1, 0) == nx
        assert tb.flat_index(0, 0, 1) == nx * ny
        ix, iy, iz = tb.node_grid_indices()
        assert ix[1] == 1 and iy[1] == 0
        assert iy[nx] == 1


@settings(max_examples=50, deadline=None)
@given(
    p=st.integers(1, 3),
    nel=st.integers(1, 9),
    width=st.floats(0.5, 50.0),
    frac=st.floats(0.0, 1.0),
)
def test_basis_window_properties(p, nel, width, frac):
    kv = make_open_uniform_knots(nel, p, 0.0, width)
    x = frac * width
    ev = eval_basis_1d(kv, x)
    assert 0 <= ev.first_index <= kv.n_basis - p - 1
    assert len(ev.values) == p + 1
    assert abs(ev.values.sum() - 1.0) <= 1e-12
    assert (ev.values >= -1e-14).all()
    assert abs(ev.derivs.sum()) <= 1e-9 * max(1.0, 1.0 / kv.spacing)
