"""Tests for the box element families and their integration tables."""

import numpy as np
import pytest

from orthofrac.elements import (
    FAMILIES,
    VTK_CELL_TYPES,
    box_element_tables,
    strain_matrix,
)


class TestFamilies:
    @pytest.mark.parametrize("name,dim,n_nodes", [
        ("line2", 1, 2), ("quad4", 2, 4), ("hex8", 3, 8),
    ])
    def test_roster(self, name, dim, n_nodes):
        fam = FAMILIES[name]
        assert fam.dim == dim
        assert fam.n_nodes == n_nodes
        assert name in VTK_CELL_TYPES

    @pytest.mark.parametrize("name", ["line2", "quad4", "hex8"])
    def test_partition_of_unity(self, name):
        fam = FAMILIES[name]
        rng = np.random.default_rng(7)
        for _ in range(5):
            xi = rng.uniform(-1.0, 1.0, fam.dim)
            vals = fam.shape(xi)
            assert np.sum(vals) == pytest.approx(1.0, abs=1e-14)
            grads = fam.shape_grad(xi)
            assert np.max(np.abs(grads.sum(axis=0))) < 1e-14

    @pytest.mark.parametrize("name", ["line2", "quad4", "hex8"])
    def test_kronecker_at_corners(self, name):
        fam = FAMILIES[name]
        vals = np.array([fam.shape(c) for c in fam.corners])
        np.testing.assert_allclose(vals, np.eye(fam.n_nodes), atol=1e-15)

    @pytest.mark.parametrize("name", ["line2", "quad4", "hex8"])
    def test_quadrature_weights(self, name):
        fam = FAMILIES[name]
        points, weights = fam.quadrature()
        assert points.shape == (2 ** fam.dim, fam.dim)
        assert weights.sum() == pytest.approx(2.0 ** fam.dim)

    def test_quadrature_integrates_cubics_exactly(self):
        fam = FAMILIES["line2"]
        points, weights = fam.quadrature()
        for p, exact in [(0, 2.0), (1, 0.0), (2, 2.0 / 3.0), (3, 0.0)]:
            approx = float(np.sum(weights * points[:, 0] ** p))
            assert approx == pytest.approx(exact, abs=1e-14)


class TestBoxTables:
    def test_volume_from_detjw(self):
        fam = FAMILIES["hex8"]
        sizes = np.array([[0.5, 2.0, 3.0]])
        _, _, detjw = box_element_tables(fam, sizes)
        assert detjw.sum() == pytest.approx(0.5 * 2.0 * 3.0)

    def test_gradients_scale_with_size(self):
        fam = FAMILIES["quad4"]
        sizes = np.array([[1.0, 1.0], [2.0, 4.0]])
        _, dndx, _ = box_element_tables(fam, sizes)
        np.testing.assert_allclose(dndx[1, :, :, 0], dndx[0, :, :, 0] / 2.0)
        np.testing.assert_allclose(dndx[1, :, :, 1], dndx[0, :, :, 1] / 4.0)

    def test_linear_field_gradient_exact(self):
        fam = FAMILIES["hex8"]
        sizes = np.array([[1.3, 0.7, 2.1]])
        _, dndx, _ = box_element_tables(fam, sizes)
        corners = (np.array(fam.corners) + 1.0) / 2.0 * sizes[0]
        coeff = np.array([2.0, -3.0, 0.5])
        nodal = corners @ coeff
        grad = np.einsum("gnd,n->gd", dndx[0], nodal)
        np.testing.assert_allclose(grad, np.tile(coeff, (8, 1)), atol=1e-12)

    def test_strain_matrix_rows_1d(self):
        fam = FAMILIES["line2"]
        _, dndx, _ = box_element_tables(fam, np.array([[2.0]]))
        b = strain_matrix(dndx)
        assert b.shape == (1, 2, 1, 2)
        np.testing.assert_allclose(b[0, :, 0, :], dndx[0, :, :, 0])

    def test_strain_matrix_symmetric_shear_2d(self):
        fam = FAMILIES["quad4"]
        _, dndx, _ = box_element_tables(fam, np.array([[1.0, 1.0]]))
        b = strain_matrix(dndx)
        assert b.shape == (1, 4, 3, 8)
        # normal rows pick the matching displacement component
        np.testing.assert_allclose(b[0, :, 0, 0::2], dndx[0, :, :, 0])
        np.testing.assert_allclose(b[0, :, 0, 1::2], 0.0)
        np.testing.assert_allclose(b[0, :, 1, 1::2], dndx[0, :, :, 1])
        # engineering shear couples both
        np.testing.assert_allclose(b[0, :, 2, 0::2], dndx[0, :, :, 1])
        np.testing.assert_allclose(b[0, :, 2, 1::2], dndx[0, :, :, 0])

    def test_strain_matrix_voigt_order_3d(self):
        fam = FAMILIES["hex8"]
        sizes = np.array([[1.0, 1.0, 1.0]])
        _, dndx, _ = box_element_tables(fam, sizes)
        b = strain_matrix(dndx)
        assert b.shape == (1, 8, 6, 24)
        corners = (np.array(fam.corners) + 1.0) / 2.0
        # pure shear displacement u_x = z gives engineering strain xz = 1
        ue = np.zeros(24)
        ue[0::3] = corners[:, 2]
        strain = b[0] @ ue
        expected = np.zeros(6)
        expected[4] = 1.0
        np.testing.assert_allclose(strain, np.tile(expected, (8, 1)), atol=1e-12)
