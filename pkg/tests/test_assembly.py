"""Tests for finite-element operator assembly."""

import numpy as np
import pytest
import scipy.sparse as sp

from orthofrac.assembly import (
    damage_system,
    elastic_energy,
    energy_density,
    gauss_gradient_sq,
    gauss_interpolate,
    integrate_gauss,
    make_context,
    stiffness_matrix,
    strains,
    surface_energy,
)
from orthofrac.elastic import StiffnessTensor
from orthofrac.elements import FAMILIES, box_element_tables, strain_matrix
from orthofrac.geometry import SpecimenGeometry
from orthofrac.linsys import DirichletSet, solve_dirichlet
from orthofrac.mesh import ZoneSpec, bar_mesh, build_mesh
from orthofrac.phasefield import PhaseFieldLaw


@pytest.fixture(scope="module")
def square_ctx():
    geom = SpecimenGeometry(length=1.0, height=1.0, width=2.0)
    mesh = build_mesh(geom, ZoneSpec(h_fine=0.25, h_coarse=0.25), mode="2d")
    return make_context(mesh)


@pytest.fixture(scope="module")
def plane_c():
    return StiffnessTensor.isotropic(1000.0, 0.3).plane_matrix("xz")


def dense_stiffness(ctx, c_matrix, gfac=None):
    """Reference assembly: explicit per-element scatter into a dense matrix."""
    mesh = ctx.mesh
    fam = FAMILIES[mesh.family]
    k = np.zeros((ctx.n_dof, ctx.n_dof))
    sizes = mesh.element_sizes()
    for e in range(mesh.n_elements):
        shape_vals, dndx, detjw = box_element_tables(fam, sizes[e][None])
        b = strain_matrix(dndx)[0]
        ke = np.zeros((b.shape[2], b.shape[2]))
        for g in range(b.shape[0]):
            w = detjw[0, g] * mesh.thickness
            if gfac is not None:
                w *= gfac[e, g]
            ke += b[g].T @ c_matrix @ b[g] * w
        dofs = ctx.edofs[e]
        k[np.ix_(dofs, dofs)] += ke
    return k


class TestStiffness:
    def test_matches_dense_reference(self, square_ctx, plane_c):
        k_fast = stiffness_matrix(square_ctx, plane_c).toarray()
        k_ref = dense_stiffness(square_ctx, plane_c)
        np.testing.assert_allclose(k_fast, k_ref, atol=1e-10 * np.abs(k_ref).max())

    def test_symmetric_positive_semidefinite(self, square_ctx, plane_c):
        k = stiffness_matrix(square_ctx, plane_c).toarray()
        np.testing.assert_allclose(k, k.T, atol=1e-9)
        w = np.linalg.eigvalsh(k)
        assert w.min() > -1e-9 * w.max()

    def test_rigid_translation_in_nullspace(self, square_ctx, plane_c):
        k = stiffness_matrix(square_ctx, plane_c)
        shift = np.tile([1.0, 0.0], square_ctx.mesh.n_nodes)
        assert np.abs(k @ shift).max() < 1e-9 * np.abs(k.diagonal()).max()

    def test_full_damage_degrades_to_residual(self, square_ctx, plane_c):
        g0 = 1e-5
        k0 = stiffness_matrix(square_ctx, plane_c)
        k1 = stiffness_matrix(square_ctx, plane_c,
                              damage=np.ones(square_ctx.mesh.n_nodes), g0=g0)
        np.testing.assert_allclose(k1.toarray(), g0 * k0.toarray(),
                                   atol=1e-14 * np.abs(k0.toarray()).max())

    def test_damaged_matches_dense_reference(self, square_ctx, plane_c):
        rng = np.random.default_rng(11)
        d = rng.uniform(0.0, 0.9, square_ctx.mesh.n_nodes)
        g0 = 1e-5
        d_gp = gauss_interpolate(square_ctx, d)
        gfac = (1.0 - d_gp) ** 2 + g0
        k_fast = stiffness_matrix(square_ctx, plane_c, damage=d, g0=g0).toarray()
        k_ref = dense_stiffness(square_ctx, plane_c, gfac)
        np.testing.assert_allclose(k_fast, k_ref, atol=1e-10 * np.abs(k_ref).max())

    def test_element_scale_multiplies_blocks(self, square_ctx, plane_c):
        scale = np.full(square_ctx.mesh.n_elements, 0.5)
        k0 = stiffness_matrix(square_ctx, plane_c)
        k1 = stiffness_matrix(square_ctx, plane_c, element_scale=scale)
        np.testing.assert_allclose(k1.toarray(), 0.5 * k0.toarray(), atol=1e-12)

    def test_patch_reproduces_linear_field(self, square_ctx, plane_c):
        mesh = square_ctx.mesh
        k = stiffness_matrix(square_ctx, plane_c)
        grad = np.array([[0.001, 0.0004], [-0.0002, 0.0008]])
        on_edge = np.nonzero(
            (np.abs(mesh.nodes[:, 0]) < 1e-12)
            | (np.abs(mesh.nodes[:, 0] - 1.0) < 1e-12)
            | (np.abs(mesh.nodes[:, 1]) < 1e-12)
            | (np.abs(mesh.nodes[:, 1] - 1.0) < 1e-12)
        )[0]
        vals = mesh.nodes[on_edge] @ grad.T
        bc = DirichletSet(
            np.concatenate([on_edge * 2, on_edge * 2 + 1]),
            np.concatenate([vals[:, 0], vals[:, 1]]),
        )
        u = solve_dirichlet(k, np.zeros(square_ctx.n_dof), bc)
        u_exact = (mesh.nodes @ grad.T).ravel()
        assert np.abs(u - u_exact).max() < 1e-12


class TestStrainAndEnergy:
    def test_uniform_strain_state(self, square_ctx, plane_c):
        grad = np.array([[0.002, 0.0], [0.0005, -0.001]])
        u = (square_ctx.mesh.nodes @ grad.T).ravel()
        eps = strains(square_ctx, u)
        expected = np.array([grad[0, 0], grad[1, 1], grad[0, 1] + grad[1, 0]])
        np.testing.assert_allclose(eps, np.broadcast_to(expected, eps.shape),
                                   atol=1e-14)

    def test_uniform_energy_density(self, square_ctx, plane_c):
        grad = np.array([[0.002, 0.0], [0.0005, -0.001]])
        u = (square_ctx.mesh.nodes @ grad.T).ravel()
        eps = np.array([grad[0, 0], grad[1, 1], grad[0, 1] + grad[1, 0]])
        psi_exact = 0.5 * eps @ plane_c @ eps
        psi = energy_density(square_ctx, u, plane_c)
        np.testing.assert_allclose(psi, psi_exact, rtol=1e-12)
        # domain is the unit square with thickness 2
        total = integrate_gauss(square_ctx, psi)
        assert total == pytest.approx(2.0 * psi_exact, rel=1e-12)

    def test_energy_quadratic_in_displacement(self, square_ctx, plane_c):
        rng = np.random.default_rng(5)
        u = rng.normal(size=square_ctx.n_dof)
        e1 = elastic_energy(square_ctx, u, plane_c)
        e2 = elastic_energy(square_ctx, 3.0 * u, plane_c)
        assert e2 == pytest.approx(9.0 * e1, rel=1e-12)

    def test_energy_matches_stiffness_quadratic_form(self, square_ctx, plane_c):
        rng = np.random.default_rng(8)
        u = rng.normal(size=square_ctx.n_dof)
        d = rng.uniform(0.0, 1.0, square_ctx.mesh.n_nodes)
        k = stiffness_matrix(square_ctx, plane_c, damage=d)
        direct = 0.5 * u @ (k @ u)
        via_density = elastic_energy(square_ctx, u, plane_c, damage=d)
        assert via_density == pytest.approx(direct, rel=1e-10)

    def test_element_scale_scales_energy(self, square_ctx, plane_c):
        rng = np.random.default_rng(9)
        u = rng.normal(size=square_ctx.n_dof)
        scale = np.full(square_ctx.mesh.n_elements, 0.25)
        e0 = elastic_energy(square_ctx, u, plane_c)
        e1 = elastic_energy(square_ctx, u, plane_c, element_scale=scale)
        assert e1 == pytest.approx(0.25 * e0, rel=1e-12)


class TestGaussFields:
    def test_interpolation_of_linear_field(self, square_ctx):
        nodal = 2.0 * square_ctx.mesh.nodes[:, 0] - square_ctx.mesh.nodes[:, 1]
        gp_vals = gauss_interpolate(square_ctx, nodal)
        gp_x = gauss_interpolate(square_ctx, square_ctx.mesh.nodes[:, 0])
        gp_z = gauss_interpolate(square_ctx, square_ctx.mesh.nodes[:, 1])
        np.testing.assert_allclose(gp_vals, 2.0 * gp_x - gp_z, atol=1e-13)

    def test_gradient_of_linear_field(self, square_ctx):
        nodal = 3.0 * square_ctx.mesh.nodes[:, 0] - 4.0 * square_ctx.mesh.nodes[:, 1]
        grad_sq = gauss_gradient_sq(square_ctx, nodal)
        np.testing.assert_allclose(grad_sq, 25.0, rtol=1e-12)


class TestDamageSystem:
    def analytic_bar_matrices(self, h):
        mass = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        lap = 1.0 / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
        return mass, lap

    @pytest.mark.parametrize("model", ["at1", "at2"])
    def test_single_element_matches_hand_formulas(self, model):
        h = 0.3
        bar = bar_mesh(h, h)
        ctx = make_context(bar)
        law = PhaseFieldLaw(model, ell=0.2, gc=0.7)
        h_val = 1.7
        history = np.full((1, 2), h_val)
        a_mat, b = damage_system(ctx, history, law)
        mass, lap = self.analytic_bar_matrices(h)
        pref = law.surface_prefactor
        if model == "at1":
            a_ref = 2.0 * h_val * mass + 2.0 * pref * law.ell * lap
            b_ref = (2.0 * h_val - pref / law.ell) * h / 2.0 * np.ones(2)
        else:
            a_ref = ((2.0 * h_val + 2.0 * pref / law.ell) * mass
                     + 2.0 * pref * law.ell * lap)
            b_ref = 2.0 * h_val * h / 2.0 * np.ones(2)
        np.testing.assert_allclose(a_mat.toarray(), a_ref, rtol=1e-12)
        np.testing.assert_allclose(b, b_ref, rtol=1e-12)

    def test_matrix_symmetric_positive_definite(self, square_ctx):
        rng = np.random.default_rng(2)
        history = rng.uniform(0.0, 5.0,
                              (square_ctx.mesh.n_elements, square_ctx.n_gauss))
        law = PhaseFieldLaw("at2", ell=0.3, gc=0.1)
        a_mat, _ = damage_system(square_ctx, history, law)
        dense = a_mat.toarray()
        np.testing.assert_allclose(dense, dense.T, atol=1e-12)
        assert np.linalg.eigvalsh(dense).min() > 0.0

    def test_homogeneous_at2_stationarity(self):
        # with uniform history H the unconstrained AT2 solution is the
        # constant d = H / (H + gc / (4 c_w ell) * ... ), from the 0D
        # stationarity 2 H (d - 1) + (gc / (2 c_w ell)) d = 0
        bar = bar_mesh(1.0, 0.05)
        ctx = make_context(bar)
        law = PhaseFieldLaw("at2", ell=0.1, gc=0.25)
        h_val = 3.0
        history = np.full((bar.n_elements, 2), h_val)
        a_mat, b = damage_system(ctx, history, law)
        d = np.linalg.solve(a_mat.toarray(), b)
        slope = law.gc / (2.0 * law.c_w * law.ell)
        d_exact = 2.0 * h_val / (2.0 * h_val + slope)
        np.testing.assert_allclose(d, d_exact, rtol=1e-10)


class TestSurfaceEnergy:
    def test_zero_for_intact_field(self, square_ctx):
        law = PhaseFieldLaw("at1", ell=0.3, gc=0.5)
        assert surface_energy(square_ctx, np.zeros(square_ctx.mesh.n_nodes),
                              law) == 0.0

    @pytest.mark.parametrize("model", ["at1", "at2"])
    def test_optimal_profile_dissipates_gc(self, model):
        ell, gc = 0.5, 0.37
        bar = bar_mesh(40.0, 0.01)
        ctx = make_context(bar)
        law = PhaseFieldLaw(model, ell=ell, gc=gc)
        x = bar.nodes[:, 0] - 20.0
        if model == "at1":
            d = np.clip(1.0 - np.abs(x) / (2.0 * ell), 0.0, None) ** 2
        else:
            d = np.exp(-np.abs(x) / ell)
        diss = surface_energy(ctx, d, law)
        assert diss == pytest.approx(gc, rel=2e-4)


class TestScatterPattern:
    def test_pattern_assembly_matches_coo(self, square_ctx, plane_c):
        k = stiffness_matrix(square_ctx, plane_c)
        rows = np.repeat(square_ctx.edofs, square_ctx.edofs.shape[1], axis=1)
        cols = np.tile(square_ctx.edofs, (1, square_ctx.edofs.shape[1]))
        tab = square_ctx.stiffness_tables(plane_c)
        entries = np.empty((square_ctx.mesh.n_elements, tab.shape[2]))
        for s, ids in square_ctx.groups:
            entries[ids] = tab[s].sum(axis=0)
        ref = sp.coo_matrix(
            (entries.ravel(), (rows.ravel(), cols.ravel())),
            shape=(square_ctx.n_dof, square_ctx.n_dof),
        ).tocsr()
        diff = np.abs((k - ref).toarray()).max()
        assert diff < 1e-12 * np.abs(ref.toarray()).max()
