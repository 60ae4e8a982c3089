"""Vectorized finite-element operators on structured specimen meshes.

Every mesh this package builds consists of axis-aligned box elements,
so shape-function gradients and Jacobians depend only on the element
edge lengths. The assembly context groups elements by their (few)
distinct shapes and precomputes per-shape integration tables once;
element blocks then come from one matrix product per shape group and
are scattered into a fixed CSR sparsity pattern, which keeps repeated
assembly inside the staggered loop cheap.

The damage operators realize the first-order conditions of the
regularized fracture energy: with driving field H, degradation
g(d) = (1 - d)^2 + g0 and dissipation w(d) integrated with prefactor
Gc / (4 c_w), the stationarity residual is linear in d, giving a
symmetric positive definite system A d = b to be solved subject to
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import FAMILIES, box_element_tables, strain_matrix
from .mesh import SpecimenMesh
from .phasefield import PhaseFieldLaw, degradation, dissipation


class _ScatterPattern:
    """Fixed CSR sparsity with a map from element entries to slots."""

    def __init__(self, dofmap: np.ndarray, n_dof: int):
        nd = dofmap.shape[1]
        rows = np.repeat(dofmap, nd, axis=1).ravel().astype(np.int64)
        cols = np.tile(dofmap, (1, nd)).ravel().astype(np.int64)
        keys = rows * n_dof + cols
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        new_slot = np.ones(len(sorted_keys), dtype=bool)
        new_slot[1:] = sorted_keys[1:] != sorted_keys[:-1]
        slot_of_sorted = np.cumsum(new_slot) - 1
        self.scatter = np.empty(len(keys), dtype=np.int64)
        self.scatter[order] = slot_of_sorted
        unique_keys = sorted_keys[new_slot]
        self.nnz = len(unique_keys)
        self.indices = (unique_keys % n_dof).astype(np.int32)
        unique_rows = unique_keys // n_dof
        self.indptr = np.searchsorted(unique_rows, np.arange(n_dof + 1)).astype(np.int32)
        self.n_dof = n_dof

    def assemble(self, entry_values: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.scatter, weights=entry_values.ravel(),
                           minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.n_dof, self.n_dof))


@dataclass
class AssemblyContext:
    """Precomputed integration tables for one mesh.

    ``groups`` lists (shape index, element ids) with all elements of
    one geometry; ``b_tables`` and ``detjw`` carry the per-shape
    strain-displacement matrices and weighted Jacobians (the 2D ones
    already scaled by the specimen thickness).
    """

    mesh: SpecimenMesh
    shape_vals: np.ndarray = field(repr=False)
    grad_tables: np.ndarray = field(repr=False)
    b_tables: np.ndarray = field(repr=False)
    detjw: np.ndarray = field(repr=False)
    shape_of: np.ndarray = field(repr=False)
    groups: tuple[tuple[int, np.ndarray], ...] = field(repr=False)
    edofs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._stiff_tables: dict[bytes, np.ndarray] = {}
        self._damage_tables = None
        self._disp_pattern: _ScatterPattern | None = None
        self._node_pattern: _ScatterPattern | None = None

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def n_gauss(self) -> int:
        return self.shape_vals.shape[0]

    @property
    def n_dof(self) -> int:
        return self.mesh.n_nodes * self.dim

    @property
    def detjw_elems(self) -> np.ndarray:
        """Weighted Jacobians per element and Gauss point, (ne, ngp)."""
        return self.detjw[self.shape_of]

    # -- cached structures ---------------------------------------------------

    def displacement_pattern(self) -> _ScatterPattern:
        if self._disp_pattern is None:
            self._disp_pattern = _ScatterPattern(self.edofs.astype(np.int64),
                                                 self.n_dof)
        return self._disp_pattern

    def node_pattern(self) -> _ScatterPattern:
        if self._node_pattern is None:
            self._node_pattern = _ScatterPattern(
                self.mesh.elements.astype(np.int64), self.mesh.n_nodes
            )
        return self._node_pattern

    def stiffness_tables(self, c_matrix: np.ndarray) -> np.ndarray:
        """Per shape and Gauss point, flattened B'CB detjw blocks."""
        key = c_matrix.tobytes()
        tab = self._stiff_tables.get(key)
        if tab is None:
            tab = np.einsum("sgci,cd,sgdj,sg->sgij", self.b_tables, c_matrix,
                            self.b_tables, self.detjw, optimize=True)
            ns, ngp, nd, _ = tab.shape
            tab = np.ascontiguousarray(tab.reshape(ns, ngp, nd * nd))
            if len(self._stiff_tables) > 8:
                self._stiff_tables.clear()
            self._stiff_tables[key] = tab
        return tab

    def damage_tables(self):
        """Geometric mass, Laplace and load tables per shape."""
        if self._damage_tables is None:
            nnt = self.shape_vals[:, :, None] * self.shape_vals[:, None, :]
            mass = nnt[None] * self.detjw[:, :, None, None]
            lap = np.einsum("sgni,sgmi,sg->snm", self.grad_tables,
                            self.grad_tables, self.detjw, optimize=True)
            load = self.shape_vals[None] * self.detjw[:, :, None]
            ns, ngp, nn, _ = mass.shape
            self._damage_tables = (
                np.ascontiguousarray(mass.reshape(ns, ngp, nn * nn)),
                lap.reshape(ns, nn * nn),
                np.ascontiguousarray(load),
            )
        return self._damage_tables


def make_context(mesh: SpecimenMesh) -> AssemblyContext:
    """Group elements by shape and tabulate their integration data."""
    family = FAMILIES[mesh.family]
    sizes = mesh.element_sizes()
    if np.any(sizes <= 0.0):
        raise ValueError("mesh contains inverted or degenerate elements")
    rounded = np.round(sizes, 12)
    uniq, shape_of = np.unique(rounded, axis=0, return_inverse=True)
    shape_of = shape_of.astype(np.int32)
    shape_vals, dndx, detjw = box_element_tables(family, uniq)
    detjw = detjw * mesh.thickness
    b_tables = strain_matrix(dndx)
    order = np.argsort(shape_of, kind="stable")
    bounds = np.searchsorted(shape_of[order], np.arange(len(uniq) + 1))
    groups = tuple(
        (s, order[bounds[s]:bounds[s + 1]].astype(np.int64))
        for s in range(len(uniq))
        if bounds[s + 1] > bounds[s]
    )
    edofs = (
        mesh.elements[:, :, None].astype(np.int64) * mesh.dim
        + np.arange(mesh.dim)[None, None, :]
    ).reshape(mesh.n_elements, -1)
    return AssemblyContext(
        mesh=mesh,
        shape_vals=shape_vals,
        grad_tables=dndx,
        b_tables=b_tables,
        detjw=detjw,
        shape_of=shape_of,
        groups=groups,
        edofs=edofs.astype(np.int32),
    )


def stiffness_matrix(ctx: AssemblyContext, c_matrix: np.ndarray,
                     damage: np.ndarray | None = None, g0: float = 1e-5,
                     element_scale: np.ndarray | None = None) -> sp.csr_matrix:
    """Global stiffness with per-point degradation.

    ``damage`` holds nodal damage values; None assembles the intact
    stiffness. The degradation factor is evaluated at Gauss points
    from the interpolated field. ``element_scale`` multiplies the
    moduli element by element (material defects, heterogeneity).
    """
    c_matrix = np.asarray(c_matrix, dtype=float)
    tables = ctx.stiffness_tables(c_matrix)
    if damage is not None:
        gfac = degradation(gauss_interpolate(ctx, damage), g0)[0]
    else:
        gfac = None
    if element_scale is not None:
        scale = np.asarray(element_scale, dtype=float)[:, None]
        gfac = scale if gfac is None else gfac * scale
    if gfac is not None:
        gfac = np.broadcast_to(gfac, (ctx.mesh.n_elements, ctx.n_gauss))
    nd2 = tables.shape[2]
    entries = np.empty((ctx.mesh.n_elements, nd2))
    for s, ids in ctx.groups:
        if gfac is None:
            entries[ids] = tables[s].sum(axis=0)
        else:
            entries[ids] = gfac[ids] @ tables[s]
    return ctx.displacement_pattern().assemble(entries)


def strains(ctx: AssemblyContext, u: np.ndarray) -> np.ndarray:
    """Voigt strain at every Gauss point, (ne, ngp, n_strain)."""
    u = np.asarray(u, dtype=float)
    ue = u[ctx.edofs]
    ne, ngp = ctx.mesh.n_elements, ctx.n_gauss
    n_strain = ctx.b_tables.shape[2]
    out = np.empty((ne, ngp, n_strain))
    for s, ids in ctx.groups:
        flat = ctx.b_tables[s].reshape(ngp * n_strain, -1)
        out[ids] = (ue[ids] @ flat.T).reshape(len(ids), ngp, n_strain)
    return out


def energy_density(ctx: AssemblyContext, u: np.ndarray, c_matrix: np.ndarray,
                   element_scale: np.ndarray | None = None) -> np.ndarray:
    """Undegraded strain energy density at Gauss points, (ne, ngp)."""
    eps = strains(ctx, u)
    psi = 0.5 * np.einsum("egc,cd,egd->eg", eps, np.asarray(c_matrix, float), eps,
                          optimize=True)
    if element_scale is not None:
        psi = psi * np.asarray(element_scale, dtype=float)[:, None]
    return psi


def gauss_interpolate(ctx: AssemblyContext, nodal: np.ndarray) -> np.ndarray:
    """Nodal scalar field interpolated to Gauss points, (ne, ngp)."""
    vals = np.asarray(nodal, dtype=float)[ctx.mesh.elements]
    return vals @ ctx.shape_vals.T


def gauss_gradient_sq(ctx: AssemblyContext, nodal: np.ndarray) -> np.ndarray:
    """Squared gradient magnitude of a nodal field at Gauss points."""
    vals = np.asarray(nodal, dtype=float)[ctx.mesh.elements]
    ne, ngp = ctx.mesh.n_elements, ctx.n_gauss
    dim = ctx.dim
    out = np.empty((ne, ngp))
    for s, ids in ctx.groups:
        flat = ctx.grad_tables[s].transpose(0, 2, 1).reshape(ngp * dim, -1)
        grad = (vals[ids] @ flat.T).reshape(len(ids), ngp, dim)
        out[ids] = np.einsum("egd,egd->eg", grad, grad)
    return out


def damage_system(ctx: AssemblyContext, history: np.ndarray,
                  law: PhaseFieldLaw) -> tuple[sp.csr_matrix, np.ndarray]:
    """Linear system of damage stationarity for a given driving field.

    The reaction term collects 2 H plus the constant part of the
    dissipation curvature; the source keeps 2 H minus the constant
    slope, so the threshold model retains its elastic limit while the
    quadratic model drives damage at any load level.
    """
    history = np.asarray(history, dtype=float)
    pref = law.surface_prefactor
    if law.model == "at1":
        w_slope, w_curv = 1.0, 0.0
    else:
        w_slope, w_curv = 0.0, 2.0
    grad_coef = 2.0 * pref * law.ell
    mass_extra = pref / law.ell * w_curv
    source_shift = pref / law.ell * w_slope

    mass_tab, lap_tab, load_tab = ctx.damage_tables()
    nn = ctx.mesh.elements.shape[1]
    entries = np.empty((ctx.mesh.n_elements, nn * nn))
    be = np.empty((ctx.mesh.n_elements, nn))
    for s, ids in ctx.groups:
        h_grp = history[ids]
        entries[ids] = (2.0 * h_grp + mass_extra) @ mass_tab[s]
        entries[ids] += grad_coef * lap_tab[s]
        be[ids] = (2.0 * h_grp - source_shift) @ load_tab[s]
    a_mat = ctx.node_pattern().assemble(entries)
    b = np.bincount(ctx.mesh.elements.ravel(), weights=be.ravel(),
                    minlength=ctx.mesh.n_nodes)
    return a_mat, b


def integrate_gauss(ctx: AssemblyContext, values: np.ndarray) -> float:
    """Integral of a Gauss-point field over the mesh."""
    return float(np.einsum("eg,eg->", np.asarray(values, dtype=float),
                           ctx.detjw_elems))


def elastic_energy(ctx: AssemblyContext, u: np.ndarray, c_matrix: np.ndarray,
                   damage: np.ndarray | None = None, g0: float = 1e-5,
                   element_scale: np.ndarray | None = None) -> float:
    """Stored elastic energy, degraded where damage is given."""
    psi = energy_density(ctx, u, c_matrix, element_scale)
    if damage is not None:
        psi = psi * degradation(gauss_interpolate(ctx, damage), g0)[0]
    return integrate_gauss(ctx, psi)


def surface_energy(ctx: AssemblyContext, damage: np.ndarray, law: PhaseFieldLaw) -> float:
    """Regularized crack surface energy of a nodal damage field."""
    d_gp = gauss_interpolate(ctx, damage)
    w_d = dissipation(d_gp, law.model)[0]
    grad_sq = gauss_gradient_sq(ctx, damage)
    density = law.surface_prefactor * (w_d / law.ell + law.ell * grad_sq)
    return integrate_gauss(ctx, density)
