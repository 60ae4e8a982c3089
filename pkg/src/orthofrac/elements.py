"""Isoparametric element families: shape functions and Gauss rules.

Three low-order families cover every mesh this package builds: 2-node
bars, 4-node quadrilaterals and 8-node hexahedra, each integrated with
the 2-point Gauss rule per direction. Reference coordinates live on
[-1, 1]^dim and node ordering follows the usual VTK convention, so an
axis-aligned box element maps with a constant diagonal Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_GP1 = 1.0 / np.sqrt(3.0)

_CORNERS = {
    "line2": np.array([[-1.0], [1.0]]),
    "quad4": np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    "hex8": np.array(
        [
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ]
    ),
}

VTK_CELL_TYPES = {"line2": 3, "quad4": 9, "hex8": 12}


def _tensor_gauss(dim: int) -> tuple[np.ndarray, np.ndarray]:
    pts_1d = np.array([-_GP1, _GP1])
    grids = np.meshgrid(*([pts_1d] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(len(pts))
    return pts, wts


@dataclass(frozen=True)
class ElementFamily:
    """Reference-element data for one isoparametric family."""

    name: str
    dim: int
    corners: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.corners)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points (ngp, dim) and weights (ngp,)."""
        return _tensor_gauss(self.dim)

    def shape(self, xi: np.ndarray) -> np.ndarray:
        """Shape function values, (..., n_nodes) for xi of shape (..., dim)."""
        xi = np.asarray(xi, dtype=float)
        terms = 1.0 + xi[..., None, :] * self.corners
        return terms.prod(axis=-1) / 2.0 ** self.dim

    def shape_grad(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients dN/dxi, (..., n_nodes, dim)."""
        xi = np.asarray(xi, dtype=float)
        terms = 1.0 + xi[..., None, :] * self.corners
        grads = np.empty(terms.shape)
        for j in range(self.dim):
            parts = terms.copy()
            parts[..., j] = self.corners[:, j]
            grads[..., j] = parts.prod(axis=-1)
        return grads / 2.0 ** self.dim


FAMILIES = {name: ElementFamily(name, c.shape[1], c) for name, c in _CORNERS.items()}


def box_element_tables(family: ElementFamily, sizes: np.ndarray):
    """Per-shape integration tables for axis-aligned box elements.

    Parameters
    ----------
    family : ElementFamily
    sizes : ndarray, shape (ns, dim)
        Edge lengths of each distinct element shape.

    Returns
    -------
    shape_vals : ndarray, shape (ngp, n_nodes)
    dndx : ndarray, shape (ns, ngp, n_nodes, dim)
        Physical shape-function gradients.
    detjw : ndarray, shape (ns, ngp)
        Jacobian determinant times Gauss weight.
    """
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    if sizes.shape[1] != family.dim:
        raise ValueError(f"sizes must have {family.dim} columns")
    if np.any(sizes <= 0.0):
        raise ValueError("element edge lengths must be positive")
    pts, wts = family.quadrature()
    shape_vals = family.shape(pts)
    dndxi = family.shape_grad(pts)
    # diagonal Jacobian h/2 per axis
    dndx = dndxi[None, :, :, :] * (2.0 / sizes)[:, None, None, :]
    detj = sizes.prod(axis=1) / 2.0 ** family.dim
    detjw = detj[:, None] * wts[None, :]
    return shape_vals, dndx, detjw


def strain_matrix(dndx: np.ndarray) -> np.ndarray:
    """Strain-displacement matrix from physical gradients.

    Maps interleaved nodal displacements to Voigt strain with
    engineering shear. Input (..., n_nodes, dim); output
    (..., n_strain, n_nodes * dim) with n_strain = 1, 3, 6 for
    dim = 1, 2, 3. The 2D rows are (xx, zz, xz) matching the
    mid-plane submatrix of the orthotropic tensor; the 3D rows are
    (xx, yy, zz, yz, xz, xy).
    """
    dndx = np.asarray(dndx, dtype=float)
    lead = dndx.shape[:-2]
    nn, dim = dndx.shape[-2:]
    if dim == 1:
        b = dndx.reshape(lead + (1, nn))
        return b
    n_strain = 3 if dim == 2 else 6
    b = np.zeros(lead + (n_strain, nn * dim))
    cols = np.arange(nn) * dim
    if dim == 2:
        b[..., 0, cols] = dndx[..., 0]
        b[..., 1, cols + 1] = dndx[..., 1]
        b[..., 2, cols] = dndx[..., 1]
        b[..., 2, cols + 1] = dndx[..., 0]
    else:
        b[..., 0, cols] = dndx[..., 0]
        b[..., 1, cols + 1] = dndx[..., 1]
        b[..., 2, cols + 2] = dndx[..., 2]
        b[..., 3, cols + 1] = dndx[..., 2]
        b[..., 3, cols + 2] = dndx[..., 1]
        b[..., 4, cols] = dndx[..., 2]
        b[..., 4, cols + 2] = dndx[..., 0]
        b[..., 5, cols] = dndx[..., 1]
        b[..., 5, cols + 1] = dndx[..., 0]
    return b
