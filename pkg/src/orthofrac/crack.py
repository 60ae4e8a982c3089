"""Crack surface extraction and comparison on a fixed metrology lattice.

Simulated cracks are diffuse damage bands; measured cracks are height
maps from surface scans. Both are reduced to the same representation, a
regular 0.1 mm lattice over the crack plane (thickness y, height z)
carrying the crack-normal coordinate x, so numerical and experimental
surfaces can be averaged and compared pointwise. Lattice nodes sit on
integer multiples of the pitch, which makes grids from different
sources commensurable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .elements import FAMILIES
from .mesh import SpecimenMesh

# Lattice pitch (mm) of the resampled crack representation. Keeping one
# fixed pitch lets surfaces from any source share node positions.
GRID_STEP = 0.1

_VARIANTS = ("min-limit", "max-limit", "average", "scan")


def _to_index(values: np.ndarray, what: str) -> np.ndarray:
    """Map lattice coordinates to integer indices, rejecting off-pitch values."""
    values = np.asarray(values, dtype=float)
    idx = np.round(values / GRID_STEP)
    if np.any(np.abs(values - idx * GRID_STEP) > 1e-6):
        raise ValueError(f"{what} coordinates must be multiples of {GRID_STEP}")
    return idx.astype(np.int64)


def _lattice_axis(lo: float, hi: float) -> np.ndarray:
    """Lattice nodes covering [lo, hi], on integer multiples of the pitch."""
    i0 = int(np.ceil(lo / GRID_STEP - 1e-9))
    i1 = int(np.floor(hi / GRID_STEP + 1e-9))
    return np.arange(i0, i1 + 1) * GRID_STEP


@dataclass(frozen=True)
class CrackSurface:
    """Crack-normal coordinate x on a regular (y, z) lattice.

    ``x[i, j]`` holds the surface position above thickness coordinate
    ``y[i]`` and height coordinate ``z[j]``; NaN marks columns where the
    surface is undefined. Surfaces reduced from 2D mid-plane models use
    a single-node y axis. ``variant`` records what the values mean: the
    lower or upper limit of a diffuse crack band, an averaged surface,
    or a cleaned measurement.
    """

    y: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    variant: str

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or z.ndim != 1 or y.size == 0 or z.size == 0:
            raise ValueError("lattice axes must be non-empty 1D arrays")
        for name, ax in (("y", y), ("z", z)):
            _to_index(ax, name)
            if ax.size > 1 and np.any(np.abs(np.diff(ax) - GRID_STEP) > 1e-9):
                raise ValueError(f"{name} axis must advance in steps of {GRID_STEP}")
        if x.shape != (y.size, z.size):
            raise ValueError("value array does not match the lattice axes")
        if np.any(np.isinf(x)):
            raise ValueError("surface values must be finite or NaN")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)

    @property
    def defined(self) -> np.ndarray:
        """Boolean mask of lattice nodes carrying a surface value."""
        return np.isfinite(self.x)

    @property
    def n_defined(self) -> int:
        return int(np.count_nonzero(self.defined))

    def cloud(self) -> np.ndarray:
        """Defined nodes as (n, 3) physical points with columns (x, y, z)."""
        iy, iz = np.nonzero(self.defined)
        return np.column_stack([self.x[iy, iz], self.y[iy], self.z[iz]])

    def translated(self, shift: tuple[float, float, float]) -> "CrackSurface":
        """Rigidly translated copy; the (y, z) shift must sit on the lattice."""
        tx, ty, tz = (float(s) for s in shift)
        y = self.y + ty
        z = self.z + tz
        _to_index(y, "shifted y")
        _to_index(z, "shifted z")
        return CrackSurface(y=y, z=z, x=self.x + tx, variant=self.variant)


@dataclass(frozen=True)
class DeviationField:
    """Pointwise distance from one crack surface to another.

    ``delta[i, j]`` is the Euclidean distance from the node of the
    compared surface at (y[i], z[j]) to the nearest defined point of the
    reference surface, NaN where the compared surface is undefined.
    """

    y: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        if delta.shape != (y.size, z.size):
            raise ValueError("deviation array does not match the lattice axes")
        if not np.any(np.isfinite(delta)):
            raise ValueError("deviation field has no defined values")
        with np.errstate(invalid="ignore"):
            if np.any(delta < 0.0):
                raise ValueError("deviations cannot be negative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "delta", delta)

    @property
    def max_deviation(self) -> float:
        """Largest pointwise deviation over the defined nodes."""
        return float(np.nanmax(self.delta))


def broken_region(mesh: SpecimenMesh, damage: np.ndarray,
                  threshold: float = 0.95) -> np.ndarray:
    """Lattice points where the interpolated damage reaches the threshold.

    The nodal damage field is evaluated with the element shape functions
    on the fixed 0.1 mm lattice; points outside the mesh or inside
    carved voids are skipped. Returns the fully broken point set as an
    (n, dim) array in mesh coordinates, possibly empty.
    """
    damage = np.asarray(damage, dtype=float)
    if damage.shape != (mesh.n_nodes,):
        raise ValueError("damage must be a nodal field on the mesh")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    # Multilinear interpolation never exceeds the nodal values, so only
    # elements owning a node at or above the threshold can contribute.
    elem_max = damage[mesh.elements].max(axis=1)
    candidates = np.nonzero(elem_max >= threshold)[0]
    if candidates.size == 0:
        return np.empty((0, mesh.dim))
    corner_nodes = mesh.nodes[mesh.elements[candidates]]
    lo = corner_nodes.min(axis=(0, 1))
    hi = corner_nodes.max(axis=(0, 1))
    axes = [_lattice_axis(lo[k], hi[k]) for k in range(mesh.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    elems, xi = mesh.locate(points)
    inside = elems >= 0
    points, elems, xi = points[inside], elems[inside], xi[inside]
    shapes = FAMILIES[mesh.family].shape(xi)
    values = np.einsum("pn,pn->p", shapes, damage[mesh.elements[elems]])
    return points[values >= threshold]


def limit_surfaces(points: np.ndarray) -> tuple[CrackSurface, CrackSurface]:
    """Outer limits of a broken point set, per (y, z) lattice column.

    Accepts (n, 3) points with columns (x, y, z) or (n, 2) mid-plane
    points with columns (x, z), which are given a single-node y axis at
    zero. Returns the min-limit and max-limit surfaces; columns with no
    broken point stay undefined.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] not in (2, 3):
        raise ValueError("expected (n, 3) crack points or (n, 2) mid-plane points")
    if len(points) == 0:
        raise ValueError("cannot build limit surfaces from an empty point set")
    if points.shape[1] == 2:
        points = np.column_stack([points[:, 0],
                                  np.zeros(len(points)), points[:, 1]])
    iy = _to_index(points[:, 1], "y")
    iz = _to_index(points[:, 2], "z")
    y_axis = np.arange(iy.min(), iy.max() + 1) * GRID_STEP
    z_axis = np.arange(iz.min(), iz.max() + 1) * GRID_STEP
    shape = (len(y_axis), len(z_axis))
    flat = (iy - iy.min()) * shape[1] + (iz - iz.min())
    lo = np.full(shape[0] * shape[1], np.inf)
    hi = np.full(shape[0] * shape[1], -np.inf)
    np.minimum.at(lo, flat, points[:, 0])
    np.maximum.at(hi, flat, points[:, 0])
    lo[np.isinf(lo)] = np.nan
    hi[np.isinf(hi)] = np.nan
    return (CrackSurface(y=y_axis, z=z_axis, x=lo.reshape(shape), variant="min-limit"),
            CrackSurface(y=y_axis, z=z_axis, x=hi.reshape(shape), variant="max-limit"))


def average_surface(lower: CrackSurface, upper: CrackSurface) -> CrackSurface:
    """Pointwise midpoint of two limit surfaces on the same lattice."""
    if (len(lower.y) != len(upper.y) or len(lower.z) != len(upper.z)
            or np.any(np.abs(lower.y - upper.y) > 1e-9)
            or np.any(np.abs(lower.z - upper.z) > 1e-9)):
        raise ValueError("limit surfaces live on different lattices")
    if np.any(lower.defined != upper.defined):
        raise ValueError("limit surfaces are defined on different columns")
    return CrackSurface(y=lower.y, z=lower.z,
                        x=0.5 * (lower.x + upper.x), variant="average")


def deviation(compared: CrackSurface, reference: CrackSurface) -> DeviationField:
    """Distance from each defined node of one surface to the other.

    Both surfaces are treated as 3D point clouds; each defined node of
    the compared surface is assigned the Euclidean distance to the
    nearest defined point of the reference. Undefined nodes stay NaN
    and are never extrapolated.
    """
    ref_cloud = reference.cloud()
    if len(ref_cloud) == 0:
        raise ValueError("reference surface has no defined points")
    if compared.n_defined == 0:
        raise ValueError("compared surface has no defined points")
    delta = np.full(compared.x.shape, np.nan)
    dist, _ = cKDTree(ref_cloud).query(compared.cloud())
    delta[compared.defined] = dist
    return DeviationField(y=compared.y, z=compared.z, delta=delta)
