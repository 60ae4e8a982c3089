"""Legacy ASCII VTK writers for meshes, nodal fields, and crack surfaces.

Everything is written in the classic text format so any common viewer
can open the files without extra libraries. Meshes and point clouds go
out as unstructured grids; crack surfaces and deviation maps go out as
structured-points height maps over the (y, z) lattice. 1D and 2D
meshes are embedded in the specimen frame (beam axis x, thickness y,
height z) with the missing coordinates at zero.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .crack import GRID_STEP, CrackSurface, DeviationField
from .mesh import SpecimenMesh

_CELL_TYPE = {"line2": 3, "quad4": 9, "hex8": 12}


def _fmt(values: np.ndarray) -> str:
    """Rows of space-separated floats with stable short formatting."""
    rows = np.atleast_2d(np.asarray(values, dtype=float))
    return "\n".join(" ".join(f"{v:.9g}" for v in row) for row in rows)


def _embed3(coords: np.ndarray) -> np.ndarray:
    """Embed 1D/2D coordinates into the (x, y, z) specimen frame."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n, dim = coords.shape
    out = np.zeros((n, 3))
    if dim == 1:
        out[:, 0] = coords[:, 0]
    elif dim == 2:
        out[:, 0] = coords[:, 0]
        out[:, 2] = coords[:, 1]
    elif dim == 3:
        out[:] = coords
    else:
        raise ValueError("coordinates must have 1 to 3 columns")
    return out


def _point_data_block(n_points: int, data: Mapping[str, np.ndarray]) -> list[str]:
    parts = [f"POINT_DATA {n_points}"]
    for name, values in data.items():
        values = np.asarray(values, dtype=float)
        if " " in name:
            raise ValueError(f"data name {name!r} must not contain spaces")
        if values.shape[0] != n_points:
            raise ValueError(f"field {name!r} does not match the point count")
        if values.ndim == 1:
            parts.append(f"SCALARS {name} float 1")
            parts.append("LOOKUP_TABLE default")
            parts.append(_fmt(values[:, None]))
        elif values.ndim == 2 and values.shape[1] in (1, 2, 3):
            parts.append(f"VECTORS {name} float")
            parts.append(_fmt(_embed3(values)))
        else:
            raise ValueError(f"field {name!r} must be scalar or vector valued")
    return parts


def write_mesh_vtk(path, mesh: SpecimenMesh,
                   point_data: Mapping[str, np.ndarray] | None = None,
                   title: str = "orthofrac mesh") -> None:
    """Write a mesh and optional nodal fields as an unstructured grid.

    Scalar fields are (n_nodes,) arrays; vector fields (n_nodes, dim)
    arrays embedded into 3 components the same way as the coordinates.
    """
    cells = mesh.elements
    nn = cells.shape[1]
    parts = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} float",
        _fmt(_embed3(mesh.nodes)),
        f"CELLS {mesh.n_elements} {mesh.n_elements * (nn + 1)}",
        "\n".join(f"{nn} " + " ".join(str(i) for i in row) for row in cells),
        f"CELL_TYPES {mesh.n_elements}",
        "\n".join([str(_CELL_TYPE[mesh.family])] * mesh.n_elements),
    ]
    if point_data:
        parts.extend(_point_data_block(mesh.n_nodes, point_data))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def write_point_cloud_vtk(path, points: np.ndarray,
                          point_data: Mapping[str, np.ndarray] | None = None,
                          title: str = "orthofrac point cloud") -> None:
    """Write a point set (n, dim) as vertex cells with optional data."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    parts = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} float",
        _fmt(_embed3(points)),
        f"CELLS {n} {2 * n}",
        "\n".join(f"1 {i}" for i in range(n)),
        f"CELL_TYPES {n}",
        "\n".join(["1"] * n),
    ]
    if point_data:
        parts.extend(_point_data_block(n, point_data))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def write_surface_vtk(path, surface: CrackSurface,
                      deviation: DeviationField | None = None,
                      title: str = "crack surface") -> None:
    """Write a crack surface as a structured-points height map.

    The lattice spans (y, z) with the crack-normal position as the
    scalar ``x_mm``; a deviation field on the same lattice is exported
    alongside as ``deviation_mm``. Undefined nodes carry nan.
    """
    ny, nz = len(surface.y), len(surface.z)
    fields: dict[str, np.ndarray] = {"x_mm": surface.x}
    if deviation is not None:
        if deviation.delta.shape != surface.x.shape:
            raise ValueError("deviation field does not match the surface lattice")
        fields["deviation_mm"] = deviation.delta
    parts = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {ny} {nz} 1",
        f"ORIGIN {surface.y[0]:.9g} {surface.z[0]:.9g} 0",
        f"SPACING {GRID_STEP:.9g} {GRID_STEP:.9g} {GRID_STEP:.9g}",
        f"POINT_DATA {ny * nz}",
    ]
    for name, values in fields.items():
        parts.append(f"SCALARS {name} float 1")
        parts.append("LOOKUP_TABLE default")
        # VTK orders structured points with the first dimension fastest
        parts.append(_fmt(values.T.reshape(-1, 1)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
