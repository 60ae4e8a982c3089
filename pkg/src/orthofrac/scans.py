"""Cleaning, alignment, and averaging of measured crack-surface scans.

Raw profilometer scans carry a mounting tilt and sporadic spike
artifacts. Cleaning removes the least-squares plane and replaces
outliers by a local median, after which scans of nominally identical
specimens are brought into a common frame by a rigid translation that
matches a marked notch-edge point, and averaged pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import median_filter

from .crack import GRID_STEP, CrackSurface

# Consistency factor making the median absolute deviation estimate the
# standard deviation of normal noise.
_MAD_SCALE = 1.4826


def clean_scan(scan: CrackSurface, k: float = 5.0, window: int = 5,
               reference: np.ndarray | None = None) -> CrackSurface:
    """Remove the best-fit plane and replace spike outliers.

    The least-squares plane over the reference region (all defined
    nodes unless a boolean mask narrows it to a trusted flat zone) is
    subtracted, then nodes farther than ``k`` scaled median absolute
    deviations from their local median (a ``window`` x ``window``
    neighborhood) are replaced by that median. Undefined nodes stay
    undefined. Raises if every node is flagged, which signals corrupt
    data rather than noise.
    """
    if k <= 0.0:
        raise ValueError("outlier cutoff k must be positive")
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer of at least 3")
    mask = scan.defined
    if not np.any(mask):
        raise ValueError("scan has no defined points")
    fit_mask = mask
    if reference is not None:
        reference = np.asarray(reference, dtype=bool)
        if reference.shape != scan.x.shape:
            raise ValueError("reference mask does not match the scan lattice")
        fit_mask = mask & reference
        if not np.any(fit_mask):
            raise ValueError("reference region holds no defined points")
    iy, iz = np.nonzero(fit_mask)
    basis = np.column_stack([np.ones(len(iy)), scan.y[iy], scan.z[iz]])
    coef, *_ = np.linalg.lstsq(basis, scan.x[iy, iz], rcond=None)
    plane = coef[0] + coef[1] * scan.y[:, None] + coef[2] * scan.z[None, :]
    values = scan.x - plane

    # The local median is computed on a gap-filled copy so undefined
    # nodes never poison their neighbors' statistics.
    filled = np.where(mask, values, np.nanmedian(values))
    local = median_filter(filled, size=window, mode="nearest")
    residual = np.where(mask, values - local, 0.0)
    center = np.median(residual[mask])
    mad = _MAD_SCALE * np.median(np.abs(residual[mask] - center))
    spread = np.abs(residual - center)
    outliers = mask & (spread > max(k * mad, 1e-12))
    if np.array_equal(outliers, mask):
        raise ValueError("every scan point is an outlier; data looks corrupt")
    cleaned = np.where(outliers, local, values)
    cleaned[~mask] = np.nan
    return CrackSurface(y=scan.y, z=scan.z, x=cleaned, variant="scan")


@dataclass(frozen=True)
class AnchoredScan:
    """A cleaned scan plus the scan-frame position of its notch-edge mark.

    The anchor is the (x, y, z) location, in the scan's own coordinates,
    of the reference point that every specimen shares, so scans can be
    translated into a common frame.
    """

    surface: CrackSurface
    anchor: tuple[float, float, float]

    def __post_init__(self):
        anchor = tuple(float(a) for a in self.anchor)
        if len(anchor) != 3 or not all(np.isfinite(anchor)):
            raise ValueError("anchor must be a finite (x, y, z) point")
        object.__setattr__(self, "anchor", anchor)


def align_and_average_scans(scans: Sequence[AnchoredScan],
                            target: tuple[float, float, float]) -> CrackSurface:
    """Average scans after translating each anchor onto the target point.

    Each scan is rigidly translated by the offset from its anchor to
    ``target``; the in-plane (y, z) components are rounded to the
    lattice pitch so the grids stay commensurable. The result is the
    pointwise mean over the nodes defined in every scan. Raises if the
    aligned scans share no defined node.
    """
    if len(scans) == 0:
        raise ValueError("need at least one scan to average")
    target = tuple(float(t) for t in target)
    moved = []
    for rec in scans:
        shift = np.array(target) - np.array(rec.anchor)
        shift[1:] = np.round(shift[1:] / GRID_STEP) * GRID_STEP
        moved.append(rec.surface.translated(tuple(shift)))

    iy0 = max(int(np.round(s.y[0] / GRID_STEP)) for s in moved)
    iy1 = min(int(np.round(s.y[-1] / GRID_STEP)) for s in moved)
    iz0 = max(int(np.round(s.z[0] / GRID_STEP)) for s in moved)
    iz1 = min(int(np.round(s.z[-1] / GRID_STEP)) for s in moved)
    if iy0 > iy1 or iz0 > iz1:
        raise ValueError("aligned scans cover disjoint regions")
    y_axis = np.arange(iy0, iy1 + 1) * GRID_STEP
    z_axis = np.arange(iz0, iz1 + 1) * GRID_STEP

    stack = np.empty((len(moved), len(y_axis), len(z_axis)))
    for i, surf in enumerate(moved):
        ys = iy0 - int(np.round(surf.y[0] / GRID_STEP))
        zs = iz0 - int(np.round(surf.z[0] / GRID_STEP))
        stack[i] = surf.x[ys:ys + len(y_axis), zs:zs + len(z_axis)]
    common = np.all(np.isfinite(stack), axis=0)
    if not np.any(common):
        raise ValueError("aligned scans share no defined node")
    mean = np.where(common, stack.mean(axis=0), np.nan)
    return CrackSurface(y=y_axis, z=z_axis, x=mean, variant="average")
