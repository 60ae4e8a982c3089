"""Specimen geometry: beam, notch descriptor and rod-line layout.

The beam occupies [0, L] x [0, W] x [0, H] with the length along x,
the thickness along y and the height along z; 2D models live on the
(x, z) mid-plane. Notches are slots cut upward from the bottom face,
described by their footprint in the bottom view: an in-plane axis
angle of 90 deg means the slot runs straight across the thickness
(pure opening), other angles twist the slot about the vertical axis.
The slot height may taper linearly across the thickness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NotchSpec:
    """Slot cut from the bottom face.

    Parameters
    ----------
    offset : float
        x-offset of the slot center from midspan at mid-thickness, mm.
    angle_deg : float
        Angle between the slot's long axis and the beam axis in the
        bottom view; 90 runs straight across the thickness.
    width : float
        Slot thickness (kerf), mm.
    height : (float, float)
        Slot height at the y = 0 face and the y = W face, mm; equal
        values give a constant-height notch.
    """

    offset: float = 0.0
    angle_deg: float = 90.0
    width: float = 1.0
    height: tuple[float, float] = (8.47, 8.47)

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError(f"notch width must be positive, got {self.width}")
        h1, h2 = self.height
        if h1 <= 0.0 or h2 <= 0.0:
            raise ValueError(f"notch heights must be positive, got {self.height}")
        if not 0.0 < self.angle_deg <= 180.0:
            raise ValueError(f"notch axis angle must be in (0, 180], got {self.angle_deg}")

    @property
    def max_height(self) -> float:
        return max(self.height)

    def height_at(self, y: np.ndarray, width_total: float) -> np.ndarray:
        """Slot height at thickness coordinate y (linear taper)."""
        h1, h2 = self.height
        return h1 + (h2 - h1) * np.asarray(y, dtype=float) / width_total


@dataclass(frozen=True)
class SpecimenGeometry:
    """Beam dimensions, rod-line layout and the pinned-zone radius.

    ``span`` is the distance between the two bottom support lines,
    symmetric about midspan; the loading line sits on the top face at
    midspan. ``pin_radius`` is the radius of the half-cylindrical zones
    around every rod line inside which the damage field is pinned to
    zero. ``span`` may be None for plain rectangular domains that are
    meshed without any rod lines (verification fixtures).
    """

    length: float
    height: float
    width: float
    notch: NotchSpec | None = None
    span: float | None = None
    pin_radius: float = 2.5

    def __post_init__(self):
        for name in ("length", "height", "width"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.span is not None:
            if not 0.0 < self.span < self.length:
                raise ValueError(
                    f"support span must lie inside the beam length, got {self.span}"
                )
            if not 0.0 < self.pin_radius < self.height / 2.0:
                raise ValueError(
                    f"pinned-zone radius must be in (0, H/2), got {self.pin_radius}"
                )
        if self.notch is not None:
            half_extent = self.notch_half_extent()
            xc = self.length / 2.0 + self.notch.offset
            if xc - half_extent <= 0.0 or xc + half_extent >= self.length:
                raise ValueError("notch leaves the beam along its length")
            if self.notch.max_height >= self.height:
                raise ValueError("notch is taller than the beam")

    def notch_center_x(self) -> float:
        return self.length / 2.0 + (self.notch.offset if self.notch else 0.0)

    def notch_half_extent(self) -> float:
        """Half x-extent of the slot footprint over the full thickness."""
        if self.notch is None:
            return 0.0
        ang = np.deg2rad(self.notch.angle_deg)
        sin_a = max(np.sin(ang), 1e-9)
        # kerf widened by the in-plane tilt, plus the x-drift of the slot
        # axis while it crosses the full thickness
        drift = 0.5 * self.width * abs(np.cos(ang)) / sin_a
        return 0.5 * self.notch.width / sin_a + drift

    def notch_trace(self) -> tuple[float, float]:
        """x-interval of the slot at mid-thickness (2D section trace)."""
        if self.notch is None:
            raise ValueError("geometry has no notch")
        if abs(self.notch.angle_deg - 90.0) > 1e-9:
            raise ValueError("2D sections require a notch running straight across")
        xc = self.notch_center_x()
        return xc - self.notch.width / 2.0, xc + self.notch.width / 2.0

    def in_notch(self, x, y, z) -> np.ndarray:
        """Mask of points strictly inside the slot prism (3D carving test)."""
        if self.notch is None:
            return np.zeros(np.broadcast(x, y, z).shape, dtype=bool)
        ang = np.deg2rad(self.notch.angle_deg)
        axis = np.array([np.cos(ang), np.sin(ang)])
        normal = np.array([-axis[1], axis[0]])
        dx = np.asarray(x, dtype=float) - self.notch_center_x()
        dy = np.asarray(y, dtype=float) - self.width / 2.0
        dist = dx * normal[0] + dy * normal[1]
        h = self.notch.height_at(y, self.width)
        return (np.abs(dist) < self.notch.width / 2.0) & (np.asarray(z) < h)

    def rod_lines(self) -> list[tuple[float, float]]:
        """(x, z) anchors of the support and loading lines."""
        if self.span is None:
            return []
        mid = self.length / 2.0
        return [
            (mid - self.span / 2.0, 0.0),
            (mid + self.span / 2.0, 0.0),
            (mid, self.height),
        ]
