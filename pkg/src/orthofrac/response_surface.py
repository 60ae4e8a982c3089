"""Quadratic response surface over the (stiffness, toughness) plane.

The calibration cost is sampled on small grids and approximated by
q(C, G) = p0 + p1 C + p2 G + p3 C^2 + p4 C G + p5 G^2;
its stationary point is found analytically from the 2x2 system
grad q = 0. The two parameters differ by four orders of magnitude, so
the least-squares fit runs in internally standardized coordinates
(zero mean, unit range) and the coefficients are mapped back to
physical units afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NoMinimumError(RuntimeError):
    """The fitted surface has no interior minimum (Hessian not positive definite)."""


@dataclass(frozen=True)
class CostSample:
    """One simulator evaluation: parameters and resulting curve-mismatch cost."""

    c_vvvv: float  # MPa
    gc: float      # MPa*mm
    cost: float    # N*mm
    test_id: str = ""

    def __post_init__(self):
        if not np.isfinite(self.cost):
            raise ValueError(f"cost must be finite, got {self.cost}")
        if self.cost < 0.0:
            raise ValueError(f"cost must be non-negative, got {self.cost}")


@dataclass(frozen=True)
class QuadraticSurface:
    """Fitted second-order surface with physical-unit coefficients p0..p5."""

    coeffs: np.ndarray = field(repr=False)  # (6,): p0, p1, p2, p3, p4, p5
    residual: float = 0.0                   # max |fit - sample| over the inputs
    hessian_definite: bool = False

    def evaluate(self, c_vvvv: float, gc: float) -> float:
        p = self.coeffs
        return float(
            p[0] + p[1] * c_vvvv + p[2] * gc
            + p[3] * c_vvvv**2 + p[4] * c_vvvv * gc + p[5] * gc**2
        )

    @property
    def hessian(self) -> np.ndarray:
        p = self.coeffs
        return np.array([[2.0 * p[3], p[4]], [p[4], 2.0 * p[5]]])


def fit_quadratic(samples: Sequence[CostSample]) -> QuadraticSurface:
    """Least-squares quadratic through >= 6 cost samples.

    Raises ValueError when fewer than 6 samples are given or the design
    matrix is rank deficient (collinear sample locations). Recovery is
    exact (residual at rounding level) when the samples lie on a
    quadratic.
    """
    if len(samples) < 6:
        raise ValueError(f"need at least 6 samples to fit a quadratic, got {len(samples)}")
    c = np.array([s.c_vvvv for s in samples])
    g = np.array([s.gc for s in samples])
    y = np.array([s.cost for s in samples])

    c0, g0 = c.mean(), g.mean()
    sc = np.ptp(c) or 1.0
    sg = np.ptp(g) or 1.0
    cs, gs = (c - c0) / sc, (g - g0) / sg

    design = np.column_stack([np.ones_like(cs), cs, gs, cs * cs, cs * gs, gs * gs])
    a, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 6:
        raise ValueError(f"design matrix is rank deficient (rank {rank}); samples are degenerate")

    # Undo the standardization: substitute C = (c - c0)/sc, G = (g - g0)/sg
    # and collect powers of the physical variables.
    p3 = a[3] / sc**2
    p4 = a[4] / (sc * sg)
    p5 = a[5] / sg**2
    p1 = a[1] / sc - 2.0 * a[3] * c0 / sc**2 - a[4] * g0 / (sc * sg)
    p2 = a[2] / sg - 2.0 * a[5] * g0 / sg**2 - a[4] * c0 / (sc * sg)
    p0 = (
        a[0] - a[1] * c0 / sc - a[2] * g0 / sg
        + a[3] * c0**2 / sc**2 + a[4] * c0 * g0 / (sc * sg) + a[5] * g0**2 / sg**2
    )
    coeffs = np.array([p0, p1, p2, p3, p4, p5])

    fitted = design @ a
    residual = float(np.max(np.abs(fitted - y))) if len(y) else 0.0
    definite = 2.0 * p3 > 0.0 and 4.0 * p3 * p5 - p4 * p4 > 0.0
    return QuadraticSurface(coeffs=coeffs, residual=residual, hessian_definite=definite)


def argmin(surface: QuadraticSurface) -> tuple[float, float]:
    """Stationary point of the surface; requires a positive definite Hessian.

    Raises NoMinimumError on an indefinite or singular Hessian, in which
    case the caller should widen its sampling grid.
    """
    if not surface.hessian_definite:
        raise NoMinimumError("fitted surface has no positive definite Hessian")
    p = surface.coeffs
    try:
        sol = np.linalg.solve(surface.hessian, -np.array([p[1], p[2]]))
    except np.linalg.LinAlgError as err:
        raise NoMinimumError(f"singular Hessian: {err}") from err
    return float(sol[0]), float(sol[1])
