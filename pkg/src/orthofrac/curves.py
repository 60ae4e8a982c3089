"""Load-deflection curve handling: smoothing, normalization, averaging, cost.

Experimental repetitions are smoothed, normalized to their peak,
shifted so the test starts where the force becomes and remains
positive, resampled on a common normalized grid and averaged; the
average is rescaled by the arithmetic means of the individual peak
factors. The calibration cost between two curves is the area between
them over their common displacement domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LoadDeflectionCurve:
    """Ordered (displacement, force) samples of one test or simulation.

    displacement mm (strictly increasing), force N; ``label`` carries the
    repetition or run id for provenance.
    """

    displacement: np.ndarray = field(repr=False)
    force: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        u = np.asarray(self.displacement, dtype=float)
        f = np.asarray(self.force, dtype=float)
        if u.ndim != 1 or u.shape != f.shape:
            raise ValueError("displacement and force must be 1-d arrays of equal length")
        if u.size < 2:
            raise ValueError("curve needs at least two samples")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(f))):
            raise ValueError("curve contains non-finite samples")
        if np.any(np.diff(u) <= 0.0):
            raise ValueError("displacement samples must be strictly increasing")
        object.__setattr__(self, "displacement", u)
        object.__setattr__(self, "force", f)

    @property
    def peak(self) -> tuple[float, float]:
        """(displacement, force) at the maximum force (first index on ties)."""
        i = int(np.argmax(self.force))
        return float(self.displacement[i]), float(self.force[i])

    def __len__(self) -> int:
        return self.displacement.size


@dataclass(frozen=True)
class NormalizedCurve:
    """A curve in peak-normalized coordinates plus its peak factors."""

    curve: LoadDeflectionCurve
    u_scale: float  # mm, peak displacement of the original curve
    f_scale: float  # N, peak force of the original curve


@dataclass(frozen=True)
class AveragedCurve:
    """Mean of normalized repetitions on an equidistant normalized grid."""

    grid: np.ndarray = field(repr=False)
    mean_force: np.ndarray = field(repr=False)
    u_scale: float = 1.0  # arithmetic mean of the individual peak displacements, mm
    f_scale: float = 1.0  # arithmetic mean of the individual peak forces, N

    def rescaled(self) -> LoadDeflectionCurve:
        """The average back in physical units (mm, N)."""
        return LoadDeflectionCurve(
            self.grid * self.u_scale, self.mean_force * self.f_scale, label="average"
        )


def smooth(curve: LoadDeflectionCurve, window: int = 11) -> LoadDeflectionCurve:
    """Centered moving average; endpoints use shrunken symmetric windows.

    ``window`` must be odd, >= 1 and no larger than the sample count.
    Sample count and abscissae are preserved.
    """
    n = len(curve)
    if window < 1 or window % 2 == 0 or window > n:
        raise ValueError(f"window must be odd and in [1, {n}], got {window}")
    half = window // 2
    f = curve.force
    out = np.empty_like(f)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = np.mean(f[i - h : i + h + 1])
    return LoadDeflectionCurve(curve.displacement, out, label=curve.label)


def normalize_and_shift(curve: LoadDeflectionCurve) -> NormalizedCurve:
    """Peak-normalize a curve and move its origin to the test start.

    Both axes are divided by their peak values; the origin is then
    shifted to the last sample before the normalized force becomes and
    remains positive, and earlier samples are dropped. Raises on a
    non-positive peak force.
    """
    u_peak, f_peak = curve.peak
    if f_peak <= 0.0 or u_peak <= 0.0:
        raise ValueError("curve has no positive peak to normalize by")
    u = curve.displacement / u_peak
    f = curve.force / f_peak
    # Last non-positive sample ahead of the peak: the force becomes and
    # remains positive right after it. The post-peak tail is irrelevant.
    i_peak = int(np.argmax(f))
    nonpos = np.nonzero(f[:i_peak] <= 0.0)[0]
    origin = int(nonpos[-1]) if nonpos.size else 0
    if origin >= len(curve) - 1:
        raise ValueError("force never becomes and remains positive")
    u = u[origin:] - u[origin]
    f = f[origin:]
    return NormalizedCurve(
        LoadDeflectionCurve(u, f, label=curve.label), u_peak, f_peak
    )


def average_repetitions(
    normalized: Sequence[NormalizedCurve], grid_step: float = 0.005
) -> AveragedCurve:
    """Resample normalized repetitions on a common grid and average.

    The grid runs from 0 to the shortest normalized extent among the
    inputs (domain-intersection rule) in steps of ``grid_step``; forces
    are linearly interpolated, averaged pointwise, and the peak factors
    are combined by arithmetic mean.
    """
    if not normalized:
        raise ValueError("need at least one normalized curve")
    if grid_step <= 0.0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    end = min(nc.curve.displacement[-1] for nc in normalized)
    n_steps = int(np.floor(end / grid_step + 1e-12))
    if n_steps < 1:
        raise ValueError("common normalized domain is empty")
    grid = np.arange(n_steps + 1) * grid_step
    stack = np.stack(
        [np.interp(grid, nc.curve.displacement, nc.curve.force) for nc in normalized]
    )
    return AveragedCurve(
        grid=grid,
        mean_force=stack.mean(axis=0),
        u_scale=float(np.mean([nc.u_scale for nc in normalized])),
        f_scale=float(np.mean([nc.f_scale for nc in normalized])),
    )


def cost(num: LoadDeflectionCurve, exp) -> float:
    """Area between two curves over their common displacement domain, N*mm.

    Both curves are linearly interpolated on the union of their sample
    abscissae restricted to the overlap; the absolute force difference
    is integrated with the trapezoid rule. ``exp`` may be a raw curve or
    an averaged curve (rescaled to physical units internally).
    """
    if hasattr(exp, "rescaled"):
        exp = exp.rescaled()
    lo = max(num.displacement[0], exp.displacement[0])
    hi = min(num.displacement[-1], exp.displacement[-1])
    if hi <= lo:
        raise ValueError("curves have no overlapping displacement domain")
    absc = np.union1d(num.displacement, exp.displacement)
    absc = absc[(absc >= lo) & (absc <= hi)]
    absc = np.union1d(absc, [lo, hi])
    f_num = np.interp(absc, num.displacement, num.force)
    f_exp = np.interp(absc, exp.displacement, exp.force)
    return float(np.trapezoid(np.abs(f_num - f_exp), absc))
