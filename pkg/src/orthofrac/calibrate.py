"""Iterative grid-refinement calibration of (C_VVVV, G_c) per test.

Each test id gets its own multi-round loop: sample the cost on a small
grid, fit the quadratic surface, jump to its analytic minimum, then
shrink the range around that point and repeat (grids 3x3, 3x3, 5x5 by
default). The per-test optima are finally combined by arithmetic mean.

Simulator evaluations within one round are independent and may fan out
to a thread pool; failed evaluations are recorded and the round carries
on as long as enough samples survive for the fit.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .response_surface import (
    CostSample,
    NoMinimumError,
    QuadraticSurface,
    argmin,
    fit_quadratic,
)

log = logging.getLogger(__name__)

# evaluator(test_id, c_vvvv, gc) -> cost in N*mm
CostEvaluator = Callable[[str, float, float], float]


@dataclass(frozen=True)
class GridRound:
    """Everything one refinement round saw and concluded."""

    index: int
    c_range: tuple[float, float]
    g_range: tuple[float, float]
    samples: list[CostSample] = field(repr=False)
    failures: list[tuple[float, float, str]] = field(repr=False)
    surface: QuadraticSurface | None
    optimum: tuple[float, float]
    inside_box: bool


@dataclass(frozen=True)
class TestCalibration:
    test_id: str
    rounds: list[GridRound] = field(repr=False)
    c_vvvv: float = 0.0
    gc: float = 0.0
    flagged: bool = False


@dataclass(frozen=True)
class CalibrationResult:
    per_test: dict[str, TestCalibration]
    c_vvvv: float
    gc: float
    flagged: bool


def average_optima(per_test: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Arithmetic mean of per-test optima."""
    arr = np.asarray(per_test, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError("need a non-empty sequence of (C_VVVV, G_c) pairs")
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


def _evaluate_grid(
    test_id: str,
    evaluator: CostEvaluator,
    c_values: np.ndarray,
    g_values: np.ndarray,
    workers: int,
) -> tuple[list[CostSample], list[tuple[float, float, str]]]:
    points = [(c, g) for c in c_values for g in g_values]

    def run(point):
        c, g = point
        try:
            return CostSample(c_vvvv=float(c), gc=float(g), cost=float(evaluator(test_id, c, g)), test_id=test_id)
        except Exception as err:  # recorded, not fatal: the round may survive
            return (float(c), float(g), f"{type(err).__name__}: {err}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, points))
    else:
        results = [run(p) for p in points]

    samples = [r for r in results if isinstance(r, CostSample)]
    failures = [r for r in results if not isinstance(r, CostSample)]
    return samples, failures


def _shrunk_range(current: tuple[float, float], center: float, shrink: float) -> tuple[float, float]:
    """Shrink a range around a center, sliding to stay inside the current range."""
    lo, hi = current
    width = (hi - lo) * shrink
    new_lo = center - 0.5 * width
    new_lo = min(max(new_lo, lo), hi - width)
    return new_lo, new_lo + width


def _calibrate_one(
    test_id: str,
    evaluator: CostEvaluator,
    c_range: tuple[float, float],
    g_range: tuple[float, float],
    grids: Sequence[int],
    shrink: float,
    workers: int,
) -> TestCalibration:
    rounds: list[GridRound] = []
    flagged = False
    optimum = (0.5 * sum(c_range), 0.5 * sum(g_range))

    for i, n in enumerate(grids):
        final = i == len(grids) - 1
        widened = False
        while True:
            c_values = np.linspace(c_range[0], c_range[1], n)
            g_values = np.linspace(g_range[0], g_range[1], n)
            samples, failures = _evaluate_grid(test_id, evaluator, c_values, g_values, workers)
            for c, g, msg in failures:
                log.warning("%s: sample (%.6g, %.6g) failed: %s", test_id, c, g, msg)
            if len(samples) < 6:
                raise RuntimeError(
                    f"{test_id}: round {i + 1} kept only {len(samples)} of "
                    f"{n * n} samples; cannot fit the surface"
                )
            surface = fit_quadratic(samples)
            try:
                optimum = argmin(surface)
            except NoMinimumError:
                best = min(samples, key=lambda s: s.cost)
                if not widened:
                    # Widen once around the best sample and retry this round.
                    widened = True
                    log.warning(
                        "%s: round %d surface has no minimum; widening the grid", test_id, i + 1
                    )
                    c_range = _widened_range(c_range, best.c_vvvv)
                    g_range = _widened_range(g_range, best.gc)
                    continue
                optimum = (best.c_vvvv, best.gc)
                flagged = True
                log.warning(
                    "%s: round %d still has no interior minimum; falling back to the "
                    "best sampled point", test_id, i + 1,
                )
            inside = (
                c_range[0] <= optimum[0] <= c_range[1]
                and g_range[0] <= optimum[1] <= g_range[1]
            )
            if final and not inside:
                flagged = True
                log.warning(
                    "%s: final-round optimum (%.6g, %.6g) lies outside the sampled box",
                    test_id, optimum[0], optimum[1],
                )
            rounds.append(
                GridRound(
                    index=i + 1,
                    c_range=c_range,
                    g_range=g_range,
                    samples=samples,
                    failures=failures,
                    surface=surface,
                    optimum=optimum,
                    inside_box=inside,
                )
            )
            break
        if not final:
            c_range = _shrunk_range(c_range, optimum[0], shrink)
            g_range = _shrunk_range(g_range, optimum[1], shrink)

    return TestCalibration(
        test_id=test_id,
        rounds=rounds,
        c_vvvv=optimum[0],
        gc=optimum[1],
        flagged=flagged,
    )


def _widened_range(current: tuple[float, float], center: float) -> tuple[float, float]:
    width = current[1] - current[0]
    return center - width, center + width


def calibrate(
    test_ids: Sequence[str],
    evaluator: CostEvaluator,
    c_range: tuple[float, float],
    g_range: tuple[float, float],
    grids: Sequence[int] = (3, 3, 5),
    shrink: float = 0.5,
    workers: int = 1,
) -> CalibrationResult:
    """Run the full per-test grid-refinement loop and average the optima.

    Parameters
    ----------
    test_ids : sequence of str
        Independent experiments to calibrate against.
    evaluator : callable
        ``evaluator(test_id, c_vvvv, gc) -> cost``; exceptions from
        individual evaluations are recorded as failed samples.
    c_range, g_range : (float, float)
        Initial parameter ranges (MPa and MPa*mm).
    grids : sequence of int
        Grid edge length per round.
    shrink : float
        Range contraction per axis between rounds, in (0, 1].
    workers : int
        Thread count for simulator fan-out within a round.
    """
    if not test_ids:
        raise ValueError("need at least one test id")
    if not 0.0 < shrink <= 1.0:
        raise ValueError(f"shrink factor must be in (0, 1], got {shrink}")
    if c_range[0] >= c_range[1] or g_range[0] >= g_range[1]:
        raise ValueError("parameter ranges must be non-empty intervals")
    if any(n < 2 for n in grids) or len(grids) == 0:
        raise ValueError(f"grid sizes must each be >= 2, got {grids}")

    per_test = {
        test_id: _calibrate_one(test_id, evaluator, c_range, g_range, grids, shrink, workers)
        for test_id in test_ids
    }
    c_star, g_star = average_optima([(t.c_vvvv, t.gc) for t in per_test.values()])
    return CalibrationResult(
        per_test=per_test,
        c_vvvv=c_star,
        gc=g_star,
        flagged=any(t.flagged for t in per_test.values()),
    )
