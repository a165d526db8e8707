"""Comparison methods: linear CDF interpolation and nearest-neighbour pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DegenerateDataError
from ..patching import Cell, RegionMap
from ..statdist import StepCdf, empirical_cdf


@dataclass(frozen=True, eq=False)
class InterpolatedCdf:
    """CDF passing through ``(x_k, k/n)`` at the distinct order statistics.

    Linear between consecutive points, 0 below the smallest value and 1 from
    the largest value on.  It jumps by ``1/n`` at the minimum.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.breakpoints, self.values)
        out = np.where(t < self.breakpoints[0], 0.0, out)
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        """``lim_{s -> t-} F(s)``; differs from ``F(t)`` only at the minimum."""
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.breakpoints, self.values)
        return np.where(t <= self.breakpoints[0], 0.0, out)


def baseline_interpolation(observed) -> InterpolatedCdf:
    steps = empirical_cdf(observed)
    if steps.breakpoints.size < 2:
        raise DegenerateDataError("interpolation baseline needs at least 2 distinct values")
    return InterpolatedCdf(steps.breakpoints, steps.values)


def baseline_nearest_neighbor(region_map: RegionMap, p: Cell) -> StepCdf:
    """Ecdf of the closest non-empty Chebyshev ring of cells around ``p``."""
    rows, cols = region_map.shape
    for radius in range(1, max(rows, cols)):
        ring = region_map.ring(p, radius)
        pooled = region_map.pooled(ring)
        if pooled.size:
            return empirical_cdf(pooled)
    raise DataError("no samples anywhere on the map besides the target cell")
