"""Empirical distributions, the weighted KR distance and Gaussian KDE.

The KR distance between two CDFs is ``integral w(t) |F(t) - G(t)| dt``. Both
empirical CDFs and the weight function are piecewise constant, so the
integral is evaluated exactly on the merged partition of their breakpoints.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyTraceError, InsufficientDataError

log = logging.getLogger(__name__)

MIN_GRID_POINTS = 512
MAX_GRID_POINTS = 1 << 16
# kernels are truncated this many bandwidths past the data
KDE_REACH = 4.0
# Silverman widths below this (ms) are treated as zero-variance input
MIN_AUTO_BANDWIDTH = 1e-9


@dataclass(frozen=True, eq=False)
class StepCdf:
    """Right-continuous step CDF: ``F(t)`` is the value at the last breakpoint <= t."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.shape != v.shape or b.size == 0:
            raise ValueError("breakpoints and values must be equal-length, non-empty 1-D arrays")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0) or v[0] <= 0 or v[-1] != 1.0:
            raise ValueError("values must be non-decreasing in (0, 1] and end at 1")
        b.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="right")
        padded = np.concatenate(([0.0], self.values))
        out = padded[idx]
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> StepCdf:
        return cls(np.asarray(doc["breakpoints"], float), np.asarray(doc["values"], float))


@dataclass(frozen=True)
class WeightFunction:
    """Piecewise-constant weight; ``pieces`` are ``((a, b), weight)`` on [a, b)."""

    pieces: tuple[tuple[tuple[float, float], float], ...] = (((0.0, math.inf), 1.0),)

    def __post_init__(self):
        pieces = tuple(((float(a), float(b)), float(w)) for (a, b), w in self.pieces)
        prev_end = -math.inf
        for (a, b), w in pieces:
            if not a < b:
                raise ValueError(f"empty interval [{a}, {b})")
            if a < prev_end:
                raise ValueError("weight intervals must be disjoint and ordered")
            if not (w >= 0 and math.isfinite(w)):
                raise ValueError(f"weights must be finite and >= 0, got {w}")
            prev_end = b
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, weight: float = 1.0) -> WeightFunction:
        return cls((((0.0, math.inf), weight),))

    @classmethod
    def window(cls, lo: float, hi: float, weight: float = 1.0) -> WeightFunction:
        return cls((((lo, hi), weight),))

    def scaled(self, c: float) -> WeightFunction:
        return WeightFunction(tuple((iv, w * c) for iv, w in self.pieces))

    def endpoints(self) -> np.ndarray:
        pts = [x for (a, b), _ in self.pieces for x in (a, b) if math.isfinite(x)]
        return np.asarray(pts, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for (a, b), w in self.pieces:
            out[(t >= a) & (t < b)] = w
        return float(out) if out.ndim == 0 else out


UNIT_WEIGHT = WeightFunction()


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def local_maxima(self, rel_height: float = 0.0) -> np.ndarray:
        """Grid locations of strict interior local maxima above ``rel_height * max``."""
        d = self.density
        inner = (d[1:-1] > d[:-2]) & (d[1:-1] >= d[2:]) & (d[1:-1] > rel_height * d.max())
        return self.grid[1:-1][inner]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "density": self.density.tolist(),
            "bandwidth": self.bandwidth,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def empirical_cdf(samples: Sequence[float] | np.ndarray) -> StepCdf:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyTraceError("empirical CDF needs at least one sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    x = np.sort(x)
    breaks, first = np.unique(x, return_index=True)
    # count <= breakpoint is the index where the next distinct value starts
    counts = np.append(first[1:], x.size)
    values = counts / x.size
    values[-1] = 1.0
    return StepCdf(breaks, values)


def _eval_on(cdf, left: np.ndarray) -> np.ndarray:
    if isinstance(cdf, StepCdf):
        idx = np.searchsorted(cdf.breakpoints, left, side="right")
        return np.concatenate(([0.0], cdf.values))[idx]
    return np.asarray(cdf(left), dtype=float)


def kr_distance(f: StepCdf, g: StepCdf, w: WeightFunction = UNIT_WEIGHT) -> float:
    """Exact weighted KR distance between two step CDFs.

    ``g`` may also be any CDF object exposing ``breakpoints`` and a
    vectorised ``__call__`` that is linear between consecutive breakpoints
    (see :class:`lami.harness.baselines.InterpolatedCdf`); such pieces are
    integrated exactly as well.
    """
    pts = np.unique(np.concatenate((f.breakpoints, g.breakpoints, w.endpoints())))
    if pts.size < 2:
        return 0.0
    left, right = pts[:-1], pts[1:]
    width = right - left
    weight = np.asarray(w(left), dtype=float)
    fa = _eval_on(f, left)
    if isinstance(g, StepCdf):
        return float(np.sum(width * weight * np.abs(fa - _eval_on(g, left))))
    # g linear on [left, right): integrate |c - (a + s u)| exactly
    ga = _eval_on(g, left)
    gb = np.asarray(g.left_limit(right), dtype=float)
    return float(np.sum(width * weight * _mean_abs_linear(fa - ga, fa - gb)))


def _mean_abs_linear(d0: np.ndarray, d1: np.ndarray) -> np.ndarray:
    """Average of |d| over a segment where d moves linearly from d0 to d1."""
    same = d0 * d1 >= 0
    out = np.where(same, 0.5 * (np.abs(d0) + np.abs(d1)), 0.0)
    cross = ~same
    a, b = np.abs(d0[cross]), np.abs(d1[cross])
    out[cross] = 0.5 * (a * a + b * b) / (a + b)
    return out


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)


def kde_pdf(
    samples: Sequence[float] | np.ndarray,
    bandwidth: float | str = "auto",
    grid_points: int = MIN_GRID_POINTS,
) -> DensityCurve:
    """Gaussian-kernel density of RTT samples on an even grid.

    ``bandwidth`` is a fixed width in ms or ``"auto"`` for Silverman's rule.
    Kernels are reflected at 0 ms whenever the grid would otherwise extend
    below zero, so no mass leaks onto negative latencies.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyTraceError("KDE needs at least one sample")
    if bandwidth == "auto":
        if x.size < 2:
            raise InsufficientDataError("automatic bandwidth needs at least 2 samples")
        h = silverman_bandwidth(x)
        if not h > MIN_AUTO_BANDWIDTH:
            log.warning("zero-variance input; falling back to a fixed 1 ms bandwidth")
            h = 1.0
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be > 0, got {h}")

    lo = float(x.min()) - KDE_REACH * h
    reflect = lo < 0
    lo = max(0.0, lo)
    hi = float(x.max()) + KDE_REACH * h
    n_pts = int(min(MAX_GRID_POINTS, max(grid_points, math.ceil(5 * (hi - lo) / h) + 1)))
    grid = np.linspace(lo, hi, n_pts)

    dens = np.zeros(n_pts)
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    # chunk to bound the (chunk x grid) temporary
    step = max(1, 4_000_000 // n_pts)
    for i in range(0, x.size, step):
        xi = x[i:i + step, None]
        dens += np.exp(-0.5 * ((grid[None, :] - xi) / h) ** 2).sum(axis=0)
        if reflect:
            dens += np.exp(-0.5 * ((grid[None, :] + xi) / h) ** 2).sum(axis=0)
    return DensityCurve(grid, dens * norm, h)
