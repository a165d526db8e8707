"""Synthetic campus: a grid whose cells carry known latency mixtures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from ..patching import Cell, GridSpec, RegionMap
from ..statdist import StepCdf, empirical_cdf
from ..traces import DEFAULT_GMM, DEFAULT_ORIGIN, GmmSpec, Sample

TRUTH_DRAWS = 50_000


@dataclass(frozen=True)
class SyntheticCampus:
    grid: GridSpec
    palette: Mapping[str, GmmSpec]
    layout: Mapping[Cell, str]  # cell -> palette key
    counts: Mapping[Cell, int]  # observed samples per cell; missing means 0
    target: Cell | None = None

    def __post_init__(self):
        rows, cols = self.grid.shape
        for cell in ((r, c) for r in range(rows) for c in range(cols)):
            if self.layout.get(cell) not in self.palette:
                raise ConfigError(f"cell {cell} has no true spec")
        if any(n < 0 for n in self.counts.values()):
            raise ConfigError("observed counts must be >= 0")

    def spec_of(self, cell: Cell) -> GmmSpec:
        return self.palette[self.layout[cell]]

    def observe(self, rng: np.random.Generator) -> RegionMap:
        """Draw every cell's observed samples; cells are visited in sorted order."""
        cells = {}
        for cell in sorted(self.layout):
            n = int(self.counts.get(cell, 0))
            cells[cell] = self.spec_of(cell).sample_rtt(n, rng)
        return RegionMap(self.grid, cells)

    def observe_samples(self, rng: np.random.Generator) -> list[Sample]:
        """Observed samples as located trace records (uniform positions inside each cell)."""
        out = []
        rows, cols = self.grid.shape
        lat_step = (self.grid.lat_max - self.grid.lat_min) * self.grid.cell_m / self.grid.height_m
        lon_step = (self.grid.lon_max - self.grid.lon_min) * self.grid.cell_m / self.grid.width_m
        t = 0
        for (r, c) in sorted(self.layout):
            n = int(self.counts.get((r, c), 0))
            rtt = self.spec_of((r, c)).sample_rtt(n, rng)
            lat0 = self.grid.lat_min + r * lat_step
            lon0 = self.grid.lon_min + c * lon_step
            lat_hi = min(lat0 + lat_step, self.grid.lat_max)
            lon_hi = min(lon0 + lon_step, self.grid.lon_max)
            lats = rng.uniform(lat0, lat_hi, n)
            lons = rng.uniform(lon0, lon_hi, n)
            for v, la, lo in zip(rtt, lats, lons):
                out.append(Sample(t, float(v), float(la), float(lo), None, "LTE"))
                t += 500
        return out

    def truth(self, cell: Cell, rng: np.random.Generator, n: int = TRUTH_DRAWS) -> StepCdf:
        return empirical_cdf(self.spec_of(cell).sample_rtt(n, rng))


# Palette for the clustered campus.  "lab" is the dual-mode default mixture;
# the others are chosen so that the lab's immediate ring pools into a
# distribution that differs from the lab's own.
CAMPUS_PALETTE = {
    "lab": DEFAULT_GMM,
    "fast": GmmSpec.of((1.0, 15.0, 4.0)),
    "slow": GmmSpec.of((1.0, 100.0, 10.0)),
    "congested": GmmSpec.of((0.5, 160.0, 20.0), (0.5, 230.0, 25.0)),
}


def clustered_campus(rows: int = 9, cols: int = 9, cell_m: float = 250.0,
                     count_seed: int = 7, mean_count: float = 100.0,
                     uniform: str | None = None) -> SyntheticCampus:
    """Build the reference campus used by the recovery and searchable-area runs.

    Layout (target ``T`` at row 4, column 2)::

        congested everywhere, except
        - a 3x3 ring around T alternating "fast" (edges) and "slow" (corners),
        - a "lab" block in rows 2-6, columns cols-3 .. cols-1 (far from T),
        - T itself, whose true spec is "lab" and which holds no samples.

    Observed counts are log-normal around ``mean_count`` (clipped to
    [20, 400]) to mimic the uneven sampling of a real campus.  With
    ``uniform`` set, every cell uses that palette entry instead.
    """
    if rows < 7 or cols < 8:
        raise ConfigError("clustered campus needs at least 7 rows and 8 columns")
    grid = GridSpec.around(*DEFAULT_ORIGIN, cols * cell_m, rows * cell_m, cell_m)
    target = (4, 2)
    layout: dict[Cell, str] = {}
    for r in range(rows):
        for c in range(cols):
            layout[(r, c)] = "congested"
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                kind = "slow" if dr and dc else "fast"
                layout[(target[0] + dr, target[1] + dc)] = kind
    for r in range(2, 7):
        for c in range(cols - 3, cols):
            layout[(r, c)] = "lab"
    layout[target] = "lab"
    if uniform is not None:
        layout = {cell: uniform for cell in layout}

    rng = np.random.default_rng(count_seed)
    counts = {}
    for cell in sorted(layout):
        counts[cell] = int(np.clip(round(mean_count * rng.lognormal(0.0, 0.5)), 20, 400))
    counts[target] = 0
    return SyntheticCampus(grid, dict(CAMPUS_PALETTE), layout, counts, target)
