"""Regionization of the map and KR-distance patch search.

A region ``p`` holding too few samples is patched by searching the whole
searchable area for the region ``q`` whose pooled neighbourhood
distribution is closest (KR distance, unit weight) to that of ``p``, then
copying a portion of ``q``'s own samples, sized by the environmental
similarity factor ``alpha_pq``, into ``p``.  Each donor is used once.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ColdStartError, ConfigError, NoProgressError
from .statdist import StepCdf, empirical_cdf, kr_distance
from .traces import Sample

Cell = tuple[int, int]

EARTH_RADIUS_M = 6_371_008.8
# absorbs float noise when an extent is an exact multiple of the cell size
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell_m: float

    def __post_init__(self):
        if not self.cell_m > 0:
            raise ConfigError(f"cell_m must be > 0, got {self.cell_m}")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ConfigError("grid bounding box has zero or negative area")
        if not (-90 <= self.lat_min and self.lat_max <= 90
                and -180 <= self.lon_min and self.lon_max <= 180):
            raise ConfigError("grid bounding box outside valid lat/lon range")

    @classmethod
    def around(cls, lat: float, lon: float, width_m: float, height_m: float,
               cell_m: float) -> GridSpec:
        """Box of the given metric size centred on ``(lat, lon)``."""
        dlat = math.degrees(height_m / EARTH_RADIUS_M)
        dlon = math.degrees(width_m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
        return cls(lat - dlat / 2, lat + dlat / 2, lon - dlon / 2, lon + dlon / 2, cell_m)

    @classmethod
    def from_dict(cls, doc: Mapping) -> GridSpec:
        try:
            return cls(*(float(doc[k]) for k in ("lat_min", "lat_max", "lon_min", "lon_max", "cell_m")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed grid config: {exc}") from exc

    def to_dict(self) -> dict:
        return {"lat_min": self.lat_min, "lat_max": self.lat_max, "lon_min": self.lon_min,
                "lon_max": self.lon_max, "cell_m": self.cell_m}

    @property
    def _m_per_deg_lat(self) -> float:
        return EARTH_RADIUS_M * math.pi / 180.0

    @property
    def _m_per_deg_lon(self) -> float:
        mid = math.radians(0.5 * (self.lat_min + self.lat_max))
        return self._m_per_deg_lat * math.cos(mid)

    @property
    def width_m(self) -> float:
        return (self.lon_max - self.lon_min) * self._m_per_deg_lon

    @property
    def height_m(self) -> float:
        return (self.lat_max - self.lat_min) * self._m_per_deg_lat

    @property
    def shape(self) -> tuple[int, int]:
        rows = max(1, math.ceil(self.height_m / self.cell_m - _CEIL_SLACK))
        cols = max(1, math.ceil(self.width_m / self.cell_m - _CEIL_SLACK))
        return rows, cols

    def project(self, lat, lon) -> tuple[np.ndarray, np.ndarray]:
        """Equirectangular (x east, y north) metres from the south-west corner."""
        x = (np.asarray(lon, float) - self.lon_min) * self._m_per_deg_lon
        y = (np.asarray(lat, float) - self.lat_min) * self._m_per_deg_lat
        return x, y

    def contains(self, lat, lon) -> np.ndarray:
        lat, lon = np.asarray(lat, float), np.asarray(lon, float)
        return (lat >= self.lat_min) & (lat <= self.lat_max) & (lon >= self.lon_min) & (lon <= self.lon_max)

    def cell_index(self, lat, lon) -> tuple[np.ndarray, np.ndarray]:
        """Row/col of in-box points; cells are lower-inclusive, the far edge folds inward."""
        rows, cols = self.shape
        x, y = self.project(lat, lon)
        r = np.clip(np.floor(y / self.cell_m).astype(int), 0, rows - 1)
        c = np.clip(np.floor(x / self.cell_m).astype(int), 0, cols - 1)
        return r, c

    def center_m(self, cell: Cell) -> tuple[float, float]:
        r, c = cell
        return (c + 0.5) * self.cell_m, (r + 0.5) * self.cell_m

    def center_latlon(self, cell: Cell) -> tuple[float, float]:
        x, y = self.center_m(cell)
        return self.lat_min + y / self._m_per_deg_lat, self.lon_min + x / self._m_per_deg_lon


@dataclass
class RegionMap:
    """Per-cell original sample sets plus the results of any patching."""

    spec: GridSpec
    cells: dict[Cell, np.ndarray]
    dropped: int = 0
    patched: dict[Cell, PatchResult] = field(default_factory=dict)
    _aug_cache: dict[Cell, StepCdf | None] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        rows, cols = self.spec.shape
        full = {(r, c): np.empty(0) for r in range(rows) for c in range(cols)}
        for cell, values in self.cells.items():
            if cell not in full:
                raise ConfigError(f"cell {cell} outside the {rows}x{cols} grid")
            arr = np.asarray(values, dtype=float).ravel().copy()
            arr.flags.writeable = False
            full[cell] = arr
        self.cells = full

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    def all_cells(self) -> list[Cell]:
        return sorted(self.cells)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self.cells

    def _require(self, cell: Cell) -> Cell:
        cell = (int(cell[0]), int(cell[1]))
        if cell not in self.cells:
            raise ValueError(f"cell {cell} is not on the grid")
        return cell

    def count(self, cell: Cell) -> int:
        return self.cells[self._require(cell)].size

    def ring(self, p: Cell, radius: int) -> list[Cell]:
        """Cells at Chebyshev distance exactly ``radius`` from ``p``."""
        r0, c0 = self._require(p)
        out = []
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) == radius and (r0 + dr, c0 + dc) in self.cells:
                    out.append((r0 + dr, c0 + dc))
        return out

    def neighbors(self, p: Cell) -> list[Cell]:
        return self.ring(p, 1)

    def pooled(self, cells: Iterable[Cell]) -> np.ndarray:
        parts = [self.cells[c] for c in cells]
        return np.concatenate(parts) if parts else np.empty(0)

    def universe(self) -> np.ndarray:
        """All original samples, i.e. the disjoint union of every cell."""
        return self.pooled(self.all_cells())

    def augmented_cdf(self, q: Cell) -> StepCdf | None:
        """Ecdf of ``q``'s samples together with its neighbours'; None when empty."""
        q = self._require(q)
        if q not in self._aug_cache:
            pooled = self.pooled([q, *self.neighbors(q)])
            self._aug_cache[q] = empirical_cdf(pooled) if pooled.size else None
        return self._aug_cache[q]

    def patched_samples(self, p: Cell) -> np.ndarray:
        p = self._require(p)
        return self.patched[p].samples if p in self.patched else self.cells[p]


def assign_regions(samples: Sequence[Sample], spec: GridSpec) -> RegionMap:
    """Bin samples into grid cells; out-of-box samples are dropped and counted."""
    lat = np.fromiter((s.lat for s in samples), float, len(samples))
    lon = np.fromiter((s.lon for s in samples), float, len(samples))
    rtt = np.fromiter((s.rtt_ms for s in samples), float, len(samples))
    inside = spec.contains(lat, lon)
    rows, cols = spec.cell_index(lat[inside], lon[inside])
    rtt = rtt[inside]
    cells: dict[Cell, list[float]] = {}
    for r, c, v in zip(rows.tolist(), cols.tolist(), rtt.tolist()):
        cells.setdefault((r, c), []).append(v)
    return RegionMap(spec, {k: np.asarray(v) for k, v in cells.items()},
                     dropped=int((~inside).sum()))


def neighbor_union(region_map: RegionMap, p: Cell) -> np.ndarray:
    """Samples of the (up to 8) Moore neighbours of ``p``, excluding ``p`` itself."""
    return region_map.pooled(region_map.neighbors(p))


def restrict_search_area(region_map: RegionMap, p: Cell, radius_m: float) -> set[Cell]:
    """Cells whose centres lie within ``radius_m`` of ``p``'s centre, excluding ``p``."""
    if radius_m < 0:
        raise ValueError("radius_m must be >= 0")
    p = region_map._require(p)
    px, py = region_map.spec.center_m(p)
    out = set()
    for q in region_map.cells:
        if q == p:
            continue
        qx, qy = region_map.spec.center_m(q)
        if math.hypot(qx - px, qy - py) <= radius_m:
            out.add(q)
    return out


class Candidate(NamedTuple):
    cell: Cell
    kr: float


def find_candidate(region_map: RegionMap, p: Cell, searchable: Iterable[Cell]) -> Candidate | None:
    """Searchable cell whose neighbourhood ecdf is KR-closest to ``p``'s.

    Ties go to the lexicographically smaller ``(row, col)``.
    """
    p = region_map._require(p)
    target = region_map.augmented_cdf(p)
    if target is None:
        raise ColdStartError(f"cell {p} and all of its neighbours are empty")
    best = None
    for q in sorted(region_map._require(c) for c in searchable):
        if q == p:
            continue
        cand = region_map.augmented_cdf(q)
        if cand is None:
            continue
        d = kr_distance(target, cand)
        if best is None or d < best.kr:
            best = Candidate(q, d)
    return best


@dataclass(frozen=True)
class PatchConfig:
    M: int = 500
    alpha_default: float = 1.0
    alpha: Mapping[tuple[Cell, Cell], float] = field(default_factory=dict)
    search_radius_m: float | None = None
    max_rounds: int = 8

    def __post_init__(self):
        if self.M < 0:
            raise ConfigError("M must be >= 0")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.search_radius_m is not None and self.search_radius_m < 0:
            raise ConfigError("search_radius_m must be >= 0")
        for a in (self.alpha_default, *self.alpha.values()):
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"alpha must lie in [0, 1], got {a}")

    def alpha_for(self, p: Cell, q: Cell) -> float:
        return self.alpha.get((tuple(p), tuple(q)), self.alpha_default)

    @classmethod
    def from_dict(cls, doc: Mapping) -> PatchConfig:
        try:
            alpha = {
                (tuple(e["p"]), tuple(e["q"])): float(e["value"])
                for e in doc.get("alpha", [])
            }
            radius = doc.get("search_radius_m")
            return cls(
                M=int(doc.get("M", 500)),
                alpha_default=float(doc.get("alpha_default", 1.0)),
                alpha=alpha,
                search_radius_m=None if radius is None else float(radius),
                max_rounds=int(doc.get("max_rounds", 8)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed patch config: {exc}") from exc


def load_patch_config(text: str) -> tuple[GridSpec, PatchConfig]:
    """Parse ``{"grid": {...}, "patch": {...}}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if "grid" not in doc:
        raise ConfigError("config lacks a 'grid' section")
    return GridSpec.from_dict(doc["grid"]), PatchConfig.from_dict(doc.get("patch", {}))


class ProvenanceEntry(NamedTuple):
    round: int
    donor: Cell
    donated: int
    kr_value: float


@dataclass(frozen=True, eq=False)
class PatchResult:
    cell: Cell
    samples: np.ndarray
    donors: np.ndarray  # (n, 2) donor cell per sample; (-1, -1) marks an original
    log: tuple[ProvenanceEntry, ...]

    @property
    def duplicated(self) -> np.ndarray:
        return self.donors[:, 0] >= 0


def patch_region(region_map: RegionMap, p: Cell, cfg: PatchConfig, seed: int) -> PatchResult:
    """Patch an under-sampled region with portions of its KR-closest regions.

    Regions with more than ``M`` samples are returned unchanged.  Otherwise
    each round picks the best remaining donor, copies
    ``ceil(alpha * |donor|)`` of its samples (uniformly, without
    replacement) and retires the donor, until ``p`` holds more than ``M``
    samples, the candidates run out, or ``max_rounds`` is reached.
    """
    p = region_map._require(p)
    own = region_map.cells[p]
    parts = [own]
    donors = [np.full((own.size, 2), -1, dtype=int)]
    log: list[ProvenanceEntry] = []

    if own.size <= cfg.M:
        if cfg.search_radius_m is None:
            searchable = set(region_map.cells) - {p}
        else:
            searchable = restrict_search_area(region_map, p, cfg.search_radius_m)
        # a cell with no samples of its own has nothing to donate
        searchable = {q for q in searchable if region_map.cells[q].size}
        rng = np.random.default_rng(seed)
        size = own.size
        found_any = False
        for rnd in range(1, cfg.max_rounds + 1):
            if size > cfg.M or not searchable:
                break
            cand = find_candidate(region_map, p, searchable)
            if cand is None:
                break
            found_any = True
            q = cand.cell
            searchable.discard(q)
            pool = region_map.cells[q]
            k = min(pool.size, math.ceil(cfg.alpha_for(p, q) * pool.size))
            if k == 0:
                continue
            picked = rng.choice(pool.size, size=k, replace=False)
            parts.append(pool[picked])
            donors.append(np.tile(np.array(q, dtype=int), (k, 1)))
            log.append(ProvenanceEntry(rnd, q, k, cand.kr))
            size += k
        if found_any and not log:
            raise NoProgressError(f"every candidate for {p} resolved to a zero-size portion")

    result = PatchResult(p, np.concatenate(parts), np.concatenate(donors), tuple(log))
    region_map.patched[p] = result
    return result


def format_provenance(log: Sequence[ProvenanceEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "donor_row", "donor_col", "donated", "kr_value"])
    for e in log:
        w.writerow([e.round, e.donor[0], e.donor[1], e.donated, repr(float(e.kr_value))])
    return buf.getvalue()
