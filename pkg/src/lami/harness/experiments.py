"""Seeded desk-scale experiments on synthetic ground truth.

Every experiment is a pure function of its configuration and seed list.
Within one seed all methods see the same truth draws and the same observed
draws (paired design), and every KR value comes from
:func:`lami.statdist.kr_distance`.
"""

from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..confidence import region_model
from ..errors import DataError
from ..patching import Cell, PatchConfig, RegionMap, neighbor_union, patch_region, restrict_search_area
from ..statdist import empirical_cdf, kr_distance
from ..traces import GmmSpec
from ..vae import VaeHyper, synthesize
from .baselines import baseline_interpolation, baseline_nearest_neighbor
from .campus import TRUTH_DRAWS, SyntheticCampus

METHODS = ("lami", "interpolation", "nearest")
DEFAULT_SEEDS = tuple(range(10))
N_GENERATED = 10_000
TRUTH_SEED = 2_147_483_647

EXPERIMENT_VAE = VaeHyper()
# M is lowered from the library default so that a zero-sample target is
# filled from a handful of donors rather than most of the map.
EXPERIMENT_PATCH = PatchConfig(M=300)


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(tag.encode())])


def _int_seed(seed: int, tag: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(tag.encode())]).generate_state(1)[0])


@dataclass
class ExperimentResult:
    """Per-series lists of ``(knob value, KR per seed)``."""

    label: str
    seeds: tuple[int, ...]
    series: dict[str, list[tuple[float, tuple[float, ...]]]] = field(default_factory=dict)
    curves: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, x: float, krs: Sequence[float]):
        if any(k < 0 for k in krs):
            raise ValueError("KR distances are non-negative")
        self.series.setdefault(name, []).append((float(x), tuple(float(k) for k in krs)))

    def means(self, name: str) -> np.ndarray:
        return np.array([np.mean(k) for _, k in self.series[name]])

    def per_seed(self, name: str, x: float | None = None) -> np.ndarray:
        pts = self.series[name]
        if x is None:
            if len(pts) != 1:
                raise ValueError(f"series {name!r} has {len(pts)} points; pass x")
            return np.array(pts[0][1])
        for px, k in pts:
            if px == x:
                return np.array(k)
        raise KeyError(x)

    def to_csv(self, name: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "kr_mean", "kr_std"])
        for x, k in sorted(self.series[name]):
            w.writerow([repr(x), repr(float(np.mean(k))), repr(float(np.std(k)))])
        return buf.getvalue()

    def curves_csv(self) -> str:
        names = [n for n in self.curves if n != "t"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *names])
        for i, t in enumerate(self.curves["t"]):
            w.writerow([repr(float(t)), *(repr(float(self.curves[n][i])) for n in names)])
        return buf.getvalue()


def experiment_sample_count(truth_spec: GmmSpec, counts: Sequence[int],
                            seeds: Sequence[int] = DEFAULT_SEEDS,
                            truth_seed: int = TRUTH_SEED) -> ExperimentResult:
    """KR between ``n``-sample ecdfs and a 50000-draw reference, per ``n``."""
    if list(counts) != sorted(counts):
        raise ValueError("counts must be ascending")
    truth = empirical_cdf(truth_spec.sample_rtt(TRUTH_DRAWS, np.random.default_rng(truth_seed)))
    result = ExperimentResult("fig4c", tuple(seeds))
    for n in counts:
        krs = [kr_distance(truth, empirical_cdf(truth_spec.sample_rtt(n, np.random.default_rng(s))))
               for s in seeds]
        result.add("ecdf", n, krs)
    return result


def vae_recover(observed, hyper: VaeHyper, seed: int, n_generated: int = N_GENERATED) -> np.ndarray:
    """Observed samples followed by VAE-generated ones."""
    h = VaeHyper(**{**hyper.__dict__, "seed": _int_seed(seed, "vae")})
    return synthesize(observed, n_generated, h, seed=_int_seed(seed, "vae-sample"))


def experiment_vae_vs_interpolation(truth_spec: GmmSpec, n_observed: Sequence[int],
                                    seeds: Sequence[int] = DEFAULT_SEEDS,
                                    hyper: VaeHyper = EXPERIMENT_VAE,
                                    n_generated: int = N_GENERATED) -> ExperimentResult:
    """VAE-recovered CDF against linear CDF interpolation from the same few samples."""
    truth = empirical_cdf(truth_spec.sample_rtt(TRUTH_DRAWS, np.random.default_rng(TRUTH_SEED)))
    result = ExperimentResult("fig6", tuple(seeds))
    for n in n_observed:
        vae_kr, interp_kr = [], []
        for s in seeds:
            obs = truth_spec.sample_rtt(n, _rng(s, f"observe-{n}"))
            recovered = vae_recover(obs, hyper, s, n_generated)
            vae_kr.append(kr_distance(truth, empirical_cdf(recovered)))
            interp_kr.append(kr_distance(truth, baseline_interpolation(obs)))
        result.add("vae", n, vae_kr)
        result.add("interpolation", n, interp_kr)
    return result


def lami_recover(region_map: RegionMap, target: Cell, cfg: PatchConfig, hyper: VaeHyper,
                 seed: int, n_generated: int = N_GENERATED) -> np.ndarray:
    """Patch, synthesise and return the target's final sample set."""
    patched = patch_region(region_map, target, cfg, _int_seed(seed, "patch"))
    samples = patched.samples
    if samples.size < 2:
        # nothing could be patched in: fall back to the neighbourhood
        samples = np.concatenate((samples, neighbor_union(region_map, target)))
    if samples.size < 2:
        raise DataError(f"no usable samples for cell {target}")
    final = vae_recover(samples, hyper, seed, n_generated)
    region_model(final)  # validates the final set the way the modeling stage would
    return final


def _curve_grid(truths) -> np.ndarray:
    hi = max(float(t.breakpoints[-1]) for t in truths)
    return np.linspace(0.0, hi, 601)


def experiment_recovery(campus: SyntheticCampus, target: Cell | None = None,
                        methods: Iterable[str] = METHODS,
                        seeds: Sequence[int] = DEFAULT_SEEDS,
                        cfg: PatchConfig = EXPERIMENT_PATCH,
                        hyper: VaeHyper = EXPERIMENT_VAE,
                        n_generated: int = N_GENERATED) -> ExperimentResult:
    """KR to truth of each recovery method for one target cell.

    Interpolation uses the target's own samples when it has at least two
    distinct values, otherwise its neighbourhood pool.
    """
    target = campus.target if target is None else target
    requested = set(methods)
    methods = [m for m in METHODS if m in requested]
    if requested - set(METHODS) or not methods:
        raise ValueError(f"methods must be a non-empty subset of {METHODS}")
    result = ExperimentResult("fig7", tuple(seeds))
    krs: dict[str, list[float]] = {m: [] for m in methods}
    diffs: dict[str, list[np.ndarray]] = {m: [] for m in methods}
    truths = []
    for s in seeds:
        region_map = campus.observe(_rng(s, "observe"))
        truth = campus.truth(target, _rng(s, "truth"))
        truths.append(truth)
        for m in methods:
            if m == "lami":
                cdf = empirical_cdf(lami_recover(region_map, target, cfg, hyper, s, n_generated))
            elif m == "nearest":
                cdf = baseline_nearest_neighbor(region_map, target)
            else:
                own = region_map.cells[target]
                pool = own if np.unique(own).size >= 2 else neighbor_union(region_map, target)
                cdf = baseline_interpolation(pool)
            krs[m].append(kr_distance(truth, cdf))
            diffs[m].append(cdf)
    x = float(campus.counts.get(target, 0))
    for m in methods:
        result.add(m, x, krs[m])
    grid = _curve_grid(truths)
    result.curves["t"] = grid
    for m in methods:
        result.curves[m] = np.mean(
            [np.abs(t(grid) - c(grid)) for t, c in zip(truths, diffs[m])], axis=0)
    return result


def experiment_searchable_area(campus: SyntheticCampus, radii_m: Sequence[float],
                               target: Cell | None = None,
                               seeds: Sequence[int] = DEFAULT_SEEDS,
                               cfg: PatchConfig = EXPERIMENT_PATCH,
                               hyper: VaeHyper = EXPERIMENT_VAE,
                               n_generated: int = N_GENERATED) -> ExperimentResult:
    """LaMI KR to truth as the donor search radius grows."""
    if list(radii_m) != sorted(radii_m):
        raise ValueError("radii must be ascending")
    target = campus.target if target is None else target
    result = ExperimentResult("fig8", tuple(seeds))
    per_radius: dict[float, list[float]] = {float(r): [] for r in radii_m}
    for s in seeds:
        region_map = campus.observe(_rng(s, "observe"))
        truth = campus.truth(target, _rng(s, "truth"))
        for r in radii_m:
            rcfg = PatchConfig(cfg.M, cfg.alpha_default, cfg.alpha, float(r), cfg.max_rounds)
            final = lami_recover(region_map, target, rcfg, hyper, s, n_generated)
            per_radius[float(r)].append(kr_distance(truth, empirical_cdf(final)))
    for r in sorted(per_radius):
        result.add("lami", r, per_radius[r])
    return result


def searchable_counts(region_map: RegionMap, target: Cell, radii_m: Sequence[float]) -> list[int]:
    return [len(restrict_search_area(region_map, target, r)) for r in radii_m]
