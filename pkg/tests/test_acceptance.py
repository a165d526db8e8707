"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line (visible without ``-s``) and then
asserts the same condition, so the pytest status and the printed line agree.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from lami.cli import main
from lami.confidence import ServiceRequirement, confidence
from lami.harness.campus import clustered_campus
from lami.harness.experiments import (
    experiment_recovery,
    experiment_sample_count,
    experiment_searchable_area,
    experiment_vae_vs_interpolation,
)
from lami.statdist import StepCdf, WeightFunction, empirical_cdf, kr_distance
from lami.traces import DEFAULT_GMM
from lami.vae import VaeHyper, VaeModel, grad_check, kl_to_standard_normal

SEEDS = range(10)


@pytest.fixture
def verdict(capsys):
    def report(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
        return ok
    return report


# ---------------------------------------------------------------- 1

N_CELLS = 1_000_000
SPAN = 1000.0
DT = SPAN / N_CELLS


def _random_step_cdf(rng):
    k = np.sort(rng.choice(N_CELLS - 1, size=rng.integers(1, 40), replace=False))
    v = np.sort(rng.uniform(0, 1, k.size))
    v[-1] = 1.0
    v = np.maximum.accumulate(np.maximum(v, 1e-3))
    return k, v


def _random_weight(rng):
    cuts = np.sort(rng.choice(N_CELLS, size=2 * rng.integers(1, 6), replace=False))
    pieces = tuple(((a * DT, b * DT), float(rng.uniform(0, 3))) for a, b in cuts.reshape(-1, 2))
    return cuts.reshape(-1, 2), pieces


def _lattice_cdf(k, v):
    """Values on every lattice cell via a cumulative sum of jumps."""
    jumps = np.zeros(N_CELLS)
    np.add.at(jumps, k, np.diff(np.concatenate(([0.0], v))))
    return np.cumsum(jumps)


def _lattice_weight(cuts, pieces):
    w = np.zeros(N_CELLS + 1)
    for (a, b), (_, wt) in zip(cuts, pieces):
        w[a] += wt
        w[b] -= wt
    return np.cumsum(w)[:-1]


def test_criterion_1_kr_matches_riemann_sum(verdict):
    # every breakpoint sits on the lattice, so the midpoint sum is exact up to rounding
    rng = np.random.default_rng(2024)
    worst, kr_time = 0.0, 0.0
    start = time.perf_counter()
    for _ in range(200):
        kf, vf = _random_step_cdf(rng)
        kg, vg = _random_step_cdf(rng)
        cuts, pieces = _random_weight(rng)
        f, g = StepCdf(kf * DT, vf), StepCdf(kg * DT, vg)
        w = WeightFunction(pieces)
        t0 = time.perf_counter()
        got = kr_distance(f, g, w)
        kr_time += time.perf_counter() - t0
        oracle = float(np.sum(_lattice_weight(cuts, pieces) * np.abs(_lattice_cdf(kf, vf) - _lattice_cdf(kg, vg))) * DT)
        if oracle == 0.0:
            assert got == pytest.approx(0.0, abs=1e-12)
            continue
        worst = max(worst, abs(got - oracle) / oracle)
    total = time.perf_counter() - start
    ok = worst < 1e-6 and total < 10
    verdict(1, "KR exactness", ok,
            f"max rel err {worst:.2e} over 200 pairs; kr_distance {kr_time:.3f}s, total {total:.1f}s")
    assert worst < 1e-6
    assert total < 10


# ---------------------------------------------------------------- 2

def test_criterion_2_wasserstein_order_statistics(verdict):
    rng = np.random.default_rng(77)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(100):
        x = rng.gamma(2.0, 20.0, 257)
        y = rng.lognormal(3.5, 0.6, 257)
        expected = float(np.mean(np.abs(np.sort(x) - np.sort(y))))
        worst = max(worst, abs(kr_distance(empirical_cdf(x), empirical_cdf(y)) - expected))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    verdict(2, "Wasserstein oracle", ok, f"max abs err {worst:.2e}; {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5


# ---------------------------------------------------------------- 3

def test_criterion_3_gradient_check(verdict):
    hyper = VaeHyper()
    rng = np.random.default_rng(31)
    errors = []
    start = time.perf_counter()
    for _ in range(10):
        model = VaeModel.init(hyper, rng)
        for v in model.params.values():
            v += rng.normal(0.0, 0.3, v.shape)
        x = rng.normal(0.0, 1.0, 16)
        errors.append(grad_check(model, x, rng.standard_normal((16, hyper.latent_dim))))
    elapsed = time.perf_counter() - start
    worst = max(errors)
    ok = worst < 1e-4 and elapsed < 30
    verdict(3, "VAE gradient check", ok, f"max rel err {worst:.2e} at 10 points; {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 30


# ---------------------------------------------------------------- 4

def test_criterion_4_kl_closed_form(verdict):
    closed = float(kl_to_standard_normal(np.array([1.0]), np.array([0.0])))
    rng = np.random.default_rng(4)
    z = rng.normal(1.0, 1.0, 1_000_000)
    # log q(z) - log p(z) for q = N(1, 1), p = N(0, 1)
    mc = float(np.mean(0.5 * z ** 2 - 0.5 * (z - 1.0) ** 2))
    ok = closed == 0.5 and abs(mc - closed) <= 1e-2
    verdict(4, "KL closed form", ok, f"closed form {closed!r}, Monte Carlo {mc:.5f}")
    assert closed == 0.5
    assert abs(mc - closed) <= 1e-2


# ---------------------------------------------------------------- 5

def test_criterion_5_sample_count_curve(verdict):
    start = time.perf_counter()
    res = experiment_sample_count(DEFAULT_GMM, [10, 50, 100, 500, 1000, 5000], SEEDS)
    elapsed = time.perf_counter() - start
    means = res.means("ecdf")
    decreasing = bool(np.all(np.diff(means) < 0))
    verdict(5, "sample-count curve", decreasing and elapsed < 60,
            f"mean KR {np.round(means, 3).tolist()}; {elapsed:.1f}s")
    assert decreasing
    assert elapsed < 60


# ---------------------------------------------------------------- 6

@pytest.mark.slow
def test_criterion_6_vae_beats_interpolation(verdict):
    start = time.perf_counter()
    res = experiment_vae_vs_interpolation(DEFAULT_GMM, [25, 10], SEEDS)
    elapsed = time.perf_counter() - start
    wins = {n: int(np.sum(res.per_seed("vae", n) < res.per_seed("interpolation", n))) for n in (25, 10)}
    ok = wins[25] >= 8 and wins[10] >= 7 and elapsed < 600
    detail = ", ".join(
        f"n={n}: VAE wins {wins[n]}/10 (mean KR {res.per_seed('vae', n).mean():.2f} "
        f"vs {res.per_seed('interpolation', n).mean():.2f})" for n in (25, 10))
    verdict(6, "VAE vs interpolation", ok, f"{detail}; {elapsed:.0f}s")
    assert wins[25] >= 8
    assert wins[10] >= 7
    assert elapsed < 600


# ---------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_7_lami_beats_nearest(verdict):
    start = time.perf_counter()
    res = experiment_recovery(clustered_campus(), methods=["lami", "nearest"], seeds=SEEDS)
    elapsed = time.perf_counter() - start
    lami, nearest = res.per_seed("lami"), res.per_seed("nearest")
    wins = int(np.sum(lami < nearest))
    ok = wins >= 8 and elapsed < 900
    verdict(7, "LaMI vs nearest neighbour", ok,
            f"LaMI wins {wins}/10 (mean KR {lami.mean():.2f} vs {nearest.mean():.2f}); {elapsed:.0f}s")
    assert wins >= 8
    assert elapsed < 900


# ---------------------------------------------------------------- 8

@pytest.mark.slow
def test_criterion_8_searchable_area_plateau(verdict):
    radii = [125.0, 500.0, 1000.0, 1500.0, 2500.0]
    start = time.perf_counter()
    res = experiment_searchable_area(clustered_campus(), radii, seeds=SEEDS)
    elapsed = time.perf_counter() - start
    m = res.means("lami")
    plateau = abs(m[-1] - m[-2]) / max(m[-1], m[-2])
    ok = m[-1] <= m[0] and plateau < 0.15 and elapsed < 1200
    verdict(8, "searchable-area curve", ok,
            f"mean KR {np.round(m, 3).tolist()}; last two differ by {plateau:.1%}; {elapsed:.0f}s")
    assert m[-1] <= m[0]
    assert plateau < 0.15
    assert elapsed < 1200


# ---------------------------------------------------------------- 9

def test_criterion_9_confidence_exactness(verdict):
    rng = np.random.default_rng(9)
    x = np.round(DEFAULT_GMM.sample_rtt(997, rng), 1)  # rounding creates ties
    cdf = empirical_cdf(x)
    n = x.size
    bad = 0
    for _ in range(100):
        r = float(rng.choice([rng.uniform(1, 200), rng.choice(x)]))
        omega = float(rng.uniform(0, 1))
        count = int(np.sum(x <= r))
        got = confidence(cdf, ServiceRequirement("probe", r, omega))
        exact = Fraction(omega) * Fraction(count, n)
        # one rounding for count/N, scaled by omega, plus one for the product
        bound = Fraction(omega) * Fraction(np.spacing(count / n)) / 2 + Fraction(np.spacing(got)) / 2
        if got != omega * (count / n) or abs(Fraction(got) - exact) > bound:
            bad += 1
    verdict(9, "confidence exactness", bad == 0, f"{100 - bad}/100 probes exact")
    assert bad == 0


# ---------------------------------------------------------------- 10

@pytest.mark.slow
def test_criterion_10_eval_is_deterministic(verdict, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["eval", "fig7", "--seed", "42", "--out", str(o)]) for o in outs]
    files = sorted(p.name for p in outs[0].glob("*.csv"))
    same = files == sorted(p.name for p in outs[1].glob("*.csv")) and all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    ok = codes == [0, 0] and bool(files) and same
    verdict(10, "determinism", ok, f"{len(files)} CSV files byte-identical: {same}")
    assert codes == [0, 0]
    assert files
    assert same
