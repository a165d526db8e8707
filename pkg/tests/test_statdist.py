from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lami.errors import EmptyTraceError
from lami.statdist import (
    StepCdf,
    WeightFunction,
    empirical_cdf,
    kde_pdf,
    kr_distance,
    silverman_bandwidth,
)
from lami.traces import DEFAULT_GMM

values = st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=40)


def riemann_kr(f, g, w, hi, n=1_000_000):
    """Midpoint-rule oracle over [0, hi]."""
    dt = hi / n
    t = (np.arange(n) + 0.5) * dt
    return float(np.sum(w(t) * np.abs(f(t) - g(t))) * dt)


def step_at(x):
    return StepCdf(np.array([float(x)]), np.array([1.0]))


# ---------------------------------------------------------------- ecdf

def test_ecdf_three_points():
    F = empirical_cdf([10, 20, 30])
    assert F(10) == pytest.approx(1 / 3)
    assert F(25) == pytest.approx(2 / 3)
    assert F(30) == 1.0
    assert F(5) == 0.0


def test_ecdf_duplicates_collapse():
    F = empirical_cdf([7, 7, 7])
    assert F.breakpoints.tolist() == [7.0]
    assert F.values.tolist() == [1.0]


def test_ecdf_empty():
    with pytest.raises(EmptyTraceError):
        empirical_cdf([])


def test_ecdf_uniform_dkw_bound():
    # DKW at 99%: sqrt(ln(200) / 2000) = 0.0515 < 0.06
    x = np.random.default_rng(3).uniform(0, 1, 1000)
    F = empirical_cdf(x)
    t = np.sort(x)
    # sup |F - t| is attained at the jump points, from either side
    upper = np.abs(F(t) - t).max()
    lower = np.abs(np.arange(1000) / 1000 - t).max()
    assert max(upper, lower) < 0.06


@given(values)
def test_ecdf_invariants(xs):
    F = empirical_cdf(xs)
    assert F.values[-1] == 1.0
    assert np.all(np.diff(F.values) > 0)
    for b in F.breakpoints:
        assert F(b) == pytest.approx(np.mean(np.asarray(xs) <= b))


def test_stepcdf_json_roundtrip():
    F = empirical_cdf([1.5, 2.5, 2.5])
    doc = json.loads(F.to_json())
    assert set(doc) == {"breakpoints", "values"}
    G = StepCdf.from_dict(doc)
    assert np.array_equal(G.breakpoints, F.breakpoints)
    assert np.array_equal(G.values, F.values)


def test_stepcdf_rejects_bad_values():
    with pytest.raises(ValueError):
        StepCdf(np.array([1.0, 2.0]), np.array([0.5, 0.9]))
    with pytest.raises(ValueError):
        StepCdf(np.array([2.0, 1.0]), np.array([0.5, 1.0]))


# ---------------------------------------------------------------- KR distance

def test_kr_identical_is_zero():
    F = empirical_cdf([3, 9, 9, 40])
    assert kr_distance(F, F) == 0.0
    assert kr_distance(F, F, WeightFunction.window(0, 5, 3.0)) == 0.0


def test_kr_unit_steps():
    # frozen from a 4e6-point midpoint sum over [0, 40]
    f, g = step_at(10), step_at(20)
    assert kr_distance(f, g) == 10.0
    assert riemann_kr(f, g, WeightFunction(), 40) == pytest.approx(10.0, abs=1e-4)


def test_kr_unit_steps_windowed_weight():
    f, g = step_at(10), step_at(20)
    w = WeightFunction.window(0, 15)
    assert kr_distance(f, g, w) == 5.0
    assert riemann_kr(f, g, w, 40) == pytest.approx(5.0, abs=1e-4)


def test_kr_weight_outside_support_is_zero():
    f, g = step_at(10), step_at(20)
    assert kr_distance(f, g, WeightFunction.window(25, 60)) == 0.0


@settings(max_examples=60)
@given(values, values, values)
def test_kr_metric_axioms(a, b, c):
    Fa, Fb, Fc = map(empirical_cdf, (a, b, c))
    ab, ba = kr_distance(Fa, Fb), kr_distance(Fb, Fa)
    assert ab == ba
    assert ab >= 0
    assert kr_distance(Fa, Fc) <= ab + kr_distance(Fb, Fc) + 1e-12
    if ab == 0:
        assert np.array_equal(Fa.breakpoints, Fb.breakpoints)
        assert np.allclose(Fa.values, Fb.values)


@settings(max_examples=60)
@given(st.integers(1, 60), st.integers(0, 10_000))
def test_kr_equals_order_statistics(n, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.gamma(2, 20, n), rng.gamma(3, 15, n)
    expected = np.mean(np.abs(np.sort(x) - np.sort(y)))
    assert kr_distance(empirical_cdf(x), empirical_cdf(y)) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=60)
@given(values, values, st.floats(1, 300), st.floats(0.1, 5))
def test_kr_invariant_under_weight_repartition(a, b, cut, weight):
    Fa, Fb = empirical_cdf(a), empirical_cdf(b)
    whole = WeightFunction((((0.0, math.inf), weight),))
    split = WeightFunction((((0.0, cut), weight), ((cut, math.inf), weight)))
    assert kr_distance(Fa, Fb, split) == pytest.approx(kr_distance(Fa, Fb, whole), rel=1e-12, abs=1e-12)


@settings(max_examples=60)
@given(values, values, st.integers(-4, 4))
def test_kr_scales_with_weight(a, b, k):
    Fa, Fb = empirical_cdf(a), empirical_cdf(b)
    w = WeightFunction((((0.0, 50.0), 0.7), ((80.0, math.inf), 1.3)))
    c = 2.0 ** k  # powers of two scale without rounding
    assert kr_distance(Fa, Fb, w.scaled(c)) == c * kr_distance(Fa, Fb, w)
    assert kr_distance(Fa, Fb, w.scaled(3.1)) == pytest.approx(3.1 * kr_distance(Fa, Fb, w), rel=1e-12)


def test_weight_function_validation():
    with pytest.raises(ValueError):
        WeightFunction((((0.0, 10.0), 1.0), ((5.0, 20.0), 1.0)))
    with pytest.raises(ValueError):
        WeightFunction((((0.0, 10.0), -1.0),))
    w = WeightFunction((((0.0, 10.0), 2.0), ((20.0, 30.0), 1.0)))
    assert w(np.array([-1.0, 0.0, 9.99, 10.0, 15.0, 25.0, 30.0])).tolist() == [0, 2, 2, 0, 0, 1, 0]


# ---------------------------------------------------------------- KDE

def test_kde_single_value_peak():
    curve = kde_pdf([50.0], bandwidth=1.0)
    nearest = curve.grid[np.argmin(np.abs(curve.grid - 50.0))]
    assert curve.grid[np.argmax(curve.density)] == nearest
    assert curve.bandwidth == 1.0


def test_kde_default_mixture_is_bimodal():
    x = DEFAULT_GMM.sample_rtt(40_000, np.random.default_rng(0))
    curve = kde_pdf(x, "auto")
    peaks = curve.local_maxima(rel_height=0.05)
    assert len(peaks) == 2
    assert abs(peaks[0] - 25) <= 3
    assert abs(peaks[1] - 105) <= 3


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 400), min_size=1, max_size=30), st.floats(0.2, 30))
def test_kde_mass_fixed_bandwidth(xs, h):
    curve = kde_pdf(xs, h)
    assert abs(curve.mass() - 1.0) <= 1e-3
    assert np.all(curve.density >= 0)
    assert curve.grid.size >= 512


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 400), min_size=2, max_size=30, unique=True))
def test_kde_mass_auto_bandwidth(xs):
    curve = kde_pdf(xs, "auto")
    assert abs(curve.mass() - 1.0) <= 1e-3
    h = silverman_bandwidth(np.array(xs))
    assert curve.bandwidth == (h if h > 1e-9 else 1.0)


def test_kde_zero_variance_falls_back(caplog):
    with caplog.at_level("WARNING"):
        curve = kde_pdf([30.0, 30.0, 30.0], "auto")
    assert curve.bandwidth == 1.0
    assert "fall" in caplog.text


def test_kde_json_shape():
    doc = json.loads(kde_pdf([1.0, 2.0, 4.0], 1.0).to_json())
    assert set(doc) == {"grid", "density", "bandwidth"}
    assert len(doc["grid"]) == len(doc["density"])
