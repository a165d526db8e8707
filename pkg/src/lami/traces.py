"""Latency samples: CSV ingestion, synthetic mixture traces and summaries."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptyTraceError, RowError

TRACE_HEADER = ("timestamp_ms", "rtt_ms", "lat", "lon", "speed_mps", "link_type")

# Default probe location used for synthetic single-site traces (Wuhan campus).
DEFAULT_ORIGIN = (30.513, 114.41)
PROBE_INTERVAL_MS = 500


@dataclass(frozen=True)
class Sample:
    timestamp_ms: int
    rtt_ms: float
    lat: float
    lon: float
    speed_mps: float | None = None
    link_type: str | None = None

    def __post_init__(self):
        if not math.isfinite(self.rtt_ms) or self.rtt_ms < 0:
            raise ValueError(f"rtt_ms must be finite and >= 0, got {self.rtt_ms}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon}")
        if self.speed_mps is not None and not self.speed_mps >= 0:
            raise ValueError(f"speed_mps must be >= 0, got {self.speed_mps}")


@dataclass(frozen=True)
class TraceSummary:
    count: int
    mean_ms: float
    std_ms: float
    median_ms: float


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean_ms: float
    std_ms: float


@dataclass(frozen=True)
class GmmSpec:
    """Gaussian mixture over RTT, truncated below at 0 ms."""

    components: tuple[GmmComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigError("GmmSpec needs at least one component")
        for c in self.components:
            if not 0.0 < c.weight <= 1.0:
                raise ConfigError(f"component weight must lie in (0, 1], got {c.weight}")
            if not c.mean_ms > 0:
                raise ConfigError(f"component mean must be > 0, got {c.mean_ms}")
            # std 0 is accepted as a degenerate point mass
            if not c.std_ms >= 0:
                raise ConfigError(f"component std must be >= 0, got {c.std_ms}")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"component weights sum to {total}, expected 1")

    @classmethod
    def of(cls, *triples: tuple[float, float, float]) -> GmmSpec:
        """Build from ``(weight, mean_ms, std_ms)`` triples."""
        return cls(tuple(GmmComponent(*map(float, t)) for t in triples))

    @classmethod
    def from_dict(cls, doc: dict) -> GmmSpec:
        try:
            comps = [
                GmmComponent(float(c["weight"]), float(c["mean_ms"]), float(c["std_ms"]))
                for c in doc["components"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed GmmSpec document: {exc}") from exc
        return cls(tuple(comps))

    @classmethod
    def from_json(cls, text: str) -> GmmSpec:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"GmmSpec is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": c.weight, "mean_ms": c.mean_ms, "std_ms": c.std_ms}
                for c in self.components
            ]
        }

    def sample_rtt(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` RTT values; negatives are redrawn from the full mixture."""
        if n < 0:
            raise ValueError("n must be >= 0")
        weights = np.array([c.weight for c in self.components])
        means = np.array([c.mean_ms for c in self.components])
        stds = np.array([c.std_ms for c in self.components])
        out = np.empty(n)
        todo = np.arange(n)
        while todo.size:
            k = rng.choice(len(weights), size=todo.size, p=weights / weights.sum())
            out[todo] = means[k] + stds[k] * rng.standard_normal(todo.size)
            todo = todo[out[todo] < 0]
        return out


# Means follow the two modes seen at a fixed campus location; the first weight
# solves w*25 + (1-w)*105 = 43.935 (fixed-location mean).
DEFAULT_GMM = GmmSpec.of((0.764, 25.0, 8.0), (0.236, 105.0, 15.0))


def _opt_float(text: str) -> float | None:
    return float(text) if text.strip() else None


def parse_trace(text: str) -> list[Sample]:
    """Parse trace CSV text into samples, preserving file order."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise RowError(1, "header", "missing header row") from None
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise RowError(1, "header", f"expected {','.join(TRACE_HEADER)}")

    samples = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(TRACE_HEADER):
            raise RowError(line, "*", f"expected {len(TRACE_HEADER)} fields, got {len(row)}")
        fields = dict(zip(TRACE_HEADER, row))
        values = {}
        for name, conv in (
            ("timestamp_ms", int),
            ("rtt_ms", float),
            ("lat", float),
            ("lon", float),
            ("speed_mps", _opt_float),
        ):
            try:
                values[name] = conv(fields[name].strip())
            except ValueError:
                raise RowError(line, name, f"cannot parse {fields[name]!r}") from None
        if not math.isfinite(values["rtt_ms"]) or values["rtt_ms"] < 0:
            raise RowError(line, "rtt_ms", f"rejected row: rtt_ms={values['rtt_ms']}")
        link = fields["link_type"].strip() or None
        try:
            samples.append(Sample(link_type=link, **values))
        except ValueError as exc:
            raise RowError(line, "*", str(exc)) from None
    return samples


def format_trace(samples: Iterable[Sample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for s in samples:
        writer.writerow([
            s.timestamp_ms,
            repr(s.rtt_ms),
            repr(s.lat),
            repr(s.lon),
            "" if s.speed_mps is None else repr(s.speed_mps),
            s.link_type or "",
        ])
    return buf.getvalue()


def generate_synthetic_trace(
    spec: GmmSpec,
    n: int,
    seed: int,
    origin: tuple[float, float] = DEFAULT_ORIGIN,
    link_type: str = "LTE",
) -> list[Sample]:
    """Draw ``n`` i.i.d. samples at a fixed location, one per probe interval."""
    if not isinstance(spec, GmmSpec):
        raise ConfigError("spec must be a GmmSpec")
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    rtt = spec.sample_rtt(n, np.random.default_rng(seed))
    lat, lon = origin
    return [
        Sample(i * PROBE_INTERVAL_MS, float(v), lat, lon, 0.0, link_type)
        for i, v in enumerate(rtt)
    ]


def rtt_values(samples: Sequence[Sample]) -> np.ndarray:
    return np.fromiter((s.rtt_ms for s in samples), dtype=float, count=len(samples))


def summarize(samples: Sequence[Sample] | np.ndarray) -> TraceSummary:
    """Mean, sample standard deviation (n-1) and median of the raw RTTs."""
    if isinstance(samples, np.ndarray):
        x = np.asarray(samples, dtype=float)
    else:
        x = rtt_values(samples)
    if x.size == 0:
        raise EmptyTraceError("cannot summarize an empty trace")
    # sort first so the result does not depend on input order
    x = np.sort(x)
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return TraceSummary(int(x.size), float(np.mean(x)), std, float(np.median(x)))
