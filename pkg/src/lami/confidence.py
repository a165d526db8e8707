"""Per-region latency model and service confidence levels.

The adjusted confidence of a service with latency budget ``r`` and weight
``omega_r`` is ``omega_r * P(x <= r)``, where the probability comes from the
region's empirical CDF.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .statdist import DensityCurve, StepCdf, empirical_cdf, kde_pdf


@dataclass(frozen=True)
class ServiceRequirement:
    name: str
    r: float
    omega_r: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ConfigError(f"service {self.name!r}: r must be > 0, got {self.r}")
        if not 0.0 <= self.omega_r <= 1.0:
            raise ConfigError(f"service {self.name!r}: omega_r must lie in [0, 1], got {self.omega_r}")


# omega_r = 1 is a placeholder until a per-service weight is configured
DEFAULT_SERVICES = (ServiceRequirement("vulnerable road user", 100.0, 1.0),)


@dataclass(frozen=True)
class ServiceConfidence:
    name: str
    r_ms: float
    omega_r: float
    p_raw: float
    f_adjusted: float


@dataclass(frozen=True)
class ConfidenceReport:
    rows: tuple[ServiceConfidence, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "r_ms", "omega_r", "p_raw", "f_adjusted"])
        for row in self.rows:
            w.writerow([row.name, repr(row.r_ms), repr(row.omega_r), repr(row.p_raw), repr(row.f_adjusted)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([asdict(r) for r in self.rows], indent=2)


def parse_services(text: str) -> list[ServiceRequirement]:
    try:
        doc = json.loads(text)
        return [ServiceRequirement(str(d["name"]), float(d["r_ms"]), float(d.get("omega_r", 1.0)))
                for d in doc]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed service list: {exc}") from exc


def region_model(samples) -> tuple[StepCdf, DensityCurve]:
    """Exact ecdf (used for confidence numbers) and a Silverman KDE (for display)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError("a region model needs at least 2 samples")
    return empirical_cdf(x), kde_pdf(x, "auto")


def confidence(cdf: StepCdf, req: ServiceRequirement) -> float:
    return req.omega_r * cdf(req.r)


def service_report(cdf: StepCdf, services: Sequence[ServiceRequirement]) -> ConfidenceReport:
    if not services:
        raise ConfigError("service list is empty")
    names = [s.name for s in services]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate service names")
    rows = []
    for s in sorted(services, key=lambda s: (s.r, s.name)):
        p = cdf(s.r)
        rows.append(ServiceConfidence(s.name, s.r, s.omega_r, p, s.omega_r * p))
    return ConfidenceReport(tuple(rows))
