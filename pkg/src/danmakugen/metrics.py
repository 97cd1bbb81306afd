"""Danmaku quality metrics over simulation traces, plus a bounded symmetric
divergence for comparing metric populations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulation import SimTrace

METRIC_NAMES = ("sf", "mm", "cov")

_JS_SMOOTHING = 1e-6


@dataclass(frozen=True)
class MetricsReport:
    sf: float
    mm: float
    cov: float

    def as_dict(self) -> dict:
        return {"sf": self.sf, "mm": self.mm, "cov": self.cov}


@dataclass
class MetricSample:
    name: str
    values: list[float]
    label: str

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"metric sample {self.name}/{self.label} is empty")


def shooting_frequency(trace: SimTrace) -> float:
    """Shots per frame of the shooting pattern."""
    return trace.l_emitted / trace.t_shoot


def mean_momentum(trace: SimTrace) -> float:
    """Time average of the per-frame sum of bullet weight x speed on screen."""
    total = 0.0
    for value in trace.momentum:
        total += value
    return float(total / trace.t_total)


def coverage(trace: SimTrace) -> float:
    """Fraction of screen cells whose rectangle a bullet disc ever touched."""
    return trace.covered_count() / trace.covered.size


def report(trace: SimTrace) -> MetricsReport:
    return MetricsReport(shooting_frequency(trace), mean_momentum(trace), coverage(trace))


def js_divergence(a, b, bins: int = 16) -> float:
    """Jensen-Shannon divergence in nats between two value samples.

    Both samples are histogrammed over the pooled min..max range, smoothed
    with a tiny per-bin mass, and renormalized. Bounded by ln 2; a degenerate
    pooled range (all values equal) returns 0.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.size == 0 or bv.size == 0:
        raise ValueError("js_divergence needs two non-empty samples")
    lo = min(av.min(), bv.min())
    hi = max(av.max(), bv.max())
    if lo == hi:
        return 0.0
    pa = np.histogram(av, bins=bins, range=(lo, hi))[0] / av.size + _JS_SMOOTHING
    pb = np.histogram(bv, bins=bins, range=(lo, hi))[0] / bv.size + _JS_SMOOTHING
    pa /= pa.sum()
    pb /= pb.sum()
    m = 0.5 * (pa + pb)
    return float(0.5 * np.sum(pa * np.log(pa / m)) + 0.5 * np.sum(pb * np.log(pb / m)))


def compare_populations(real: dict[str, list[float]], generated: dict[str, list[float]],
                        bins: int = 16) -> list[dict]:
    """Per-metric divergence rows for the population comparison CSV."""
    rows = []
    for name in METRIC_NAMES:
        rows.append({
            "metric": name,
            "js_value": js_divergence(real[name], generated[name], bins=bins),
            "n_a": len(real[name]),
            "n_b": len(generated[name]),
        })
    return rows
