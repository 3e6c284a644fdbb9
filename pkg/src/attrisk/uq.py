"""Uncertain scalars, deterministic sampling, and empirical-distribution statistics.

Sampling is built on the Philox counter-based bit generator so that the i-th
draw of a stream is a pure function of (seed, stream label, i): draws are
produced in fixed-size chunks, each chunk keyed independently. Serial and
chunk-parallel execution therefore yield bit-identical sequences, and the
first n draws do not depend on how many more are requested later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

#: Draws per independently-keyed chunk. Fixed: changing it changes streams.
CHUNK_SIZE = 1 << 16


class Family(Enum):
    NORMAL = "normal"
    POINT = "point"


class TailDirection(Enum):
    AT_OR_BELOW = "at_or_below"
    AT_OR_ABOVE = "at_or_above"


@dataclass(frozen=True)
class UncertainScalar:
    """A scalar with a central value and a one-standard-deviation dispersion."""

    value: float
    dispersion: float = 0.0
    family: Family = Family.NORMAL
    units: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value}")
        if not math.isfinite(self.dispersion) or self.dispersion < 0:
            raise ValueError(f"dispersion must be finite and >= 0, got {self.dispersion}")
        if self.family is Family.POINT and self.dispersion != 0:
            raise ValueError("Point family requires dispersion == 0")

    @classmethod
    def point(cls, value: float, units: str = "") -> "UncertainScalar":
        return cls(value, 0.0, Family.POINT, units)

    @classmethod
    def normal(cls, value: float, dispersion: float, units: str = "") -> "UncertainScalar":
        return cls(value, dispersion, Family.NORMAL, units)


@dataclass(frozen=True)
class RandomStream:
    """A reproducible stream of draws identified by (seed, label).

    Distinct labels under the same seed give statistically independent
    streams; the label is part of the Philox key, not an offset.
    """

    seed: int
    label: int = 0

    def standard_normal(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        out = np.empty(n)
        for chunk_index in range(0, (n + CHUNK_SIZE - 1) // CHUNK_SIZE):
            start = chunk_index * CHUNK_SIZE
            count = min(CHUNK_SIZE, n - start)
            gen = Generator(Philox(SeedSequence(self.seed, spawn_key=(self.label, chunk_index))))
            out[start:start + count] = gen.standard_normal(count)
        return out


def sample(q: UncertainScalar, stream: RandomStream, n: int) -> np.ndarray:
    """Draw n values of q. Point quantities return the value exactly, n times."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if q.family is Family.POINT:
        return np.full(n, q.value)
    return q.value + q.dispersion * stream.standard_normal(n)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A finalized (sorted, finite) sample-based distribution."""

    samples: np.ndarray
    seed: int
    units: str = ""

    @classmethod
    def from_samples(cls, samples, seed: int, units: str = "") -> "EmpiricalDistribution":
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = np.sort(arr)
        arr.flags.writeable = False
        return cls(arr, seed, units)

    @property
    def sample_count(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def variance(self) -> float:
        return float(self.samples.var())


@dataclass(frozen=True)
class BoxWhiskerSummary:
    """Median, quartiles, 90- and 99-centile ranges, and the mean."""

    median: float
    q25: float
    q75: float
    p05: float
    p95: float
    p005: float
    p995: float
    mean: float

    def __post_init__(self):
        ordered = (self.p005, self.p05, self.q25, self.median, self.q75, self.p95, self.p995)
        if any(a > b for a, b in zip(ordered, ordered[1:])):
            raise ValueError(f"percentiles out of order: {ordered}")


def percentile(d: EmpiricalDistribution, q: float) -> float:
    """Percentile by linear interpolation at rank h = q * (n - 1)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    n = d.sample_count
    h = q * (n - 1)
    lo = math.floor(h)
    hi = math.ceil(h)
    a = float(d.samples[lo])
    if lo == hi:
        return a
    b = float(d.samples[hi])
    # clamped lerp: keeps the result in [a, b] so percentile is monotone in q
    return min(max(a + (h - lo) * (b - a), a), b)


def summarize(d: EmpiricalDistribution) -> BoxWhiskerSummary:
    return BoxWhiskerSummary(
        median=percentile(d, 0.5),
        q25=percentile(d, 0.25),
        q75=percentile(d, 0.75),
        p05=percentile(d, 0.05),
        p95=percentile(d, 0.95),
        p005=percentile(d, 0.005),
        p995=percentile(d, 0.995),
        mean=d.mean,
    )


def tail_probability(d: EmpiricalDistribution, threshold: float,
                     direction: TailDirection = TailDirection.AT_OR_BELOW) -> float:
    """Fraction of samples at or beyond the threshold (one-sided MC p-value)."""
    n = d.sample_count
    if direction is TailDirection.AT_OR_BELOW:
        count = int(np.searchsorted(d.samples, threshold, side="right"))
    else:
        count = n - int(np.searchsorted(d.samples, threshold, side="left"))
    return count / n


def histogram(d: EmpiricalDistribution, bin_count: int) -> list[tuple[float, float, int]]:
    """Equal-width bins over [min, max]; last bin's upper edge is inclusive.

    An all-identical sample yields a single degenerate zero-width bin.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    lo = float(d.samples[0])
    hi = float(d.samples[-1])
    if lo == hi:
        return [(lo, hi, d.sample_count)]
    counts, edges = np.histogram(d.samples, bins=bin_count, range=(lo, hi))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bin_count)]
