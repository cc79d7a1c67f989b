"""Tenant request traces: size distributions, durations, arrivals, CSV I/O.

All sampling runs on a single seeded ``random.Random`` using only its
``random()`` method plus explicit inverse-CDF math, so a given seed yields a
byte-identical trace on any platform or interpreter version.  Continuous
draws are rounded up to the next integer and clamped to the truncation
bounds, keeping sizes at least 1.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, TextIO


@dataclass(frozen=True)
class TenantRequest:
    id: int
    size: int
    arrival: int
    duration: int


class DistributionError(ValueError):
    pass


class TruncatedExponential:
    """Exponential sizes with mean ``x``, truncated to the cloud size.

    The continuous draw is conditioned on (0, hi] and rounded up, so the
    support is exactly {1, ..., hi}.
    """

    def __init__(self, mean: float, hi: int):
        if mean <= 0 or hi < 1:
            raise DistributionError(f"bad truncated-exponential bounds: mean={mean} hi={hi}")
        self.mean = float(mean)
        self.hi = int(hi)
        self._f_hi = 1.0 - math.exp(-self.hi / self.mean)

    def sample(self, rng: random.Random) -> int:
        u = rng.random()
        t = -self.mean * math.log1p(-u * self._f_hi)
        return min(self.hi, max(1, math.ceil(t)))


class TruncatedGaussian:
    """Gaussian sizes N(x, sigma) truncated to (0, hi]; sigma defaults to x/5."""

    def __init__(self, mean: float, hi: int, sigma: float | None = None):
        if mean < 1 or mean > hi:
            raise DistributionError(f"gaussian mean {mean} outside [1, {hi}]")
        self.mean = float(mean)
        self.sigma = self.mean / 5.0 if sigma is None else float(sigma)
        if self.sigma < 0:
            raise DistributionError("sigma must be >= 0")
        self.hi = int(hi)

    def sample(self, rng: random.Random) -> int:
        if self.sigma == 0:
            return min(self.hi, max(1, math.ceil(self.mean)))
        while True:
            # Box-Muller on rng.random() only, for cross-version stability
            u1 = rng.random()
            u2 = rng.random()
            while u1 <= 1e-300:
                u1 = rng.random()
            g = self.mean + self.sigma * math.sqrt(-2.0 * math.log(u1)) \
                * math.cos(2.0 * math.pi * u2)
            if 0.0 < g <= self.hi:
                return max(1, math.ceil(g))


class UniformSizes:
    """Uniform sizes over [0.2x, 1.8x], clamped into [1, hi]."""

    def __init__(self, mean: float, hi: int):
        if mean <= 0:
            raise DistributionError("uniform mean must be positive")
        self.mean = float(mean)
        self.hi = int(hi)
        self.lo_bound = 0.2 * self.mean
        self.hi_bound = 1.8 * self.mean

    def sample(self, rng: random.Random) -> int:
        t = self.lo_bound + (self.hi_bound - self.lo_bound) * rng.random()
        return min(self.hi, max(1, math.ceil(t)))


class EmpiricalCdf:
    """Inverse-CDF sampler over integer size mass points."""

    def __init__(self, points: list[tuple[int, float]]):
        if not points:
            raise DistributionError("empty CDF")
        prev_size, prev_p = 0, 0.0
        for size, p in points:
            if size <= prev_size:
                raise DistributionError(f"sizes must increase: {size} after {prev_size}")
            if p < prev_p:
                raise DistributionError(f"CDF decreases at size {size}: {p} < {prev_p}")
            prev_size, prev_p = size, p
        if abs(points[-1][1] - 1.0) > 1e-9:
            raise DistributionError(f"CDF must end at 1.0, got {points[-1][1]}")
        self.points = [(int(s), float(p)) for s, p in points]

    def sample(self, rng: random.Random) -> int:
        u = rng.random()
        for size, p in self.points:
            if u < p:
                return size
        return self.points[-1][0]


def load_empirical_cdf(stream: TextIO) -> EmpiricalCdf:
    """Two-column CSV ``size,cumulativeProbability``; '#' lines ignored."""
    points = []
    for lineno, row in enumerate(csv.reader(stream), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if len(row) < 2:
            raise DistributionError(f"line {lineno}: expected size,probability")
        points.append((int(row[0]), float(row[1])))
    return EmpiricalCdf(points)


def bundled_job_size_cdf() -> EmpiricalCdf:
    """Synthetic job-size CDF with mass peaks at powers of two (1..32).

    Approximates the measured shape of scientific-computing schedulers; the
    numbers are synthetic, not a published trace.
    """
    ref = resources.files("isoltree.data").joinpath("job_size_cdf.csv")
    with ref.open("r") as fh:
        return load_empirical_cdf(fh)


def gen_requests(count: int, dist, duration_range: tuple[int, int] = (20, 3000),
                 arrival_mode: int = 0, seed: int = 0) -> list[TenantRequest]:
    """Deterministic trace of ``count`` requests for a given seed.

    ``arrival_mode`` 0 queues everything at time 0 (a saturated FIFO
    backlog); a positive value spaces arrivals that many time units apart.
    """
    if count < 1:
        raise ValueError("request count must be >= 1")
    lo, hi = duration_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad duration range [{lo}, {hi}]")
    if arrival_mode < 0:
        raise ValueError("arrival mode must be >= 0")
    rng = random.Random(seed)
    out = []
    for i in range(1, count + 1):
        size = dist.sample(rng)
        duration = lo + int(rng.random() * (hi - lo + 1))
        duration = min(duration, hi)
        arrival = 0 if arrival_mode == 0 else (i - 1) * arrival_mode
        out.append(TenantRequest(i, size, arrival, duration))
    return out


def write_trace(requests: Iterable[TenantRequest], stream: TextIO) -> None:
    """Header-less rows ``id,size,arrival,duration``."""
    for r in requests:
        stream.write(f"{r.id},{r.size},{r.arrival},{r.duration}\n")


def read_trace(stream: TextIO) -> list[TenantRequest]:
    out = []
    for lineno, row in enumerate(csv.reader(stream), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        try:
            rid, size, arrival, duration = (int(x) for x in row[:4])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"trace line {lineno}: bad row {row!r}") from exc
        if size < 1 or duration < 1 or arrival < 0:
            raise ValueError(f"trace line {lineno}: out-of-range values {row!r}")
        out.append(TenantRequest(rid, size, arrival, duration))
    return out


def make_distribution(kind: str, mean: float, cloud_size: int,
                      sigma: float | None = None,
                      cdf_file: str | None = None):
    if kind in ("exp", "exponential"):
        return TruncatedExponential(mean, cloud_size)
    if kind in ("gauss", "gaussian"):
        return TruncatedGaussian(mean, cloud_size, sigma)
    if kind == "uniform":
        return UniformSizes(mean, cloud_size)
    if kind == "cdf":
        if cdf_file is None:
            return bundled_job_size_cdf()
        with open(cdf_file) as fh:
            return load_empirical_cdf(fh)
    raise DistributionError(f"unknown distribution kind {kind!r}")
