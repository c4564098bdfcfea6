"""Summaries, the normal CDF, Kolmogorov-Smirnov distance, histograms, rate fits."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadRange, EmptyInput, NonPositiveInput

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    min: float
    max: float
    quantiles: dict = field(default_factory=dict)

    @property
    def std(self):
        return math.sqrt(self.variance) if self.count > 1 else math.nan


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    sample_size: int


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    below: int
    above: int

    @property
    def width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def total(self):
        return int(self.counts.sum()) + self.below + self.above


def quantile(sorted_values, q):
    """Midpoint-rule quantile: the i-th order statistic sits at (i - 0.5) / N.

    Linear interpolation between order statistics, clamped to the extremes
    outside [0.5 / N, 1 - 0.5 / N].
    """
    n = len(sorted_values)
    h = n * q + 0.5
    lo = min(max(int(math.floor(h)), 1), n)
    hi = min(lo + 1, n)
    frac = min(max(h - lo, 0.0), 1.0) if hi > lo else 0.0
    return float(sorted_values[lo - 1] + frac * (sorted_values[hi - 1] - sorted_values[lo - 1]))


def summarize(samples):
    """Welford one-pass mean and unbiased variance, plus order statistics.

    Variance is NaN for a single sample.
    """
    values = [float(v) for v in samples]
    if not values:
        raise EmptyInput("cannot summarize an empty sample")
    mean = 0.0
    m2 = 0.0
    for k, x in enumerate(values, start=1):
        delta = x - mean
        mean += delta / k
        m2 += delta * (x - mean)
    count = len(values)
    ordered = sorted(values)
    return SummaryStats(
        count=count,
        mean=mean,
        variance=max(m2, 0.0) / (count - 1) if count > 1 else math.nan,
        min=ordered[0],
        max=ordered[-1],
        quantiles={q: quantile(ordered, q) for q in QUANTILE_LEVELS},
    )


def standard_normal_cdf(x):
    """Phi(x) = erfc(-x / sqrt(2)) / 2, via the C library's erfc.

    Using erfc rather than 1 + erf keeps full relative accuracy in the lower
    tail. Accepts scalars or arrays.
    """
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    flat = [0.5 * math.erfc(-v / math.sqrt(2.0)) for v in np.asarray(x, dtype=float).ravel()]
    return np.array(flat).reshape(np.shape(x))


def ks_statistic(samples, cdf):
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise EmptyInput("KS statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return KsResult(d_statistic=min(max(d, 0.0), 1.0), sample_size=n)


def loglog_slope(points):
    """Least-squares line through (log size, log value)."""
    pts = [(float(s), float(v)) for s, v in points]
    if len(pts) < 2:
        raise NonPositiveInput("need at least two points for a slope")
    if any(s <= 0 or v <= 0 for s, v in pts):
        raise NonPositiveInput(f"sizes and values must be positive: {pts}")
    lx = np.log([s for s, _ in pts])
    ly = np.log([v for _, v in pts])
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0.0:
        raise NonPositiveInput("all sizes are equal; slope undefined")
    sxy = float(np.sum((lx - mx) * (ly - my)))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_tot = float(np.sum((ly - my) ** 2))
    ss_res = float(np.sum((ly - intercept - slope * lx) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(slope=slope, intercept=intercept, r_squared=min(max(r2, 0.0), 1.0))


def histogram(samples, lo, hi, bins):
    """Equal-width histogram on [lo, hi] normalised by the total sample count.

    sum(density * width) is the fraction of samples inside [lo, hi]; samples
    outside are counted in ``below`` / ``above``.
    """
    if bins < 1 or not lo < hi:
        raise BadRange(f"need bins >= 1 and lo < hi, got bins={bins}, [{lo}, {hi}]")
    x = np.asarray(samples, dtype=np.float64).ravel()
    below = int(np.sum(x < lo))
    above = int(np.sum(x > hi))
    counts, edges = np.histogram(x[(x >= lo) & (x <= hi)], bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    total = max(x.size, 1)
    return Histogram(
        edges=edges,
        density=counts / (total * width),
        counts=counts,
        below=below,
        above=above,
    )
