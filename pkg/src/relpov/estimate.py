"""Point estimation from a complete sample of incomes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .dists import check_fraction
from .errors import DomainError

__all__ = [
    "Sample",
    "HeadcountEstimate",
    "StdErrPair",
    "sample_median",
    "headcount_estimate",
    "empirical_cdf",
    "quantile_density",
    "quantile_density_bandwidth",
    "kernel_density",
    "kde_bandwidth",
    "standard_errors",
]

MIN_SE_SIZE = 10


class Sample:
    """Sorted, read-only array of non-negative incomes.

    Construction copies and sorts the input unless ``presorted`` is true.
    Zero incomes are accepted (grouped tables can contain exact zeros);
    rejecting non-positive raw data is the job of the ingest layer.
    """

    __slots__ = ("_values", "_median")

    def __init__(self, values, presorted=False):
        arr = np.array(values, dtype=np.float64).ravel()
        if arr.size == 0:
            raise DomainError("a sample needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise DomainError("sample values must be finite")
        if arr.min() < 0:
            raise DomainError("incomes must be non-negative")
        if not presorted:
            arr.sort()
        arr.setflags(write=False)
        self._values = arr
        self._median = None

    @property
    def values(self):
        return self._values

    @property
    def n(self):
        return self._values.shape[0]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Sample(n={self.n}, median={self.median:.6g})"

    @property
    def median(self):
        if self._median is None:
            v, n = self._values, self.n
            self._median = float(0.5 * (v[(n - 1) // 2] + v[n // 2]))
        return self._median

    def scaled(self, c):
        return Sample(self._values * c, presorted=True)


@dataclass(frozen=True)
class HeadcountEstimate:
    h_hat: float
    median_hat: float
    poverty_line: float
    p: float
    n: int
    count: int

    def as_dict(self):
        return {
            "h_hat": self.h_hat,
            "median": self.median_hat,
            "line": self.poverty_line,
            "p": self.p,
            "n": self.n,
            "count": self.count,
        }


@dataclass(frozen=True)
class StdErrPair:
    se1: float
    se2: float
    q_at_half: float
    f_at_line: float
    h_hat: float
    n: int


def _as_sample(s):
    return s if isinstance(s, Sample) else Sample(s)


def sample_median(s):
    return _as_sample(s).median


def headcount_estimate(s, p=0.5):
    """Proportion of the sample at or below ``p`` times the sample median."""
    s = _as_sample(s)
    p = check_fraction(p)
    med = s.median
    line = p * med
    k = int(np.searchsorted(s.values, line, side="right"))
    return HeadcountEstimate(k / s.n, med, line, p, s.n, k)


def empirical_cdf(s, x):
    s = _as_sample(s)
    k = np.searchsorted(s.values, x, side="right")
    return k / s.n if np.ndim(x) else float(k / s.n)


def _check_level(u):
    u = float(u)
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u}")
    return u


def quantile_density_bandwidth(s, u):
    """Two-stage plug-in bandwidth for :func:`quantile_density`.

    A pilot estimate of q and of q'' (central differences) feeds the
    AMSE-optimal Epanechnikov bandwidth n^(-1/5) (15 q^2 / q''^2)^(1/5),
    which is then clamped to (1/n, min(u, 1 - u)].
    """
    s = _as_sample(s)
    u = _check_level(u)
    n = s.n
    edge = min(u, 1.0 - u)
    rate = n ** -0.2
    b0 = rate * min(0.25, edge)
    h = 0.5 * b0
    xs = s.values
    q0 = kernels.qdensity(xs, u, b0)
    q2 = (kernels.qdensity(xs, u + h, b0) - 2.0 * q0 + kernels.qdensity(xs, u - h, b0)) / (h * h)
    if q2 == 0.0 or not math.isfinite(q2):
        b = edge
    else:
        b = rate * (15.0 * q0 * q0 / (q2 * q2)) ** 0.2
    lo = 1.0 / n
    if not b > lo:
        b = min(2.0 * lo, edge)
    return min(b, edge)


def quantile_density(s, u, bandwidth=None):
    """Kernel estimate of q(u) = 1 / f(Q(u)) with the Epanechnikov kernel."""
    s = _as_sample(s)
    u = _check_level(u)
    if bandwidth is None:
        bandwidth = quantile_density_bandwidth(s, u)
    else:
        bandwidth = float(bandwidth)
        if not 0.0 < bandwidth <= min(u, 1.0 - u) + 1e-15:
            raise DomainError("bandwidth must lie in (0, min(u, 1-u)]")
    return float(kernels.qdensity(s.values, u, bandwidth))


def kde_bandwidth(s):
    """Silverman's rule: 0.9 min(sd, IQR/1.34) n^(-1/5)."""
    s = _as_sample(s)
    v = s.values
    sd = float(np.std(v, ddof=1))
    q75, q25 = np.percentile(v, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if not spread > 0:
        # fall back to whichever scale estimate is positive
        spread = sd if sd > 0 else (q75 - q25) / 1.34
    if not spread > 0:
        raise DomainError("zero-variance sample; density bandwidth undefined")
    return 0.9 * spread * s.n ** -0.2


def kernel_density(s, x, bandwidth=None):
    """Gaussian kernel density estimate at ``x``."""
    s = _as_sample(s)
    if s.n < 2:
        raise DomainError("kernel density needs at least two observations")
    h = kde_bandwidth(s) if bandwidth is None else float(bandwidth)
    z = (np.asarray(x, dtype=np.float64)[..., None] - s.values) / h
    dens = np.exp(-0.5 * z * z).sum(axis=-1) / (s.n * h * math.sqrt(2.0 * math.pi))
    return float(dens) if np.ndim(x) == 0 else dens


def standard_errors(s, p=0.5):
    """The two approximate standard errors of the headcount estimator.

    ``se1`` propagates only the sampling error of the median; ``se2`` adds
    the binomial term and the covariance correction.
    """
    s = _as_sample(s)
    p = check_fraction(p)
    n = s.n
    if n < MIN_SE_SIZE:
        raise DomainError(f"standard errors need n >= {MIN_SE_SIZE}, got {n}")
    est = headcount_estimate(s, p)
    q_half = quantile_density(s, 0.5)
    f_line = kernel_density(s, est.poverty_line)
    rn = math.sqrt(n)
    se1 = abs(p * q_half * f_line / (2.0 * rn))
    h = est.h_hat
    radicand = se1 * se1 + h * (1.0 - h) / n - 2.0 * h * se1 / rn
    se2 = math.sqrt(max(radicand, 0.0))
    return StdErrPair(se1, se2, q_half, f_line, h, n)
