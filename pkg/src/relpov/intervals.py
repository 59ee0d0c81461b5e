"""Confidence intervals for the headcount ratio."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ._backend import kernels
from .dists import check_fraction
from .errors import DomainError
from .estimate import (
    MIN_SE_SIZE,
    Sample,
    empirical_cdf,
    headcount_estimate,
    quantile_density,
    standard_errors,
)

__all__ = [
    "Method",
    "IntervalEstimate",
    "BootstrapConfig",
    "z_quantile",
    "binomial_interval",
    "wald_interval",
    "median_substitution_interval",
    "bootstrap_interval",
    "bootstrap_replicates",
    "difference_interval",
    "interval",
    "parse_methods",
]


class Method(str, enum.Enum):
    WALD_BINOMIAL = "binomial"
    AGRESTI_COULL = "agresti_coull"
    CLOPPER_PEARSON = "clopper_pearson"
    WILSON = "wilson"
    WALD1 = "wald1"
    WALD2 = "wald2"
    MEDIAN_SUBSTITUTION = "median_sub"
    PERCENTILE_BOOTSTRAP = "bootstrap"

    def __str__(self):
        return self.value


_ALIASES = {
    "wald": Method.WALD_BINOMIAL,
    "wald_binomial": Method.WALD_BINOMIAL,
    "ac": Method.AGRESTI_COULL,
    "agresti-coull": Method.AGRESTI_COULL,
    "cp": Method.CLOPPER_PEARSON,
    "clopper-pearson": Method.CLOPPER_PEARSON,
    "pearson_clopper": Method.CLOPPER_PEARSON,
    "median": Method.MEDIAN_SUBSTITUTION,
    "median_substitution": Method.MEDIAN_SUBSTITUTION,
    "boot": Method.PERCENTILE_BOOTSTRAP,
    "percentile_bootstrap": Method.PERCENTILE_BOOTSTRAP,
}

BINOMIAL_METHODS = (
    Method.WALD_BINOMIAL,
    Method.AGRESTI_COULL,
    Method.CLOPPER_PEARSON,
    Method.WILSON,
)


def parse_method(name):
    if isinstance(name, Method):
        return name
    key = str(name).strip().lower()
    try:
        return Method(key)
    except ValueError:
        pass
    if key in _ALIASES:
        return _ALIASES[key]
    raise DomainError(f"unknown interval method {name!r}")


def parse_methods(text):
    """Split a comma-separated list of method names."""
    if isinstance(text, str):
        text = [t for t in text.split(",") if t.strip()]
    return [parse_method(t) for t in text]


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float
    method: Method
    p: float = 0.5

    @property
    def width(self):
        return self.upper - self.lower

    def covers(self, value):
        return self.lower <= value <= self.upper

    def as_dict(self):
        return {
            "method": str(self.method),
            "p": self.p,
            "level": self.level,
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
        }


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 500
    seed: int | None = 0
    lower_percentile: float = 0.025
    upper_percentile: float = 0.975

    def __post_init__(self):
        if self.replicates < 2:
            raise DomainError("bootstrap needs at least 2 replicates")
        if not 0.0 < self.lower_percentile < self.upper_percentile < 1.0:
            raise DomainError("need 0 < lower_percentile < upper_percentile < 1")

    @classmethod
    def for_level(cls, level=0.95, replicates=500, seed=0):
        level = _check_ci_level(level)
        tail = 0.5 * (1.0 - level)
        return cls(replicates, seed, tail, 1.0 - tail)

    @property
    def level(self):
        return self.upper_percentile - self.lower_percentile


def _check_ci_level(level):
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    return level


def z_quantile(level):
    """Two-sided normal critical value z_{1 - alpha/2} for ``level``."""
    level = _check_ci_level(level)
    return float(special.ndtri(0.5 + 0.5 * level))


def _clip01(v):
    return min(1.0, max(0.0, v))


def binomial_interval(h_hat, n, level=0.95, variant=Method.WALD_BINOMIAL, p=0.5):
    """Interval for H treating the median as known.

    ``h_hat`` must be a multiple of 1/n; the count k is recovered by rounding.
    """
    variant = parse_method(variant)
    if variant not in BINOMIAL_METHODS:
        raise DomainError(f"{variant} is not a binomial-proportion method")
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    z = z_quantile(level)
    k = int(round(h_hat * n))
    if abs(k - h_hat * n) > 1e-6 or not 0 <= k <= n:
        raise DomainError("h_hat must be k/n for an integer 0 <= k <= n")
    ph = k / n
    if variant is Method.WALD_BINOMIAL:
        half = z * math.sqrt(ph * (1.0 - ph) / n)
        lo, hi = ph - half, ph + half
    elif variant is Method.AGRESTI_COULL:
        nt = n + z * z
        pt = (k + 0.5 * z * z) / nt
        half = z * math.sqrt(pt * (1.0 - pt) / nt)
        lo, hi = pt - half, pt + half
    elif variant is Method.WILSON:
        denom = 1.0 + z * z / n
        centre = (ph + z * z / (2.0 * n)) / denom
        half = z / denom * math.sqrt(ph * (1.0 - ph) / n + z * z / (4.0 * n * n))
        lo, hi = centre - half, centre + half
    else:
        alpha = 1.0 - level
        lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2.0, k, n - k + 1))
        hi = 1.0 if k == n else float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return IntervalEstimate(ph, _clip01(lo), _clip01(hi), level, variant, p)


def wald_interval(s, p=0.5, level=0.95, variant="SE2"):
    """H_hat +/- z SE, with SE1 or SE2 from :func:`standard_errors`."""
    key = str(variant).upper().replace("WALD", "SE")
    if key not in ("SE1", "SE2"):
        raise DomainError(f"variant must be SE1 or SE2, got {variant!r}")
    p = check_fraction(p)
    z = z_quantile(level)
    se = standard_errors(s, p)
    width = se.se1 if key == "SE1" else se.se2
    h = se.h_hat
    method = Method.WALD1 if key == "SE1" else Method.WALD2
    return IntervalEstimate(h, _clip01(h - z * width), _clip01(h + z * width), level, method, p)


def median_substitution_interval(s, p=0.5, level=0.95):
    """Map a Wald interval for the median through the empirical cdf."""
    s = s if isinstance(s, Sample) else Sample(s)
    p = check_fraction(p)
    if s.n < MIN_SE_SIZE:
        raise DomainError(f"median interval needs n >= {MIN_SE_SIZE}")
    z = z_quantile(level)
    est = headcount_estimate(s, p)
    half = z * quantile_density(s, 0.5) / (2.0 * math.sqrt(s.n))
    m_lo = max(est.median_hat - half, 0.0)
    m_hi = est.median_hat + half
    lo = empirical_cdf(s, p * m_lo)
    hi = empirical_cdf(s, p * m_hi)
    return IntervalEstimate(est.h_hat, lo, hi, level, Method.MEDIAN_SUBSTITUTION, p)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def bootstrap_replicates(s, p, replicates, seed):
    """Headcount estimates of ``replicates`` resamples drawn with replacement."""
    s = s if isinstance(s, Sample) else Sample(s)
    rng = _rng(seed)
    idx = rng.integers(0, s.n, size=(int(replicates), s.n), dtype=np.int64)
    return kernels.bootstrap_headcounts(s.values, idx, float(p))


def _percentiles(values, cfg):
    lo, hi = np.quantile(values, [cfg.lower_percentile, cfg.upper_percentile])
    return float(lo), float(hi)


def bootstrap_interval(s, p=0.5, cfg=None):
    """Percentile bootstrap interval; deterministic given ``cfg.seed``."""
    s = s if isinstance(s, Sample) else Sample(s)
    p = check_fraction(p)
    cfg = cfg or BootstrapConfig()
    reps = bootstrap_replicates(s, p, cfg.replicates, cfg.seed)
    lo, hi = _percentiles(reps, cfg)
    point = headcount_estimate(s, p).h_hat
    return IntervalEstimate(point, lo, hi, cfg.level, Method.PERCENTILE_BOOTSTRAP, p)


def difference_interval(s1, s2, p=0.5, level=0.95, method=Method.WALD2, cfg=None):
    """Interval for H(s1) - H(s2) from two independent samples."""
    method = parse_method(method)
    p = check_fraction(p)
    s1 = s1 if isinstance(s1, Sample) else Sample(s1)
    s2 = s2 if isinstance(s2, Sample) else Sample(s2)
    point = headcount_estimate(s1, p).h_hat - headcount_estimate(s2, p).h_hat
    if method is Method.WALD2:
        z = z_quantile(level)
        se = math.hypot(standard_errors(s1, p).se2, standard_errors(s2, p).se2)
        lo, hi = point - z * se, point + z * se
    elif method is Method.PERCENTILE_BOOTSTRAP:
        cfg = cfg or BootstrapConfig.for_level(level)
        level = cfg.level
        rng = _rng(cfg.seed)
        r1 = bootstrap_replicates(s1, p, cfg.replicates, rng)
        r2 = bootstrap_replicates(s2, p, cfg.replicates, rng)
        lo, hi = _percentiles(r1 - r2, cfg)
    else:
        raise DomainError("difference intervals support wald2 and bootstrap only")
    return IntervalEstimate(point, max(lo, -1.0), min(hi, 1.0), level, method, p)


def interval(s, method, p=0.5, level=0.95, bootstrap=None):
    """Dispatch to the construction named by ``method``."""
    method = parse_method(method)
    if method in BINOMIAL_METHODS:
        est = headcount_estimate(s, p)
        return binomial_interval(est.h_hat, est.n, level, method, p)
    if method is Method.WALD1:
        return wald_interval(s, p, level, "SE1")
    if method is Method.WALD2:
        return wald_interval(s, p, level, "SE2")
    if method is Method.MEDIAN_SUBSTITUTION:
        return median_substitution_interval(s, p, level)
    cfg = bootstrap if bootstrap is not None else BootstrapConfig.for_level(level)
    return bootstrap_interval(s, p, cfg)
