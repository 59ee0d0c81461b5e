"""Headcount estimation from binned income data.

Two density estimates are supported:

* linear interpolation (LI): a linear density inside each bounded bin,
  pinned by the bin mass and the bin mean, plus an exponential tail on the
  open last bin;
* a four-parameter FKML generalised lambda distribution fitted by
  percentile matching, which needs only the bin boundaries and counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .dists import GLD, _open_uniforms, check_fraction
from .errors import DomainError, FitError, UnsupportedMethodError
from .estimate import Sample, headcount_estimate
from .intervals import BootstrapConfig, IntervalEstimate

__all__ = [
    "GroupedTable",
    "PiecewiseDensityFit",
    "GLDFit",
    "li_fit",
    "li_cdf",
    "li_quantile",
    "gld_fit",
    "gld_fit_grouped",
    "fit_grouped",
    "grouped_headcount",
    "grouped_bootstrap_interval",
    "grouped_bootstrap_replicates",
    "reconstruct_sample",
    "GLD_START_GRID",
    "DECILES",
]

GLD_START_GRID = tuple(
    (float(a), float(b))
    for a in np.linspace(-0.5, 1.5, 5)
    for b in np.linspace(-0.5, 1.5, 5)
)
_VALIDATION_GRID = np.arange(1, 1000) / 1000.0
DECILES = np.arange(1, 10) / 10.0
_MAX_BOOT_FAILURES = 0.10


@dataclass(frozen=True)
class GroupedTable:
    """Binned incomes. Bin j covers ``[lower[j], upper[j])``.

    A bin with ``lower == upper`` is a point mass (e.g. exact zero incomes).
    Only the last bin may be unbounded (``upper = inf``). ``means`` holds
    NaN where a bin mean is not available.
    """

    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        ct = np.asarray(self.counts, dtype=np.float64)
        mu = np.full(lo.shape, np.nan) if self.means is None else np.asarray(self.means, dtype=np.float64)
        for name, arr in (("lower", lo), ("upper", hi), ("counts", ct), ("means", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (lo.ndim == 1 and lo.shape == hi.shape == ct.shape == mu.shape):
            raise DomainError("bin arrays must be one-dimensional and of equal length")
        if lo.size == 0:
            raise DomainError("a grouped table needs at least one bin")
        if np.any(~np.isfinite(lo)) or np.any(np.isnan(hi)) or np.any(np.isinf(hi[:-1])):
            raise DomainError("only the last bin may be unbounded")
        if np.any(hi < lo):
            raise DomainError("bin upper bounds must not be below lower bounds")
        if np.any(~np.isfinite(ct)) or np.any(ct < 0):
            raise DomainError("bin counts must be finite and non-negative")
        if not ct.sum() > 0:
            raise DomainError("bin counts sum to zero")
        atom = lo == hi
        nxt = lo[1:]
        ok = np.where(atom[:-1], nxt >= hi[:-1], nxt == hi[:-1])
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            raise DomainError(f"bins {bad + 1} and {bad + 2} are not contiguous")
        has = ~np.isnan(mu)
        inside = np.where(atom, mu == lo, (mu >= lo) & (mu <= hi))
        if np.isinf(hi[-1]):
            inside[-1] = mu[-1] > lo[-1]
        if np.any(has & ~inside):
            bad = int(np.flatnonzero(has & ~inside)[0])
            raise DomainError(f"mean of bin {bad + 1} lies outside the bin")

    @classmethod
    def from_bins(cls, bins):
        """Build from ``(lower, upper, count[, mean])`` tuples."""
        rows = [tuple(b) + (None,) * (4 - len(b)) for b in bins]
        lo, hi, ct, mu = zip(*rows)
        mu = [np.nan if m is None else m for m in mu]
        hi = [math.inf if h is None else h for h in hi]
        return cls(np.array(lo, float), np.array(hi, float), np.array(ct, float), np.array(mu, float))

    @classmethod
    def from_inclusive_integer_bins(cls, lower, upper, counts, means=None):
        """Bins printed as integer ranges ``[lower, upper]``.

        Each range becomes ``[lower, upper + 1)``; a range with
        ``lower == upper`` at the start of the table stays a point mass.
        """
        lo = np.asarray(lower, dtype=np.float64)
        hi = np.asarray(upper, dtype=np.float64)
        atom = (lo == hi) & (np.arange(lo.size) == 0)
        hi = np.where(atom | np.isinf(hi), hi, hi + 1.0)
        return cls(lo, hi, np.asarray(counts, float), means)

    @classmethod
    def from_sample(cls, s, k=10, with_means=True, lower=0.0):
        """Group a sample into ``k`` quantile bins with an open last bin."""
        s = s if isinstance(s, Sample) else Sample(s)
        v = s.values
        edges = np.quantile(v, np.arange(1, k) / k)
        pos = np.concatenate(([0], np.searchsorted(v, edges, side="left"), [s.n]))
        counts = np.diff(pos).astype(np.float64)
        lo = np.concatenate(([min(lower, v[0])], edges))
        hi = np.concatenate((edges, [math.inf]))
        means = None
        if with_means:
            csum = np.concatenate(([0.0], np.cumsum(v)))
            sums = csum[pos[1:]] - csum[pos[:-1]]
            with np.errstate(invalid="ignore", divide="ignore"):
                means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
            # rounding in the cumulative sums can push a mean a hair outside its bin
            means = np.where(np.isnan(means), np.nan, np.clip(means, lo, np.where(np.isinf(hi), np.inf, hi)))
            if counts[-1] > 0 and not means[-1] > lo[-1]:
                means[-1] = np.nextafter(lo[-1], np.inf)
        return cls(lo, hi, counts, means)

    @property
    def n_bins(self):
        return self.lower.size

    @property
    def total(self):
        return float(self.counts.sum())

    @property
    def proportions(self):
        return self.counts / self.counts.sum()

    @property
    def has_means(self):
        occupied = self.counts > 0
        return bool(np.all(~np.isnan(self.means[occupied])))

    @property
    def is_atom(self):
        return self.lower == self.upper

    def boundary_pairs(self):
        """(cumulative proportion, boundary) at every interior boundary.

        The boundary after bin j is the lower edge of bin j + 1. Pairs at
        cumulative proportion 0 or 1 carry no information and are dropped.
        """
        cum = np.cumsum(self.proportions)[:-1]
        x = self.lower[1:]
        keep = (cum > 1e-12) & (cum < 1.0 - 1e-12)
        return list(zip(cum[keep].tolist(), x[keep].tolist()))

    def quantile_pairs(self, probs=None):
        """(u, x) pairs read off the ogive, the piecewise-linear grouped cdf.

        ``probs`` defaults to the nine deciles. Probabilities beyond the last
        interior boundary (inside the open last bin) are skipped.
        """
        probs = DECILES if probs is None else np.asarray(probs, dtype=np.float64)
        pairs = self.boundary_pairs()
        cu = np.array([0.0] + [c for c, _ in pairs])
        cx = np.array([self.lower[0]] + [x for _, x in pairs])
        # drop flat stretches so the inverse interpolation is well defined
        keep = np.concatenate(([True], np.diff(cu) > 0))
        cu, cx = cu[keep], cx[keep]
        probs = probs[(probs > 0) & (probs <= cu[-1])]
        return list(zip(probs.tolist(), np.interp(probs, cu, cx).tolist()))

    def with_counts(self, counts, means=None):
        return GroupedTable(self.lower, self.upper, counts, means)

    def scaled(self, c):
        return GroupedTable(self.lower * c, self.upper * c, self.counts, self.means * c)


# Linear interpolation ------------------------------------------------------

_BOUNDED, _ATOM, _TAIL = 0, 1, 2


@dataclass(frozen=True)
class PiecewiseDensityFit:
    """Per-bin linear density with an optional exponential tail.

    Segment j puts density ``alpha[j] + beta[j] x`` on its active support
    ``[start[j], stop[j]]``, which is the whole bin unless the linear fit had
    to be floored at zero (``clipped[j]``). Atoms carry their mass at
    ``start[j]``. The tail segment, if any, has exponential scale ``theta``.
    """

    bin_lower: np.ndarray
    bin_upper: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mass: np.ndarray
    cum_start: np.ndarray
    kind: np.ndarray
    clipped: np.ndarray
    theta: float = math.nan
    method: str = field(default="li", init=False)

    @property
    def has_tail(self):
        return bool(self.kind[-1] == _TAIL)

    @property
    def segments(self):
        return [
            (float(a), float(b), (float(lo), float(hi)))
            for a, b, lo, hi, k in zip(self.alpha, self.beta, self.bin_lower, self.bin_upper, self.kind)
            if k == _BOUNDED
        ]

    @property
    def tail(self):
        if not self.has_tail:
            return None
        return (float(self.mass[-1]), float(self.bin_lower[-1] + self.theta), float(self.bin_lower[-1]))

    def cdf(self, x):
        return li_cdf(self, x)

    def quantile(self, u):
        return li_quantile(self, u)

    def pdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        j = np.clip(np.searchsorted(self.bin_lower, xa, side="right") - 1, 0, None)
        below = xa < self.bin_lower[0]
        lin = self.alpha[j] + self.beta[j] * xa
        inside = (xa >= self.start[j]) & (xa <= self.stop[j]) & (self.kind[j] == _BOUNDED)
        dens = np.where(inside, lin, 0.0)
        if self.has_tail:
            a = self.bin_lower[-1]
            tail = self.mass[-1] / self.theta * np.exp(-(xa - a) / self.theta)
            dens = np.where(j == self.kind.size - 1, np.where(xa >= a, tail, 0.0), dens)
        dens = np.where(below, 0.0, dens)
        return float(dens) if np.ndim(x) == 0 else dens

    @property
    def median(self):
        return float(self.quantile(0.5))

    def segment_masses(self):
        """Integral of every segment over its support, computed from alpha/beta."""
        s, t = self.start, self.stop
        with np.errstate(invalid="ignore"):
            lin = self.alpha * (t - s) + 0.5 * self.beta * (t - s) * (t + s)
        out = np.where(self.kind == _BOUNDED, lin, self.mass)
        return out


def li_fit(g):
    """Linear-interpolation density for a grouped table with bin means."""
    if not isinstance(g, GroupedTable):
        raise DomainError("li_fit expects a GroupedTable")
    if not g.has_means:
        raise UnsupportedMethodError(
            "linear interpolation needs a mean for every occupied bin; "
            "use the GLD percentile-matching fit (gld_fit) instead"
        )
    q = g.proportions
    J = g.n_bins
    lo, hi = g.lower, g.upper
    width = hi - lo
    kind = np.where(g.is_atom, _ATOM, _BOUNDED)
    tail = bool(np.isinf(hi[-1]))
    if tail:
        kind[-1] = _TAIL
    if np.any((width == 0) & (kind == _BOUNDED) & (q > 0)):
        raise DomainError("zero-width bin outside the first position")
    mass = q.copy()
    cum = np.concatenate(([0.0], np.cumsum(mass)[:-1]))
    # the last segment absorbs rounding so the total is exactly one
    mass[-1] = max(1.0 - cum[-1], 0.0)
    start = lo.copy()
    stop = np.where(kind == _TAIL, math.inf, hi)
    alpha = np.zeros(J)
    beta = np.zeros(J)
    clipped = np.zeros(J, dtype=bool)
    for j in range(J):
        if kind[j] != _BOUNDED:
            continue
        if mass[j] == 0.0:
            stop[j] = start[j]
            continue
        w = width[j]
        xc = 0.5 * (lo[j] + hi[j])
        b = mass[j] * 12.0 * (g.means[j] - xc) / w ** 3
        a = mass[j] / w - b * xc
        f_lo, f_hi = a + b * lo[j], a + b * hi[j]
        if f_lo < 0.0 or f_hi < 0.0:
            # floor the negative part at zero and rescale to keep the bin mass
            x0 = -a / b
            if f_lo < 0.0:
                start[j] = x0
            else:
                stop[j] = x0
            s, t = start[j], stop[j]
            m = a * (t - s) + 0.5 * b * (t - s) * (t + s)
            a, b = a * mass[j] / m, b * mass[j] / m
            clipped[j] = True
        alpha[j], beta[j] = a, b
    theta = math.nan
    if tail:
        if mass[-1] > 0:
            mj = g.means[-1]
            if not mj > lo[-1]:
                raise DomainError("last-bin mean must exceed its lower bound")
            theta = float(mj - lo[-1])
        else:
            theta = 1.0
    return PiecewiseDensityFit(lo, hi, start, stop, alpha, beta, mass, cum, kind, clipped, theta)


def li_cdf(fit, x):
    xa = np.asarray(x, dtype=np.float64)
    j = np.searchsorted(fit.bin_lower, xa, side="right") - 1
    below = j < 0
    j = np.clip(j, 0, None)
    s, t = fit.start[j], fit.stop[j]
    y = np.clip(xa, s, t)
    lin = fit.alpha[j] * (y - s) + 0.5 * fit.beta[j] * (y - s) * (y + s)
    kind = fit.kind[j]
    part = np.where(xa >= t, fit.mass[j], lin)
    part = np.where(kind == _ATOM, np.where(xa >= s, fit.mass[j], 0.0), part)
    if fit.has_tail:
        a = fit.bin_lower[-1]
        with np.errstate(over="ignore"):
            tail = fit.mass[-1] * -np.expm1(-(np.maximum(xa, a) - a) / fit.theta)
        part = np.where(kind == _TAIL, tail, part)
    out = np.where(below, 0.0, np.minimum(fit.cum_start[j] + part, 1.0))
    return float(out) if np.ndim(x) == 0 else out


def li_quantile(fit, u):
    ua = np.asarray(u, dtype=np.float64)
    if np.any(~((ua > 0.0) & (ua < 1.0))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    ends = fit.cum_start + fit.mass
    j = np.minimum(np.searchsorted(ends, ua, side="left"), fit.kind.size - 1)
    v = np.maximum(ua - fit.cum_start[j], 0.0)
    s, t = fit.start[j], fit.stop[j]
    a, b = fit.alpha[j], fit.beta[j]
    fs = a + b * s
    root = np.sqrt(np.maximum(fs * fs + 2.0 * b * v, 0.0))
    denom = fs + root
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(denom > 0, 2.0 * v / denom, 0.0)
    x = np.clip(s + step, s, t)
    kind = fit.kind[j]
    x = np.where(kind == _ATOM, s, x)
    if fit.has_tail:
        mj = fit.mass[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = fit.bin_lower[-1] - fit.theta * np.log1p(-np.minimum(v / mj, 1.0))
        x = np.where(kind == _TAIL, tail, x)
    return float(x) if np.ndim(u) == 0 else x


# GLD percentile matching ---------------------------------------------------

@dataclass(frozen=True)
class GLDFit:
    lam: float
    eta: float
    alpha: float
    beta: float
    objective: float
    starts: int = 1
    method: str = field(default="gld", init=False)

    @property
    def model(self):
        return GLD(self.lam, self.eta, self.alpha, self.beta)

    def quantile(self, u):
        return self.model.quantile(u)

    def cdf(self, x):
        return self.model.cdf(x)

    def pdf(self, x):
        return self.model.pdf(x)

    @property
    def median(self):
        return self.model.median


def _check_pairs(pairs):
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("quantile pairs must be a sequence of (u, x)")
    u, x = np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])
    if u.size < 4:
        raise DomainError("GLD fitting needs at least four quantile pairs")
    if np.any(~((u > 0) & (u < 1))) or np.any(np.diff(u) <= 0):
        raise DomainError("probabilities must be strictly increasing inside (0, 1)")
    if np.any(~np.isfinite(x)) or np.any(np.diff(x) <= 0):
        raise DomainError("quantile values must be strictly increasing in u")
    return u, x


def _valid_shapes(lam, s, alpha, beta):
    if not (math.isfinite(lam) and math.isfinite(s) and s > 0):
        return False
    q = kernels.gld_quantile(_VALIDATION_GRID, lam, 1.0 / s, alpha, beta)
    return bool(np.all(np.isfinite(q)) and np.all(np.diff(q) > 0))


def gld_fit(pairs, starts=None):
    """Least-squares percentile matching of the FKML GLD.

    Location and inverse scale are profiled out by linear least squares, so
    Nelder-Mead only searches the two shapes. ``starts`` defaults to a 5x5
    grid over [-0.5, 1.5]^2; the best valid optimum wins.
    """
    u, x = _check_pairs(pairs)
    starts = GLD_START_GRID if starts is None else tuple(starts)
    best = None
    best_invalid = None
    for a0, b0 in starts:
        a, b, _, _ = kernels.gld_nelder_mead(u, x, float(a0), float(b0))
        sse, lam, s = kernels.gld_profile(a, b, u, x)
        sse = float(sse)
        cand = (sse, lam, s, a, b)
        if math.isfinite(sse) and _valid_shapes(lam, s, a, b):
            if best is None or sse < best[0]:
                best = cand
        elif best_invalid is None or (math.isfinite(sse) and sse < best_invalid[0]):
            best_invalid = cand
    if best is None:
        diag = {}
        if best_invalid is not None:
            diag = dict(zip(("objective", "lam", "inv_eta", "alpha", "beta"), best_invalid))
        raise FitError("no valid GLD fit from any starting point", diag)
    sse, lam, s, a, b = best
    return GLDFit(float(lam), float(1.0 / s), float(a), float(b), sse, len(starts))


def _warm_starts(u, x, previous):
    # the previous optimum plus the best grid point by profiled objective
    scores = [float(kernels.gld_profile(a, b, u, x)[0]) for a, b in GLD_START_GRID]
    grid_best = GLD_START_GRID[int(np.argmin(scores))]
    starts = [grid_best]
    if previous is not None:
        starts.insert(0, (previous.alpha, previous.beta))
    return starts


def _grouped_pairs(g, pairs):
    if pairs == "deciles":
        return g.quantile_pairs(DECILES)
    if pairs == "boundaries":
        return g.boundary_pairs()
    raise DomainError(f"pairs must be 'deciles' or 'boundaries', got {pairs!r}")


def gld_fit_grouped(g, starts=None, pairs="deciles"):
    """GLD fit to a grouped table.

    By default the fit matches the deciles read off the ogive; with
    ``pairs="boundaries"`` it matches the raw (cumulative proportion,
    boundary) pairs instead.
    """
    return gld_fit(_grouped_pairs(g, pairs), starts)


def fit_grouped(g, method, pairs="deciles"):
    method = str(method).lower()
    if method == "li":
        return li_fit(g)
    if method == "gld":
        return gld_fit_grouped(g, pairs=pairs)
    raise DomainError(f"unknown grouped method {method!r}; expected 'li' or 'gld'")


def grouped_headcount(fit, p=0.5):
    """Fitted cdf at ``p`` times the fitted median."""
    p = check_fraction(p)
    med = float(fit.quantile(0.5))
    return float(fit.cdf(p * med))


# Grouped bootstrap --------------------------------------------------------

def _rebin(g, x):
    """Counts and means of values ``x`` in the bins of ``g``."""
    J = g.n_bins
    j = np.searchsorted(g.lower, x, side="right") - 1
    j = np.clip(j, 0, J - 1)
    # values sitting on an atom's position belong to the atom only if equal
    counts = np.bincount(j, minlength=J).astype(np.float64)
    sums = np.bincount(j, weights=x, minlength=J)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)
    means = np.where(np.isnan(means), np.nan,
                     np.clip(means, g.lower, np.where(np.isinf(g.upper), np.inf, g.upper)))
    if np.isinf(g.upper[-1]) and counts[-1] > 0 and not means[-1] > g.lower[-1]:
        means[-1] = np.nextafter(g.lower[-1], np.inf)
    return counts, means


def grouped_bootstrap_replicates(fit, g, p, replicates, seed, refit=True, full_starts=False,
                                 pairs="deciles"):
    """Headcount estimates from samples drawn out of the fitted quantile function.

    Each replicate draws ``round(total)`` values by inverse transform. With
    ``refit`` they are re-binned into the bins of ``g`` and the same method is
    fitted again; otherwise the headcount of the drawn values is used
    directly. Returns ``(estimates, failures)``.
    """
    p = check_fraction(p)
    n = int(round(g.total))
    if n < 1:
        raise DomainError("grouped table total must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    is_li = isinstance(fit, PiecewiseDensityFit)
    out = np.empty(int(replicates))
    failures = 0
    for r in range(int(replicates)):
        x = np.asarray(fit.quantile(_open_uniforms(rng, n)))
        try:
            if not refit:
                out[r] = headcount_estimate(Sample(np.maximum(x, 0.0)), p).h_hat
                continue
            counts, means = _rebin(g, x)
            table = g.with_counts(counts, means if is_li else None)
            if is_li:
                new = li_fit(table)
            else:
                qp = _grouped_pairs(table, pairs)
                u, xx = _check_pairs(qp)
                starts = None if full_starts else _warm_starts(u, xx, fit)
                new = gld_fit(qp, starts)
            out[r] = grouped_headcount(new, p)
        except (FitError, DomainError):
            failures += 1
            out[r] = np.nan
    return out[~np.isnan(out)], failures


def grouped_bootstrap_interval(fit, g, p=0.5, cfg=None, refit=True, full_starts=False,
                               pairs="deciles"):
    """Percentile interval from :func:`grouped_bootstrap_replicates`.

    Raises :class:`FitError` when more than 10% of the replicates fail.
    """
    cfg = cfg or BootstrapConfig()
    reps, failures = grouped_bootstrap_replicates(
        fit, g, p, cfg.replicates, cfg.seed, refit=refit, full_starts=full_starts,
        pairs=pairs,
    )
    if failures > _MAX_BOOT_FAILURES * cfg.replicates:
        raise FitError(f"{failures} of {cfg.replicates} bootstrap refits failed",
                       {"failures": failures})
    lo, hi = np.quantile(reps, [cfg.lower_percentile, cfg.upper_percentile])
    point = grouped_headcount(fit, p)
    return IntervalEstimate(point, float(lo), float(hi), cfg.level, "grouped_" + fit.method, p)


# Reconstruction -----------------------------------------------------------

def reconstruct_sample(g, seed=0, tail_shape=3.0, scale=1.0):
    """Synthetic complete sample consistent with a grouped table.

    Bin counts (times ``scale``, rounded) are filled with uniform draws in
    bounded bins, repeated values for point-mass bins and Pareto type I draws
    with minimum ``lower[-1]`` and shape ``tail_shape`` for an open last bin.
    """
    if not tail_shape > 0:
        raise DomainError("tail shape must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = np.rint(np.asarray(g.counts) * scale).astype(np.int64)
    parts = []
    J = g.n_bins
    for j in range(J):
        k = int(counts[j])
        if k == 0:
            continue
        lo, hi = g.lower[j], g.upper[j]
        if math.isinf(hi):
            if not lo > 0:
                raise DomainError("open last bin needs a positive lower bound")
            u = _open_uniforms(rng, k)
            parts.append(lo * u ** (-1.0 / tail_shape))
        elif lo == hi:
            parts.append(np.full(k, lo))
        else:
            u = _open_uniforms(rng, k)
            parts.append(np.minimum(lo + (hi - lo) * u, np.nextafter(hi, lo)))
    return Sample(np.concatenate(parts))
