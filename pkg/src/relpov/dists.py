"""Theoretical income distributions and their headcount ratios.

Every model exposes vectorised ``cdf``, ``pdf`` and ``quantile`` plus a
closed-form ``headcount`` where one exists. Models are frozen dataclasses, so
they are hashable and safe to share between worker processes.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, special

from ._backend import kernels
from .errors import DomainError, ParameterError

__all__ = [
    "IncomeModel",
    "Uniform",
    "Lognormal",
    "Exponential",
    "ParetoII",
    "Weibull",
    "Dagum",
    "SinghMaddala",
    "GLD",
    "cdf",
    "pdf",
    "quantile",
    "sample",
    "headcount_true",
    "conditional_mean_below",
    "conditional_mean_above",
    "invert_cdf",
    "parse_model",
    "check_fraction",
]

_TAIL_U = 1.0 - 1e-12


def check_fraction(p, name="p"):
    """Validate a fraction in the open unit interval and return it as float."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {p}")
    return p


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be positive and finite, got {value}")


def _check_u(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    return u


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


@dataclass(frozen=True)
class IncomeModel:
    """Base class. Subclasses implement ``_cdf``, ``_pdf`` and ``_quantile``."""

    family = "base"
    support_lower = 0.0

    def cdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        return _out(self._cdf(xa), x)

    def pdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        return _out(self._pdf(xa), x)

    def quantile(self, u):
        ua = _check_u(u)
        return _out(self._quantile(ua), u)

    @property
    def median(self):
        return float(self._quantile(np.float64(0.5)))

    def headcount(self, p=0.5):
        """Proportion below ``p`` times the median."""
        p = check_fraction(p)
        return float(self._cdf(np.float64(p * self.median)))

    def scaled(self, c):
        """The distribution of ``c * X``."""
        raise NotImplementedError

    def has_finite_mean(self):
        return True

    def spec(self):
        """The CLI specification string, e.g. ``lognormal(0,1)``."""
        vals = ",".join(repr(float(v)) for v in self._params())
        return f"{self.family}({vals})"

    def _params(self):
        return tuple(getattr(self, f) for f in self.__dataclass_fields__)


@dataclass(frozen=True)
class Uniform(IncomeModel):
    a: float = 0.0
    b: float = 1.0
    family = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ParameterError(f"uniform needs a < b, got a={self.a}, b={self.b}")
        if self.a < 0:
            raise ParameterError("income models need non-negative support")

    @property
    def support_lower(self):
        return self.a

    def _cdf(self, x):
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def _pdf(self, x):
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def _quantile(self, u):
        return self.a + u * (self.b - self.a)

    def scaled(self, c):
        _positive("c", c)
        return Uniform(self.a * c, self.b * c)


@dataclass(frozen=True)
class Lognormal(IncomeModel):
    mu: float = 0.0
    sigma: float = 1.0
    family = "lognormal"

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ParameterError("mu must be finite")
        _positive("sigma", self.sigma)

    def _cdf(self, x):
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma
        return special.ndtr(z)

    def _pdf(self, x):
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        z = (np.log(xs) - self.mu) / self.sigma
        dens = np.exp(-0.5 * z * z) / (xs * self.sigma * math.sqrt(2.0 * math.pi))
        return np.where(pos, dens, 0.0)

    def _quantile(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(u))

    def headcount(self, p=0.5):
        p = check_fraction(p)
        return float(special.ndtr(math.log(p) / self.sigma))

    def scaled(self, c):
        _positive("c", c)
        return Lognormal(self.mu + math.log(c), self.sigma)


@dataclass(frozen=True)
class Weibull(IncomeModel):
    """Weibull with shape ``b``: F(x) = 1 - exp(-(x/scale)^b)."""

    b: float = 1.0
    scale: float = 1.0
    family = "weibull"

    def __post_init__(self):
        _positive("b", self.b)
        _positive("scale", self.scale)

    def _cdf(self, x):
        z = np.maximum(x, 0.0) / self.scale
        return -np.expm1(-(z ** self.b))

    def _pdf(self, x):
        pos = x > 0
        z = np.where(pos, x, 1.0) / self.scale
        dens = self.b / self.scale * z ** (self.b - 1.0) * np.exp(-(z ** self.b))
        return np.where(pos, dens, 0.0)

    def _quantile(self, u):
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.b)

    def headcount(self, p=0.5):
        p = check_fraction(p)
        return _weibull_headcount(self.b, p)

    def scaled(self, c):
        _positive("c", c)
        return replace(self, scale=self.scale * c)


def _weibull_headcount(shape, p):
    # 1 - 2^(-p^b), written through expm1 for accuracy
    return float(-math.expm1(-(p ** shape) * math.log(2.0)))


@dataclass(frozen=True)
class Exponential(IncomeModel):
    rate: float = 1.0
    family = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate)

    def _cdf(self, x):
        return -np.expm1(-self.rate * np.maximum(x, 0.0))

    def _pdf(self, x):
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _quantile(self, u):
        return -np.log1p(-u) / self.rate

    def headcount(self, p=0.5):
        # identical expression to Weibull with shape 1
        p = check_fraction(p)
        return _weibull_headcount(1.0, p)

    def scaled(self, c):
        _positive("c", c)
        return Exponential(self.rate / c)


@dataclass(frozen=True)
class ParetoII(IncomeModel):
    """Type II (Lomax) Pareto: F(x) = 1 - (1 + x/scale)^(-a)."""

    a: float = 1.0
    scale: float = 1.0
    family = "pareto"

    def __post_init__(self):
        _positive("a", self.a)
        _positive("scale", self.scale)

    def _cdf(self, x):
        z = np.maximum(x, 0.0) / self.scale
        return -np.expm1(-self.a * np.log1p(z))

    def _pdf(self, x):
        pos = x >= 0
        z = np.where(pos, x, 0.0) / self.scale
        return np.where(pos, self.a / self.scale * (1.0 + z) ** (-self.a - 1.0), 0.0)

    def _quantile(self, u):
        return self.scale * np.expm1(-np.log1p(-u) / self.a)

    def headcount(self, p=0.5):
        p = check_fraction(p)
        m = math.expm1(math.log(2.0) / self.a)
        return float(-math.expm1(-self.a * math.log1p(p * m)))

    def has_finite_mean(self):
        return self.a > 1.0

    def scaled(self, c):
        _positive("c", c)
        return replace(self, scale=self.scale * c)


@dataclass(frozen=True)
class Dagum(IncomeModel):
    """Dagum: F(x) = (1 + (x/b)^(-a))^(-p)."""

    a: float = 1.0
    b: float = 1.0
    p: float = 1.0
    family = "dagum"

    def __post_init__(self):
        for name in ("a", "b", "p"):
            _positive(name, getattr(self, name))

    def _cdf(self, x):
        pos = x > 0
        z = np.where(pos, x, 1.0) / self.b
        val = np.exp(-self.p * np.log1p(z ** (-self.a)))
        return np.where(pos, val, 0.0)

    def _pdf(self, x):
        pos = x > 0
        z = np.where(pos, x, 1.0) / self.b
        za = z ** (-self.a)
        dens = self.a * self.p / self.b * z ** (-self.a - 1.0) * (1.0 + za) ** (-self.p - 1.0)
        return np.where(pos, dens, 0.0)

    def _quantile(self, u):
        return self.b * np.expm1(-np.log(u) / self.p) ** (-1.0 / self.a)

    def headcount(self, p=0.5):
        frac = check_fraction(p)
        # (x/b)^(-a) at x = frac * median equals frac^(-a) * (2^(1/p) - 1)
        k = math.expm1(math.log(2.0) / self.p)
        return float(math.exp(-self.p * math.log1p(frac ** (-self.a) * k)))

    def has_finite_mean(self):
        return self.a > 1.0

    def scaled(self, c):
        _positive("c", c)
        return replace(self, b=self.b * c)


@dataclass(frozen=True)
class SinghMaddala(IncomeModel):
    """Singh-Maddala (Burr XII): F(x) = 1 - (1 + (x/b)^a)^(-q)."""

    a: float = 1.0
    b: float = 1.0
    q: float = 1.0
    family = "singhmaddala"

    def __post_init__(self):
        for name in ("a", "b", "q"):
            _positive(name, getattr(self, name))

    def _cdf(self, x):
        z = np.maximum(x, 0.0) / self.b
        return -np.expm1(-self.q * np.log1p(z ** self.a))

    def _pdf(self, x):
        pos = x > 0
        z = np.where(pos, x, 1.0) / self.b
        dens = self.a * self.q / self.b * z ** (self.a - 1.0) * (1.0 + z ** self.a) ** (-self.q - 1.0)
        return np.where(pos, dens, 0.0)

    def _quantile(self, u):
        return self.b * np.expm1(-np.log1p(-u) / self.q) ** (1.0 / self.a)

    def headcount(self, p=0.5):
        frac = check_fraction(p)
        k = math.expm1(math.log(2.0) / self.q)
        return float(-math.expm1(-self.q * math.log1p(frac ** self.a * k)))

    def has_finite_mean(self):
        return self.a * self.q > 1.0

    def scaled(self, c):
        _positive("c", c)
        return replace(self, b=self.b * c)


@dataclass(frozen=True)
class GLD(IncomeModel):
    """FKML generalised lambda distribution, defined by its quantile function.

    ``lam`` is location, ``eta`` inverse scale, ``alpha`` and ``beta`` the
    lower and upper tail shapes.
    """

    lam: float = 0.0
    eta: float = 1.0
    alpha: float = 0.1
    beta: float = 0.1
    family = "gld"

    def __post_init__(self):
        _positive("eta", self.eta)
        for name in ("lam", "alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def support_lower(self):
        if self.alpha > 0:
            return self.lam - 1.0 / (self.eta * self.alpha)
        return -math.inf

    def _quantile(self, u):
        return kernels.gld_quantile(u, self.lam, self.eta, self.alpha, self.beta)

    def _cdf(self, x):
        out = kernels.gld_cdf(x, self.lam, self.eta, self.alpha, self.beta)
        return out.reshape(np.shape(x))

    def _pdf(self, x):
        u = np.asarray(self._cdf(x))
        inside = (u > 0) & (u < 1)
        uu = np.where(inside, u, 0.5)
        dq = (uu ** (self.alpha - 1.0) + (1.0 - uu) ** (self.beta - 1.0)) / self.eta
        return np.where(inside, 1.0 / dq, 0.0)

    def has_finite_mean(self):
        return self.alpha > -1.0 and self.beta > -1.0

    def scaled(self, c):
        _positive("c", c)
        return GLD(self.lam * c, self.eta / c, self.alpha, self.beta)


_FAMILIES = {
    "uniform": Uniform,
    "unif": Uniform,
    "lognormal": Lognormal,
    "ln": Lognormal,
    "exponential": Exponential,
    "exp": Exponential,
    "pareto": ParetoII,
    "paretoii": ParetoII,
    "pareto2": ParetoII,
    "weibull": Weibull,
    "dagum": Dagum,
    "singhmaddala": SinghMaddala,
    "singh-maddala": SinghMaddala,
    "sm": SinghMaddala,
    "gld": GLD,
}

_SPEC_RE = re.compile(r"^\s*([A-Za-z][\w-]*)\s*\(([^)]*)\)\s*$")


def parse_model(text):
    """Parse ``family(param,...)`` into an :class:`IncomeModel`.

    >>> parse_model("lognormal(0,1)")
    Lognormal(mu=0.0, sigma=1.0)
    """
    m = _SPEC_RE.match(text)
    if not m:
        raise ParameterError(f"cannot parse model specification {text!r}")
    name = m.group(1).lower().replace("_", "")
    cls = _FAMILIES.get(name)
    if cls is None:
        raise ParameterError(f"unknown income family {m.group(1)!r}")
    raw = [s for s in (t.strip() for t in m.group(2).split(",")) if s]
    try:
        params = [float(s) for s in raw]
    except ValueError as exc:
        raise ParameterError(f"non-numeric parameter in {text!r}") from exc
    if len(params) > len(cls.__dataclass_fields__):
        raise ParameterError(f"too many parameters for {cls.family}")
    return cls(*params)


# Module-level operations -------------------------------------------------

def cdf(model, x):
    return model.cdf(x)


def pdf(model, x):
    return model.pdf(x)


def quantile(model, u):
    return model.quantile(u)


def _open_uniforms(rng, n):
    # k * 2^-53 with k in [1, 2^53) never hits 0 or 1
    return rng.integers(1, 1 << 53, size=n, dtype=np.int64) * 2.0 ** -53


def sample(model, n, seed):
    """Draw ``n`` incomes by inverse transform; deterministic given ``seed``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``numpy`` Generator.
    """
    from .estimate import Sample

    n = int(n)
    if n < 1:
        raise DomainError("sample size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Sample(model._quantile(_open_uniforms(rng, n)), presorted=False)


def headcount_true(model, p=0.5):
    """Population headcount ratio F(p * median)."""
    return model.headcount(p)


def invert_cdf(model, u, tol=1e-10):
    """Numerical quantile by bracketed bisection on a monotone cdf.

    The bracket starts at the median and is doubled/halved until it contains
    the target. Used as an independent check of the closed-form quantiles.
    """
    u = float(_check_u(u))
    guess = max(model.median, 1e-300)
    lo, hi = guess, guess
    for _ in range(2000):
        if model.cdf(lo) <= u:
            break
        lo *= 0.5
    for _ in range(2000):
        if model.cdf(hi) >= u:
            break
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = model.cdf(mid)
        if abs(fm - u) <= tol and hi - lo <= 1e-12 * max(1.0, abs(mid)):
            return mid
        if fm < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _partial_mean(model, lo, hi):
    val, _ = integrate.quad(lambda t: t * model.pdf(t), lo, hi,
                            epsabs=0.0, epsrel=1e-11, limit=500)
    return val


def _interior_points(model, lo, hi):
    # split the integration range at a few quantiles so quad sees the bulk
    pts = [lo]
    for u in (0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 0.99999):
        x = model.quantile(u)
        if lo < x < hi:
            pts.append(x)
    pts.append(hi)
    return pts


def _piecewise_mean(model, lo, hi):
    pts = _interior_points(model, lo, hi)
    return sum(_partial_mean(model, a, b) for a, b in zip(pts[:-1], pts[1:]))


def conditional_mean_below(model, t):
    """E[X | X < t] by adaptive quadrature."""
    mass = model.cdf(t)
    if not mass > 1e-14:
        raise DomainError(f"P(X < {t}) is zero; conditional mean undefined")
    lo = model.support_lower if math.isfinite(model.support_lower) else model.quantile(1e-12)
    return _piecewise_mean(model, lo, t) / mass


def conditional_mean_above(model, t):
    """E[X | X > t], integrating up to the (1 - 1e-12) quantile."""
    mass = 1.0 - model.cdf(t)
    if not mass > 1e-14:
        raise DomainError(f"P(X > {t}) is zero; conditional mean undefined")
    if not model.has_finite_mean():
        raise DomainError(f"{model.family} model has an infinite mean")
    hi = model.quantile(_TAIL_U)
    if hi <= t:
        raise DomainError("threshold lies beyond the integrable tail")
    return _piecewise_mean(model, t, hi) / mass
