"""Flat-tax transfer that lifts every income to the poverty line.

Incomes at or below the line ``L = p * median`` are raised to ``L``; incomes
above a cutoff ``c = Q(u_c)`` pay a flat rate ``r``. The rate balances the
per-capita shortfall ``T = L - E[X | X < L]`` against ``r * E[X | X > c]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import check_fraction, conditional_mean_above, conditional_mean_below
from .errors import DomainError, InfeasibleTransferError
from .estimate import Sample

__all__ = [
    "TransferPlan",
    "BudgetReport",
    "plan_transfer",
    "plan_transfer_empirical",
    "apply_transfer",
    "transfer_map",
    "post_transfer_headcount",
    "transfer_budget_report",
]


@dataclass(frozen=True)
class TransferPlan:
    """Parameters of the transfer map for one source model.

    Attributes
    ----------
    poverty_line : float
        ``L = p * median``.
    cutoff : float
        Incomes strictly above ``c`` are taxed.
    rate : float
        Flat tax rate ``r`` in (0, 1).
    shortfall : float
        Mean shortfall ``T`` of the poor.
    cutoff_quantile : float
        ``u_c`` with ``c = Q(u_c)``.
    p : float
        Fraction of the median defining the line.
    median : float
        Median of the source model.
    mean_below : float
        ``E[X | X < L]``.
    mean_above : float
        ``E[X | X > c]``.
    """

    poverty_line: float
    cutoff: float
    rate: float
    shortfall: float
    cutoff_quantile: float
    p: float
    median: float
    mean_below: float
    mean_above: float

    @property
    def is_monotone(self):
        """Whether the taxed branch stays above the line, ``(1 - r) c > L``."""
        return (1.0 - self.rate) * self.cutoff > self.poverty_line

    def as_dict(self):
        return {
            "p": self.p,
            "median": self.median,
            "poverty_line": self.poverty_line,
            "mean_below": self.mean_below,
            "shortfall": self.shortfall,
            "cutoff_quantile": self.cutoff_quantile,
            "cutoff": self.cutoff,
            "mean_above": self.mean_above,
            "rate": self.rate,
        }


def plan_transfer(model, p=0.5, u_c=0.8):
    """Solve the per-capita balance ``T = r * E[X | X > c]`` for ``r``.

    Raises
    ------
    DomainError
        If ``u_c`` is not above one half or the model mean is infinite.
    InfeasibleTransferError
        If the balance needs ``r >= 1``.
    """
    p = check_fraction(p)
    u_c = float(u_c)
    if not 0.5 < u_c < 1.0:
        raise DomainError(f"cutoff quantile must lie in (0.5, 1), got {u_c}")
    med = model.median
    line = p * med
    mean_below = conditional_mean_below(model, line)
    shortfall = line - mean_below
    cutoff = float(model.quantile(u_c))
    mean_above = conditional_mean_above(model, cutoff)
    rate = shortfall / mean_above
    if not rate < 1.0:
        raise InfeasibleTransferError(
            f"balancing the shortfall needs a tax rate of {rate:.6g} >= 1"
        )
    if not shortfall > 0:
        raise DomainError("no shortfall below the poverty line")
    return TransferPlan(line, cutoff, rate, shortfall, u_c, p, med, mean_below, mean_above)


def plan_transfer_empirical(s, p=0.5, u_c=0.8):
    """Sample analogue of :func:`plan_transfer`.

    The line, shortfall, cutoff and taxed-group mean come from ``s`` itself,
    so the transferred sample keeps its median and nobody stays strictly
    below ``p`` times it.
    """
    s = s if isinstance(s, Sample) else Sample(s)
    p = check_fraction(p)
    u_c = float(u_c)
    if not 0.5 < u_c < 1.0:
        raise DomainError(f"cutoff quantile must lie in (0.5, 1), got {u_c}")
    v = s.values
    med = s.median
    line = p * med
    below = v[v < line]
    if below.size == 0:
        raise DomainError("no incomes strictly below the poverty line")
    cutoff = float(np.quantile(v, u_c))
    above = v[v > cutoff]
    if above.size == 0:
        raise DomainError("no incomes above the cutoff")
    mean_below = float(below.mean())
    mean_above = float(above.mean())
    shortfall = line - mean_below
    rate = shortfall / mean_above
    if not rate < 1.0:
        raise InfeasibleTransferError(
            f"balancing the shortfall needs a tax rate of {rate:.6g} >= 1"
        )
    return TransferPlan(line, cutoff, rate, shortfall, u_c, p, med, mean_below, mean_above)


def transfer_map(x, plan):
    """Elementwise transfer: ``L`` below the line, ``(1 - r) x`` above ``c``."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(
        x <= plan.poverty_line,
        plan.poverty_line,
        np.where(x > plan.cutoff, (1.0 - plan.rate) * x, x),
    )


def apply_transfer(s, plan):
    """Transfer every income of ``s``; the result is re-sorted.

    Raises :class:`DomainError` when the plan would reorder incomes, that is
    when ``(1 - r) c <= L``.
    """
    if not plan.is_monotone:
        raise DomainError("plan is not monotone: (1 - r) * cutoff <= poverty line")
    s = s if isinstance(s, Sample) else Sample(s)
    return Sample(transfer_map(s.values, plan))


def post_transfer_headcount(s, plan):
    """Headcounts of a transferred sample under both conventions.

    ``strict_below_line`` and ``at_or_below_line`` use the plan's fixed line.
    The ``relative_*`` entries use ``p`` times the transferred sample's own
    median.
    """
    s = s if isinstance(s, Sample) else Sample(s)
    v, n = s.values, s.n
    rel_line = plan.p * s.median

    def share(line, side):
        return int(np.searchsorted(v, line, side=side)) / n

    return {
        "strict_below_line": share(plan.poverty_line, "left"),
        "at_or_below_line": share(plan.poverty_line, "right"),
        "relative_line": rel_line,
        "relative_strict_below": share(rel_line, "left"),
        "relative_at_or_below": share(rel_line, "right"),
    }


@dataclass(frozen=True)
class BudgetReport:
    """Both funding balances for a transfer plan.

    ``rate_per_capita`` is the plan's rate. ``rate_weighted`` solves
    ``H * T = (1 - u_c) * r * E[X | X > c]``, weighting each side by the share
    of the population it covers.
    """

    headcount: float
    taxed_share: float
    shortfall: float
    mean_above: float
    rate_per_capita: float
    rate_weighted: float
    deficit_per_head: float
    revenue_per_head: float

    def as_dict(self):
        return {
            "headcount": self.headcount,
            "taxed_share": self.taxed_share,
            "shortfall": self.shortfall,
            "mean_above": self.mean_above,
            "rate_per_capita": self.rate_per_capita,
            "rate_weighted": self.rate_weighted,
            "deficit_per_head": self.deficit_per_head,
            "revenue_per_head": self.revenue_per_head,
        }


def transfer_budget_report(model, plan):
    """Compare the per-capita balance with the population-weighted one.

    ``deficit_per_head`` is ``H * T`` and ``revenue_per_head`` is what the
    plan's rate actually raises, ``(1 - u_c) * r * E[X | X > c]``, both per
    member of the whole population.
    """
    h = float(model.cdf(plan.poverty_line))
    taxed = 1.0 - plan.cutoff_quantile
    deficit = h * plan.shortfall
    revenue = taxed * plan.rate * plan.mean_above
    weighted = deficit / (taxed * plan.mean_above)
    return BudgetReport(h, taxed, plan.shortfall, plan.mean_above, plan.rate, weighted,
                        deficit, revenue)
