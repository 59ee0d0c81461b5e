"""Relative-poverty headcount ratio toolkit.

The headcount ratio ``H_p = F(p * median)`` is the share of a population
whose income is at most ``p`` times the median. The package covers
parametric truths (:mod:`relpov.dists`), estimation from a complete sample
(:mod:`relpov.estimate`), confidence intervals (:mod:`relpov.intervals`),
grouped data (:mod:`relpov.grouped`), a flat-tax transfer analysis
(:mod:`relpov.transfer`) and Monte Carlo studies (:mod:`relpov.simlab`).
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .dists import (
    GLD,
    Dagum,
    Exponential,
    IncomeModel,
    Lognormal,
    ParetoII,
    SinghMaddala,
    Uniform,
    Weibull,
    headcount_true,
    parse_model,
    sample,
)
from .errors import (
    DomainError,
    FitError,
    InfeasibleTransferError,
    IngestError,
    ParameterError,
    RelpovError,
    UnsupportedMethodError,
)
from .estimate import Sample, headcount_estimate, quantile_density, standard_errors
from .grouped import GroupedTable, fit_grouped, gld_fit, grouped_headcount, li_fit
from .ingest import ingest
from .intervals import BootstrapConfig, IntervalEstimate, Method, interval
from .transfer import apply_transfer, plan_transfer, transfer_budget_report

__all__ = [
    "BACKEND",
    "GLD",
    "Dagum",
    "Exponential",
    "IncomeModel",
    "Lognormal",
    "ParetoII",
    "SinghMaddala",
    "Uniform",
    "Weibull",
    "headcount_true",
    "parse_model",
    "sample",
    "DomainError",
    "FitError",
    "InfeasibleTransferError",
    "IngestError",
    "ParameterError",
    "RelpovError",
    "UnsupportedMethodError",
    "Sample",
    "headcount_estimate",
    "quantile_density",
    "standard_errors",
    "GroupedTable",
    "fit_grouped",
    "gld_fit",
    "grouped_headcount",
    "li_fit",
    "ingest",
    "BootstrapConfig",
    "IntervalEstimate",
    "Method",
    "interval",
    "apply_transfer",
    "plan_transfer",
    "transfer_budget_report",
]
