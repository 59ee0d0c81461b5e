"""Monte Carlo studies of interval coverage and grouped-data bias.

Work is split into units of ``(distribution, n, replicates)``. Every
replicate draws one sample from a seed derived from
``(master_seed, crc32(distribution name), n, replicate)``, and all methods
and poverty fractions of that unit are evaluated on the same sample. Results
are reduced in replicate order, so the output is bitwise identical for any
number of workers.
"""
from __future__ import annotations

import csv
import io
import math
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import dists
from .dists import check_fraction, headcount_true, parse_model
from .errors import DomainError, FitError
from .grouped import (
    GroupedTable,
    fit_grouped,
    grouped_bootstrap_interval,
    grouped_bootstrap_replicates,
    grouped_headcount,
)
from .intervals import BootstrapConfig, interval, parse_method

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "NAMED_DISTRIBUTIONS",
    "Grouping",
    "StudyConfig",
    "CellResult",
    "StudyResult",
    "run_study",
    "run_coverage_study",
    "run_grouped_bias_study",
    "run_grouped_coverage_study",
    "load_config",
    "replicate_seed",
    "FLAG_FAILURE_SHARE",
]

NAMED_DISTRIBUTIONS = {
    "LN": dists.Lognormal(0.0, 1.0),
    "EXP": dists.Exponential(1.0),
    "Pareto1": dists.ParetoII(1.0),
    "Pareto2": dists.ParetoII(2.0),
    "Dagum": dists.Dagum(4.273, 14.28, 0.36),
    "SM": dists.SinghMaddala(1.6971, 87.6981, 8.3679),
}
_NAME_ALIASES = {
    "ln(0,1)": "LN",
    "lognormal": "LN",
    "exp(1)": "EXP",
    "exponential": "EXP",
    "pareto(1)": "Pareto1",
    "pareto(2)": "Pareto2",
    "singh-maddala": "SM",
    "singhmaddala": "SM",
}

KINDS = ("coverage", "grouped_bias", "grouped_coverage")
GROUPED_METHODS = ("li", "gld")
FLAG_FAILURE_SHARE = 0.05


def resolve_distribution(name):
    """Model for a registry name, an alias, or a ``family(params)`` string."""
    if name in NAMED_DISTRIBUTIONS:
        return name, NAMED_DISTRIBUTIONS[name]
    key = name.strip().lower()
    for reg in NAMED_DISTRIBUTIONS:
        if reg.lower() == key:
            return reg, NAMED_DISTRIBUTIONS[reg]
    if key in _NAME_ALIASES:
        reg = _NAME_ALIASES[key]
        return reg, NAMED_DISTRIBUTIONS[reg]
    return name, parse_model(name)


@dataclass(frozen=True)
class Grouping:
    """How each replicate sample is binned for the grouped studies."""

    bins: int = 10
    with_means: bool = True

    def __post_init__(self):
        if self.bins < 2:
            raise DomainError("grouping needs at least two bins")

    def apply(self, s):
        return GroupedTable.from_sample(s, self.bins, with_means=self.with_means)


@dataclass(frozen=True)
class StudyConfig:
    """Declarative description of a simulation study.

    Cells are the cross product of ``methods``, ``distributions``,
    ``p_values`` and ``sample_sizes`` unless ``cells`` lists
    ``(method, distribution, p, n)`` tuples explicitly. ``distributions``
    maps display names to models; plain names are resolved through
    :data:`NAMED_DISTRIBUTIONS`.
    """

    kind: str = "coverage"
    distributions: dict = field(default_factory=dict)
    methods: tuple = ()
    p_values: tuple = (0.5,)
    sample_sizes: tuple = ()
    replications: int = 500
    bootstrap_replicates: int = 200
    level: float = 0.95
    master_seed: int = 0
    grouping: Grouping | None = None
    cells: tuple | None = None
    workers: int = 1
    chunk_size: int = 50
    references: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown study kind {self.kind!r}; expected one of {KINDS}")
        if self.replications < 0:
            raise DomainError("replications must be non-negative")
        if self.workers < 1 or self.chunk_size < 1:
            raise DomainError("workers and chunk_size must be positive")
        dist_map = {}
        for name, model in dict(self.distributions).items():
            if model is None:
                name, model = resolve_distribution(name)
            if name in dist_map:
                raise DomainError(f"duplicate distribution name {name!r}")
            dist_map[name] = model
        cells = self.cells
        if cells is not None:
            cells = tuple((str(m), str(d), float(p), int(n)) for m, d, p, n in cells)
            for _, d, _, _ in cells:
                if d not in dist_map:
                    name, model = resolve_distribution(d)
                    dist_map.setdefault(d, model)
        object.__setattr__(self, "distributions", dist_map)
        object.__setattr__(self, "cells", cells)
        methods = tuple(self._norm_method(m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        if self.kind != "coverage" and self.grouping is None:
            object.__setattr__(self, "grouping", Grouping())
        for _, _, p, n in self.expand():
            check_fraction(p)
            if n < 2:
                raise DomainError("sample sizes must be at least 2")

    def _norm_method(self, m):
        if self.kind == "coverage":
            return str(parse_method(m))
        m = str(m).lower()
        if m not in GROUPED_METHODS:
            raise DomainError(f"grouped studies support {GROUPED_METHODS}, got {m!r}")
        return m

    def expand(self):
        """Ordered list of ``(method, distribution, p, n)`` cells."""
        if self.cells is not None:
            return [(self._norm_method(m), d, p, n) for m, d, p, n in self.cells]
        return [
            (m, d, float(p), int(n))
            for m in self.methods
            for p in self.p_values
            for d in self.distributions
            for n in self.sample_sizes
        ]


@dataclass(frozen=True)
class CellResult:
    """Summary of one ``(method, distribution, p, n)`` cell.

    Coverage studies fill ``coverage``, ``mean_width`` and ``mc_stderr``;
    bias studies fill ``mse``, ``bias``, ``mean_abs_bias`` and ``sd``.
    ``mean_abs_bias`` is the absolute value of the mean error.
    """

    method: str
    distribution: str
    p: float
    n: int
    truth: float
    replications: int
    failures: int
    flagged: bool
    coverage: float = math.nan
    mean_width: float = math.nan
    mc_stderr: float = math.nan
    mean_estimate: float = math.nan
    mse: float = math.nan
    bias: float = math.nan
    mean_abs_bias: float = math.nan
    sd: float = math.nan
    mean_boot_se: float = math.nan

    @property
    def key(self):
        return (self.method, self.distribution, self.p, self.n)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class StudyResult:
    kind: str
    cells: tuple
    elapsed: float = field(default=0.0, compare=False)

    def cell(self, method, distribution, p, n):
        for c in self.cells:
            if c.key == (method, distribution, float(p), int(n)):
                return c
        raise KeyError((method, distribution, p, n))

    def to_csv(self):
        buf = io.StringIO()
        names = [f.name for f in fields(CellResult)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for c in self.cells:
            w.writerow([_fmt(getattr(c, k)) for k in names])
        return buf.getvalue()

    def to_text(self):
        """Table with one row per (method, p, distribution) and one column per n."""
        if not self.cells:
            return "(no cells)\n"
        sizes = sorted({c.n for c in self.cells})
        rows = {}
        for c in self.cells:
            rows.setdefault((c.method, c.p, c.distribution), {})[c.n] = c
        head = ["method", "p", "F"] + [f"n={n}" for n in sizes]
        body = []
        for (m, p, d), by_n in rows.items():
            line = [m, f"{p:g}", d]
            for n in sizes:
                c = by_n.get(n)
                if c is None:
                    line.append("")
                elif self.kind == "grouped_bias":
                    line.append(f"{c.mse:.3f} ({c.mean_abs_bias:.3f})")
                else:
                    mark = "*" if c.flagged else ""
                    line.append(f"{c.coverage:.3f} ({c.mean_width:.3f}){mark}")
            body.append(line)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        out = io.StringIO()
        for r in [head] + body:
            out.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")
        return out.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def replicate_seed(master_seed, distribution, n, rep):
    """SeedSequence for one replicate; independent of scheduling."""
    tag = zlib.crc32(str(distribution).encode("utf-8"))
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, tag, int(n), int(rep)])


# Replicate evaluation -----------------------------------------------------

# per task: estimate, lower, upper, bootstrap standard error
_NAN4 = (math.nan, math.nan, math.nan, math.nan)


def _coverage_task(s, method, p, level, boot_seq, boot_reps):
    cfg = None
    if method == "bootstrap":
        cfg = BootstrapConfig.for_level(level, boot_reps, np.random.default_rng(boot_seq))
    est = interval(s, method, p, level, cfg)
    return (est.point, est.lower, est.upper, math.nan)


def _grouped_fit(g, method, fits):
    if method not in fits:
        try:
            fits[method] = fit_grouped(g, method)
        except (DomainError, FitError) as exc:
            fits[method] = exc
    fit = fits[method]
    if isinstance(fit, Exception):
        raise fit
    return fit


def _grouped_task(kind, g, method, p, level, boot_seq, boot_reps, fits):
    fit = _grouped_fit(g, method, fits)
    h = grouped_headcount(fit, p)
    if kind == "grouped_bias":
        if boot_reps < 2:
            return (h, math.nan, math.nan, math.nan)
        reps, _ = grouped_bootstrap_replicates(fit, g, p, boot_reps,
                                               np.random.default_rng(boot_seq))
        return (h, math.nan, math.nan, float(np.std(reps, ddof=1)))
    cfg = BootstrapConfig.for_level(level, boot_reps, np.random.default_rng(boot_seq))
    ci = grouped_bootstrap_interval(fit, g, p, cfg)
    return (h, ci.lower, ci.upper, math.nan)


def _run_unit(args):
    """Evaluate ``tasks`` for a block of replicates of one (distribution, n)."""
    kind, master_seed, dname, model, n, reps, tasks, level, boot_reps, grouping = args
    out = np.full((len(reps), len(tasks), 4), np.nan)
    for i, rep in enumerate(reps):
        sample_seq, boot_seq = replicate_seed(master_seed, dname, n, rep).spawn(2)
        s = dists.sample(model, n, np.random.default_rng(sample_seq))
        g = grouping.apply(s) if grouping is not None else None
        fits = {}
        for j, (method, p) in enumerate(tasks):
            try:
                if kind == "coverage":
                    out[i, j] = _coverage_task(s, method, p, level, boot_seq, boot_reps)
                else:
                    out[i, j] = _grouped_task(kind, g, method, p, level, boot_seq,
                                              boot_reps, fits)
            except (DomainError, FitError):
                out[i, j] = _NAN4
    return out


def _summarize(kind, cell, truth, rows, boot_reps):
    method, dname, p, n = cell
    reps = rows.shape[0]
    ok = ~np.isnan(rows[:, 0])
    k = int(ok.sum())
    failures = reps - k
    flagged = reps > 0 and failures > FLAG_FAILURE_SHARE * reps
    base = dict(method=method, distribution=dname, p=p, n=n, truth=truth,
                replications=reps, failures=failures, flagged=flagged)
    if k == 0:
        return CellResult(**base)
    est = rows[ok, 0]
    err = est - truth
    stats = dict(mean_estimate=float(est.mean()), mse=float(np.mean(err * err)),
                 bias=float(err.mean()), mean_abs_bias=float(abs(err.mean())),
                 sd=float(est.std(ddof=1)) if k > 1 else 0.0)
    if kind == "grouped_bias":
        if boot_reps >= 2:
            stats["mean_boot_se"] = float(np.mean(rows[ok, 3]))
    else:
        lo, hi = rows[ok, 1], rows[ok, 2]
        cov = float(np.mean((lo <= truth) & (truth <= hi)))
        stats.update(coverage=cov, mean_width=float(np.mean(hi - lo)),
                     mc_stderr=math.sqrt(cov * (1.0 - cov) / k))
    return CellResult(**base, **stats)


def run_study(cfg):
    """Run every cell of ``cfg`` and return a :class:`StudyResult`."""
    t0 = time.perf_counter()
    cells = cfg.expand()
    groups = {}
    for cell in cells:
        method, dname, p, n = cell
        groups.setdefault((dname, n), [])
        if (method, p) not in groups[(dname, n)]:
            groups[(dname, n)].append((method, p))
    reps = int(cfg.replications)
    units = []
    for (dname, n), tasks in groups.items():
        model = cfg.distributions[dname]
        for start in range(0, reps, cfg.chunk_size):
            block = tuple(range(start, min(reps, start + cfg.chunk_size)))
            units.append(((dname, n), (cfg.kind, cfg.master_seed, dname, model, n, block,
                                       tuple(tasks), cfg.level, cfg.bootstrap_replicates,
                                       cfg.grouping)))
    if cfg.workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(_run_unit, [u[1] for u in units]))
    else:
        outputs = [_run_unit(u[1]) for u in units]
    # concatenate blocks in replicate order; the reduction never sees scheduling order
    stacked = {}
    for (key, args), out in zip(units, outputs):
        stacked.setdefault(key, []).append((args[5][0], out))
    merged = {}
    for key, parts in stacked.items():
        parts.sort(key=lambda t: t[0])
        merged[key] = np.concatenate([o for _, o in parts], axis=0)
    results = []
    for cell in cells:
        method, dname, p, n = cell
        tasks = groups[(dname, n)]
        j = tasks.index((method, p))
        rows = merged.get((dname, n), np.empty((0, len(tasks), 4)))[:, j, :]
        truth = headcount_true(cfg.distributions[dname], p)
        results.append(_summarize(cfg.kind, cell, truth, rows, cfg.bootstrap_replicates))
    return StudyResult(cfg.kind, tuple(results), time.perf_counter() - t0)


def _with_kind(cfg, kind):
    if cfg.kind == kind:
        return cfg
    kw = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    kw["kind"] = kind
    return StudyConfig(**kw)


def run_coverage_study(cfg):
    """Coverage and mean width of complete-sample intervals."""
    return run_study(_with_kind(cfg, "coverage"))


def run_grouped_bias_study(cfg):
    """MSE and bias of grouped-data headcount estimates."""
    return run_study(_with_kind(cfg, "grouped_bias"))


def run_grouped_coverage_study(cfg):
    """Coverage of grouped bootstrap intervals."""
    return run_study(_with_kind(cfg, "grouped_coverage"))


# Config files -------------------------------------------------------------

def load_config(path_or_text, **overrides):
    """Build a :class:`StudyConfig` from a TOML file (or TOML text).

    Top-level keys mirror the config fields. ``[grouping]`` sets the
    binning. ``[distributions]`` maps display names to ``family(params)``
    strings. Each ``[[cell]]`` table lists ``method``, ``distribution``,
    ``p``, ``n`` and optionally ``reference_coverage``, ``reference_width``,
    ``reference_bias`` or ``undercoverage``, which are kept in
    ``StudyConfig.references``.
    """
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str)
                                          and "\n" not in path_or_text):
        try:
            text = Path(path_or_text).read_text()
        except OSError as exc:
            raise DomainError(f"cannot read study config {path_or_text}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise DomainError(f"malformed study config: {exc}") from exc
    kw = {}
    for key in ("kind", "replications", "bootstrap_replicates", "level", "master_seed",
                "workers", "chunk_size"):
        if key in raw:
            kw[key] = raw[key]
    for key in ("methods", "p_values", "sample_sizes"):
        if key in raw:
            kw[key] = tuple(raw[key])
    dmap = {}
    for name in raw.get("distribution_names", []):
        dmap[name] = None
    for name, spec in raw.get("distributions", {}).items():
        dmap[name] = parse_model(spec)
    kw["distributions"] = dmap
    if "grouping" in raw:
        kw["grouping"] = Grouping(**raw["grouping"])
    if "cell" in raw:
        cells, refs = [], {}
        for c in raw["cell"]:
            key = (c["method"], c["distribution"], float(c["p"]), int(c["n"]))
            cells.append(key)
            ref = {k[len("reference_"):]: v for k, v in c.items() if k.startswith("reference_")}
            if "undercoverage" in c:
                ref["undercoverage"] = bool(c["undercoverage"])
            if ref:
                refs[key] = ref
        kw["cells"] = tuple(cells)
        kw["references"] = refs
    kw.update(overrides)
    cfg = StudyConfig(**kw)
    # normalise reference keys to the canonical method names
    refs = {(cfg._norm_method(m), d, p, n): v for (m, d, p, n), v in cfg.references.items()}
    object.__setattr__(cfg, "references", refs)
    return cfg
