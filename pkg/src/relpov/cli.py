"""Command-line interface: ``relpov <subcommand> [options]``.

Exit status is 0 on success, 1 when the data or parameters fall outside a
method's domain, and 2 for unreadable or malformed input and usage errors.
Numbers are printed with six significant digits.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dists import parse_model, sample
from .errors import IngestError, RelpovError
from .estimate import MIN_SE_SIZE, headcount_estimate, standard_errors
from .grouped import (
    GroupedTable,
    PiecewiseDensityFit,
    fit_grouped,
    grouped_bootstrap_interval,
    grouped_headcount,
    reconstruct_sample,
)
from .ingest import ingest
from .intervals import (
    BootstrapConfig,
    bootstrap_replicates,
    difference_interval,
    interval,
    parse_methods,
)
from .simlab import load_config, run_study
from .transfer import (
    apply_transfer,
    plan_transfer,
    post_transfer_headcount,
    transfer_budget_report,
)

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2
DEFAULT_CI_METHODS = "wald2,bootstrap"

_EPILOG = """\
formats:
  json   one JSON object per record (JSON lines for several records)
  csv    header row plus one row per record
  text   aligned key/value or tabular listing

input files:
  raw incomes   one value per line, or a CSV with an 'income' column
                (pick another with --column); values must be positive
  grouped       header lower,upper,count[,mean]; an empty upper bound marks
                the open last bin; '# bounds: inclusive-integer' reads
                printed integer ranges as [lower, upper + 1)

environment:
  RELPOV_SEED          default for --seed
  RELPOV_PURE_PYTHON   set to 1 to bypass the compiled kernels

exit status:
  0 success, 1 domain error, 2 input or usage error
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fraction(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {v}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _default_seed():
    env = os.environ.get("RELPOV_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise IngestError(f"RELPOV_SEED must be an integer, got {env!r}") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default=None,
                        help="output format (default: json; text for study)")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $RELPOV_SEED or 0)")

    parser = _Parser(
        prog="relpov",
        description="Relative-poverty headcount ratio H_p = F(p * median).",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    p = add("estimate", "point estimate of H_p from raw incomes")
    _input_args(p)
    p.add_argument("--p", type=_fraction, default=0.5, help="poverty-line fraction (0.5)")

    p = add("ci", "confidence intervals for H_p from raw incomes")
    _input_args(p)
    p.add_argument("--p", type=_fraction, default=0.5)
    p.add_argument("--level", type=_fraction, default=0.95)
    p.add_argument("--method", default=DEFAULT_CI_METHODS,
                   help="comma-separated methods: binomial, agresti_coull, clopper_pearson, "
                        f"wilson, wald1, wald2, median_sub, bootstrap ({DEFAULT_CI_METHODS})")
    p.add_argument("--replicates", type=_positive_int, default=500,
                   help="bootstrap replicates (500)")
    p.add_argument("--compare", metavar="PATH",
                   help="second raw file; report intervals for H(input) - H(compare)")

    p = add("grouped", "H_p from a grouped table via LI or GLD")
    p.add_argument("--input", required=True, metavar="PATH")
    p.add_argument("--p", type=_fraction, default=0.5)
    p.add_argument("--method", choices=("li", "gld"), default="gld")
    p.add_argument("--pairs", choices=("deciles", "boundaries"), default="deciles",
                   help="GLD matching points (deciles)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="add a bootstrap interval with B replicates")
    p.add_argument("--level", type=_fraction, default=0.95)

    p = add("transfer", "flat-tax transfer plan for a parametric model")
    p.add_argument("--model", required=True, help='e.g. "lognormal(0, 1)"')
    p.add_argument("--p", type=_fraction, default=0.5)
    p.add_argument("--cutoff-quantile", type=_fraction, default=0.8)
    p.add_argument("--simulate", type=int, default=0, metavar="N",
                   help="also apply the plan to N simulated incomes")

    p = add("reconstruct", "synthetic complete sample from a grouped table")
    p.add_argument("--input", required=True, metavar="PATH")
    p.add_argument("--p", type=_fraction, default=0.5)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply bin counts by this factor before drawing (1)")
    p.add_argument("--tail-shape", type=float, default=3.0,
                   help="Pareto shape for the open last bin (3)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="add a bootstrap standard error with B replicates")
    p.add_argument("--output", metavar="PATH", help="write the incomes here, one per line")

    p = add("study", "run a Monte Carlo study from a TOML config")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--output", metavar="PATH", help="also write the CSV here")
    return parser


def _input_args(p):
    p.add_argument("--input", required=True, metavar="PATH")
    p.add_argument("--column", default=None, help="income column of a CSV input")


# Output -------------------------------------------------------------------

def _sig(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return None
        return float(f"{v:.6g}")
    if isinstance(v, dict):
        return {k: _sig(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_sig(x) for x in v]
    return v


def _text_value(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "nan"
    return str(v)


def emit(records, fmt, out=None):
    """Write ``records`` (a list of flat dicts) in the requested format."""
    out = out or sys.stdout
    records = [_sig(r) for r in records]
    if fmt == "json":
        for r in records:
            out.write(json.dumps(r) + "\n")
    elif fmt == "csv":
        keys = list(dict.fromkeys(k for r in records for k in r))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(keys)
        for r in records:
            w.writerow(["" if r.get(k) is None else _text_value(r[k]) for k in keys])
    else:
        for i, r in enumerate(records):
            if i:
                out.write("\n")
            width = max(len(k) for k in r)
            for k, v in r.items():
                out.write(f"{k.ljust(width)}  {_text_value(v)}\n")


def _flatten(prefix, d):
    return {f"{prefix}{k}": v for k, v in d.items()}


# Subcommands --------------------------------------------------------------

def _raw(path, column=None):
    return ingest(path, "raw", column)


def cmd_estimate(args, seed):
    s = _raw(args.input, args.column)
    rec = headcount_estimate(s, args.p).as_dict()
    if s.n >= MIN_SE_SIZE:
        se = standard_errors(s, args.p)
        rec.update(se1=se.se1, se2=se.se2)
    return [rec]


def cmd_ci(args, seed):
    methods = parse_methods(args.method)
    s1 = _raw(args.input, args.column)
    records = []
    if args.compare:
        s2 = _raw(args.compare, args.column)
        for m in methods:
            cfg = BootstrapConfig.for_level(args.level, args.replicates, seed)
            est = difference_interval(s1, s2, args.p, args.level, m, cfg)
            records.append(dict(est.as_dict(), quantity="difference"))
        return records
    for m in methods:
        cfg = BootstrapConfig.for_level(args.level, args.replicates, seed)
        records.append(interval(s1, m, args.p, args.level, cfg).as_dict())
    return records


def _grouped_input(path):
    data = ingest(path, "grouped")
    if not isinstance(data, GroupedTable):
        raise IngestError(f"{path} is not a grouped table")
    return data


def cmd_grouped(args, seed):
    g = _grouped_input(args.input)
    fit = fit_grouped(g, args.method, pairs=args.pairs)
    h = grouped_headcount(fit, args.p)
    med = float(fit.median)
    rec = {"method": args.method, "p": args.p, "h_hat": h, "median": med,
           "line": args.p * med, "total": g.total, "bins": g.n_bins}
    if isinstance(fit, PiecewiseDensityFit):
        rec["tail_theta"] = fit.theta
    else:
        rec.update(lam=fit.lam, eta=fit.eta, alpha=fit.alpha, beta=fit.beta,
                   objective=fit.objective)
    if args.bootstrap:
        cfg = BootstrapConfig.for_level(args.level, args.bootstrap, seed)
        ci = grouped_bootstrap_interval(fit, g, args.p, cfg)
        rec.update(level=ci.level, lower=ci.lower, upper=ci.upper)
    return [rec]


def cmd_transfer(args, seed):
    model = parse_model(args.model)
    plan = plan_transfer(model, args.p, args.cutoff_quantile)
    rec = {"model": model.spec()}
    rec.update(plan.as_dict())
    rec.update(_flatten("budget_", transfer_budget_report(model, plan).as_dict()))
    if args.simulate:
        s = sample(model, args.simulate, seed)
        rec.update(_flatten("post_", post_transfer_headcount(apply_transfer(s, plan), plan)))
    return [rec]


def cmd_reconstruct(args, seed):
    g = _grouped_input(args.input)
    s = reconstruct_sample(g, seed=seed, tail_shape=args.tail_shape, scale=args.scale)
    rec = headcount_estimate(s, args.p).as_dict()
    if args.bootstrap:
        reps = bootstrap_replicates(s, args.p, args.bootstrap, np.random.default_rng(seed))
        rec["bootstrap_se"] = float(np.std(reps, ddof=1))
    if args.output:
        try:
            Path(args.output).write_text("\n".join(f"{v:.17g}" for v in s.values) + "\n")
        except OSError as exc:
            raise IngestError(f"cannot write {args.output}: {exc.strerror}") from exc
        rec["output"] = args.output
    return [rec]


def cmd_study(args, seed):
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.seed is not None:
        overrides["master_seed"] = seed
    cfg = load_config(Path(args.config), **overrides)
    result = run_study(cfg)
    if args.output:
        try:
            Path(args.output).write_text(result.to_csv())
        except OSError as exc:
            raise IngestError(f"cannot write {args.output}: {exc.strerror}") from exc
    if args.format == "text":
        args.out.write(result.to_text())
        return []
    if args.format == "csv":
        args.out.write(result.to_csv())
        return []
    return [c.as_dict() for c in result.cells]


_COMMANDS = {
    "estimate": cmd_estimate,
    "ci": cmd_ci,
    "grouped": cmd_grouped,
    "transfer": cmd_transfer,
    "reconstruct": cmd_reconstruct,
    "study": cmd_study,
}


def run(argv=None, out=None):
    """Parse ``argv``, dispatch, and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.format is None:
        args.format = "text" if args.command == "study" else "json"
    args.out = out or sys.stdout
    try:
        seed = args.seed if args.seed is not None else _default_seed()
        records = _COMMANDS[args.command](args, seed)
    except (IngestError, OSError) as exc:
        print(f"relpov: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RelpovError, ValueError) as exc:
        # FitError, DomainError and UnsupportedMethodError all land here
        print(f"relpov: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if records:
        emit(records, args.format, args.out)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
