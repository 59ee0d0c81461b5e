"""Readers for raw income files and grouped-table CSVs.

Raw files hold one income per line, or a CSV whose income column is named
with ``column`` (default: ``income`` if present, else the only column).
Grouped files have the header ``lower,upper,count[,mean]``; an empty or
``inf`` upper bound marks the open last bin. A comment line
``# bounds: inclusive-integer`` declares printed integer ranges, which are
read as ``[lower, upper + 1)``.
"""
from __future__ import annotations

import csv
import io
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, IngestError
from .estimate import Sample
from .grouped import GroupedTable

__all__ = ["ingest", "read_raw", "read_grouped", "fixture_path", "AU_INCOME_YEARS"]

AU_INCOME_YEARS = ("2004", "2006", "2010", "2012", "2014")
_GROUPED_HEADER = {"lower", "upper", "count"}
_MAX_LISTED_ROWS = 20


def fixture_path(name):
    """Path of a file shipped in ``relpov/data``."""
    return Path(str(resources.files("relpov") / "data" / name))


def _read_lines(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror}") from exc
    directives = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if ":" in body:
                key, _, val = body.partition(":")
                if key.strip().lower() == "bounds":
                    directives["bounds"] = val.strip().lower()
            continue
        rows.append((lineno, line))
    return rows, directives


def _parse_rows(rows):
    reader = csv.reader(io.StringIO("\n".join(line for _, line in rows)))
    return [(lineno, [c.strip() for c in rec]) for (lineno, _), rec in zip(rows, reader)]


def _float(text):
    try:
        return float(text)
    except ValueError:
        return None


def _fail(message, bad):
    listed = ", ".join(str(r) for r in bad[:_MAX_LISTED_ROWS])
    more = "" if len(bad) <= _MAX_LISTED_ROWS else f" (+{len(bad) - _MAX_LISTED_ROWS} more)"
    raise IngestError(f"{message} at row(s) {listed}{more}", bad)


def read_raw(path, column=None):
    rows, _ = _read_lines(path)
    if not rows:
        raise IngestError(f"{path} contains no data")
    recs = _parse_rows(rows)
    header = recs[0][1]
    col = 0
    if any(_float(c) is None for c in header):
        names = [h.lower() for h in header]
        if column is not None:
            if column.lower() not in names:
                raise IngestError(f"column {column!r} not found; have {header}")
            col = names.index(column.lower())
        elif "income" in names:
            col = names.index("income")
        elif len(names) == 1:
            col = 0
        else:
            raise IngestError(f"several columns {header}; choose one with --column")
        recs = recs[1:]
    values, bad = [], []
    for lineno, rec in recs:
        v = _float(rec[col]) if col < len(rec) else None
        if v is None or not math.isfinite(v) or v <= 0:
            bad.append(lineno)
        else:
            values.append(v)
    if bad:
        _fail("non-numeric or non-positive income", bad)
    if not values:
        raise IngestError(f"{path} contains no incomes")
    return Sample(values)


def read_grouped(path):
    rows, directives = _read_lines(path)
    recs = _parse_rows(rows)
    if not recs:
        raise IngestError(f"{path} contains no data")
    header = [h.lower() for h in recs[0][1]]
    if not _GROUPED_HEADER.issubset(header):
        raise IngestError("grouped file header must be lower,upper,count[,mean]", [recs[0][0]])
    ix = {name: header.index(name) for name in header}
    lower, upper, counts, means, bad = [], [], [], [], []
    for lineno, rec in recs[1:]:
        rec = rec + [""] * (len(header) - len(rec))
        lo = _float(rec[ix["lower"]])
        up_text = rec[ix["upper"]]
        up = math.inf if up_text in ("", "inf", "Inf") else _float(up_text)
        ct = _float(rec[ix["count"]])
        mu = math.nan
        if "mean" in ix and rec[ix["mean"]] != "":
            mu = _float(rec[ix["mean"]])
        if lo is None or up is None or ct is None or mu is None or lo < 0 or ct < 0:
            bad.append(lineno)
            continue
        lower.append(lo)
        upper.append(up)
        counts.append(ct)
        means.append(mu)
    if bad:
        _fail("malformed grouped row", bad)
    try:
        if directives.get("bounds") == "inclusive-integer":
            return GroupedTable.from_inclusive_integer_bins(lower, upper, counts, np.array(means))
        return GroupedTable(np.array(lower), np.array(upper), np.array(counts), np.array(means))
    except DomainError as exc:
        raise IngestError(f"{path}: {exc}") from exc


def ingest(path, kind="auto", column=None):
    """Read ``path`` as a Sample or GroupedTable, auto-detecting by header."""
    if kind == "auto":
        rows, _ = _read_lines(path)
        head = _parse_rows(rows[:1])
        names = {c.lower() for c in head[0][1]} if head else set()
        kind = "grouped" if _GROUPED_HEADER.issubset(names) else "raw"
    if kind == "grouped":
        return read_grouped(path)
    if kind == "raw":
        return read_raw(path, column)
    raise IngestError(f"unknown input kind {kind!r}")
