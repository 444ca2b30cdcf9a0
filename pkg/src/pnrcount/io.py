"""On-disk formats: histogram CSV, study/plan CSV tables, JSON reports.

Every file starts with the resolved run configuration, as a ``# {json}``
comment line in CSV files or a ``config`` member in JSON reports.
"""
import csv
import io as _io
import json
import math

import numpy as np

from .model import PhotonHistogram

SCHEMA_VERSION = 1
HISTOGRAM_HEADER = ("N", "count")


class HistogramParseError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def config_comment(config):
    return "# " + json.dumps(_clean(config), sort_keys=True, separators=(",", ":")) + "\n"


def dumps_report(kind, config, body):
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "config": config}
    doc.update(body)
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def format_histogram(hist, config=None):
    buf = _io.StringIO()
    if config is not None:
        buf.write(config_comment(config))
    buf.write(",".join(HISTOGRAM_HEADER) + "\n")
    for n, c in enumerate(hist.counts):
        if c:
            buf.write(f"{n},{int(c)}\n")
    return buf.getvalue()


def parse_histogram(text):
    """Parse ``N,count`` CSV text; ``#`` lines and blank lines are skipped."""
    header_seen = False
    counts = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if tuple(fields) != HISTOGRAM_HEADER:
                raise HistogramParseError(f"expected header 'N,count', got {line!r}", lineno)
            header_seen = True
            continue
        if len(fields) != 2:
            raise HistogramParseError(f"expected 2 fields, got {len(fields)}", lineno)
        try:
            n, c = int(fields[0]), int(fields[1])
        except ValueError:
            raise HistogramParseError(f"non-integer field in {line!r}", lineno) from None
        if n < 0 or c < 0:
            raise HistogramParseError("photon numbers and counts must be non-negative", lineno)
        if n in counts:
            raise HistogramParseError(f"duplicate photon number {n}", lineno)
        counts[n] = c
    if not header_seen:
        raise HistogramParseError("missing 'N,count' header")
    if not counts or sum(counts.values()) == 0:
        raise HistogramParseError("histogram contains no experiments")
    return PhotonHistogram(counts)


def read_histogram(path):
    with open(path, encoding="utf-8") as fh:
        return parse_histogram(fh.read())


def format_table(rows, columns, config=None):
    buf = _io.StringIO()
    if config is not None:
        buf.write(config_comment(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else "nan"
    return v


def format_plan_matrix(grid, config=None):
    """Matrix CSV: first row ``p \\ M`` then the M axis; each later row is p then nu values."""
    buf = _io.StringIO()
    if config is not None:
        buf.write(config_comment(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p\\M"] + [int(m) for m in grid.M_axis])
    for i, p in enumerate(grid.p_axis):
        w.writerow([repr(float(p))] + [_cell(v) for v in grid.nu_exact[i]])
    return buf.getvalue()


def format_contours(grid, config=None):
    rows = [{"lambda": lam, "M": m, "p": p, "nu_exact": nu, "nu": (math.ceil(nu) if math.isfinite(nu) else nu)}
            for lam, prof in grid.contours for m, p, nu in prof]
    return format_table(rows, ["lambda", "M", "p", "nu_exact", "nu"], config)
