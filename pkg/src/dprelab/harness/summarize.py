"""Tables and plot-data CSV from RunRecord files.

CSV columns per command (stable):

estimate-free-energy, sweep-beta
    beta, N, replicas, Fhat, Fhat_over_beta4, ci_lo, ci_hi
    (ci_lo / ci_hi bound Fhat at 95%)
fractional-upper
    beta, theta, T, n, replicas, value, std_error, jackknife_bias, ci_lo, ci_hi
variance-profile
    beta, N, replicas, variance, variance_over_N, std_error
intermediate-disorder
    T, n, r, N, replicas, mean, mean_stderr, second, second_stderr, exact_second
continuum-free-energy
    T, n, r, replicas, mean_log, std_error, doubling_delta, doubling_stderr, ci_lo, ci_hi
ck-check
    beta, N, replicas, splits, max_abs_log_diff
scaling-check
    T, n, r, replicas, ks_statistic, p_value, mean_a, mean_b
second-moment-series
    beta, T, k_max, value, terms, stopped_early
verify-identities
    identity, kind, draws, passed, worst_error
coarse-grain-tail
    T, theta, n, c, replicas, value, stderr, index_set_size, tail_bound_violations
"""

from __future__ import annotations

import csv
import io
import logging
from typing import Iterable, List, Optional, Tuple

from ..errors import ConfigError

log = logging.getLogger(__name__)

_FE = ("beta", "N", "replicas", "Fhat", "Fhat_over_beta4", "ci_lo", "ci_hi")

COLUMNS = {
    "estimate-free-energy": _FE,
    "sweep-beta": _FE,
    "fractional-upper": ("beta", "theta", "T", "n", "replicas", "value", "std_error", "jackknife_bias",
                         "ci_lo", "ci_hi"),
    "variance-profile": ("beta", "N", "replicas", "variance", "variance_over_N", "std_error"),
    "intermediate-disorder": ("T", "n", "r", "N", "replicas", "mean", "mean_stderr", "second",
                              "second_stderr", "exact_second"),
    "continuum-free-energy": ("T", "n", "r", "replicas", "mean_log", "std_error", "doubling_delta",
                              "doubling_stderr", "ci_lo", "ci_hi"),
    "ck-check": ("beta", "N", "replicas", "splits", "max_abs_log_diff"),
    "scaling-check": ("T", "n", "r", "replicas", "ks_statistic", "p_value", "mean_a", "mean_b"),
    "second-moment-series": ("beta", "T", "k_max", "value", "terms", "stopped_early"),
    "verify-identities": ("identity", "kind", "draws", "passed", "worst_error"),
    "coarse-grain-tail": ("T", "theta", "n", "c", "replicas", "value", "stderr", "index_set_size",
                          "tail_bound_violations"),
}


def _rows_of(results: dict) -> list:
    return list(results["rows"]) if "rows" in results else [results]


def _sort_key(row, cols):
    key = []
    for c in cols:
        v = row.get(c)
        key.append((0, v) if isinstance(v, (int, float)) and not isinstance(v, bool) else (1, str(v)))
    return key


def summarize_records(records: Iterable[dict]) -> Tuple[Optional[str], List[str], list]:
    """(command, columns, rows) from the aggregate records of one command.

    Rows are sorted by their column values, so the table does not depend
    on record order.  Duplicate aggregates (same config hash) count once.
    """
    aggs = [r for r in records if r.get("record") == "aggregate"]
    commands = sorted({r["command"] for r in aggs})
    if len(commands) > 1:
        raise ConfigError(f"records mix commands {commands}; summarize one command at a time",
                          field="records")
    if not aggs:
        return None, [], []
    cmd = commands[0]
    cols = list(COLUMNS[cmd])
    seen, rows = set(), []
    for rec in sorted(aggs, key=lambda r: r["config_hash"]):
        if rec["config_hash"] in seen:
            continue
        seen.add(rec["config_hash"])
        for row in _rows_of(rec["results"]):
            rows.append({c: row.get(c) for c in cols})
    rows.sort(key=lambda r: _sort_key(r, cols))
    return cmd, cols, rows


def to_csv(cols, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: "" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols})
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def to_table(cols, rows) -> str:
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def summarize(path: str, csv_path: Optional[str] = None) -> str:
    """Human-readable table for a records file; optionally write the CSV."""
    from .runner import read_records
    cmd, cols, rows = summarize_records(read_records(path))
    if cmd is None:
        log.warning("no aggregate records in %s", path)
        if csv_path:
            open(csv_path, "w").close()
        return ""
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(to_csv(cols, rows))
    return f"# {cmd}\n" + to_table(cols, rows)
