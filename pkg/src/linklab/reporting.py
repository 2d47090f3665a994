"""Report tables: estimates, time series, sweeps, diagnostics, calibration.

Every table is CSV with a leading `# key=value` metadata line carrying the
config hash and seed that produced it, so any output can be traced back to
its exact inputs. Floats are written with repr and round-trip exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .records import METRICS, Estimate, estimate_from_point

ESTIMATE_COLUMNS = [
    "estimand",
    "metric",
    "point",
    "point_normalized",
    "se",
    "ci95_lo",
    "ci95_hi",
    "n_units",
    "aggregation",
]

TIMESERIES_COLUMNS = ["t", "hour_of_day", "link_id", "cell", "metric", "mean", "n"]
LINKLOAD_COLUMNS = ["t", "link_id", "mean_active", "mean_utilization", "congested_steps"]
SWEEP_COLUMNS = ["p", "cell", "metric", "mean", "n"]
DIAGNOSTIC_COLUMNS = [
    "condition",
    "metric",
    "p_i",
    "p_j",
    "delta",
    "se",
    "z",
    "p_value",
    "reject_raw",
    "reject_bonferroni",
]
CALIBRATION_COLUMNS = ["design", "metric", "point", "se", "z", "false_positive"]
REPLICATION_COLUMNS = [
    "estimand",
    "metric",
    "mean_point",
    "sd_point",
    "mc_se",
    "coverage",
    "replications",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path_or_buf, columns, rows, meta: dict | None = None) -> None:
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        buf = open(path_or_buf, "w", newline="")
        close = True
    else:
        buf = path_or_buf
    try:
        if meta:
            buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(buf)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if close:
            buf.close()


def table_text(columns, rows, meta=None) -> str:
    buf = io.StringIO()
    write_table(buf, columns, rows, meta)
    return buf.getvalue()


def read_table(path_or_buf):
    """Returns (meta dict, column list, row dicts with string values)."""
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        buf = open(path_or_buf, "r", newline="")
        close = True
    else:
        buf = path_or_buf
    try:
        meta = {}
        lines = iter(buf)
        first = next(lines, "")
        if first.startswith("#"):
            for part in first[1:].strip().split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    meta[k] = v
            header_line = next(lines, "")
        else:
            header_line = first
        reader = csv.reader([header_line])
        columns = next(reader, [])
        rows = []
        for parsed in csv.reader(lines):
            if parsed:
                rows.append(dict(zip(columns, parsed)))
        return meta, columns, rows
    finally:
        if close:
            buf.close()


def estimate_rows(estimates: list[Estimate]):
    rows = []
    for e in estimates:
        rows.append(
            [
                e.estimand,
                e.metric,
                e.point,
                e.point_normalized,
                e.std_error,
                e.ci95_lo,
                e.ci95_hi,
                e.n_units,
                e.aggregation,
            ]
        )
    return rows


def parse_estimate_row(row: dict) -> Estimate:
    base = None
    if row["point_normalized"]:
        ratio = float(row["point_normalized"])
        point = float(row["point"])
        if ratio != 0.0 and point != 0.0:
            base = point / ratio
    est = Estimate(
        estimand=row["estimand"],
        metric=row["metric"],
        point=float(row["point"]),
        std_error=float(row["se"]),
        ci95_lo=float(row["ci95_lo"]),
        ci95_hi=float(row["ci95_hi"]),
        n_units=int(row["n_units"]),
        aggregation=row["aggregation"],
        normalization_base=base,
    )
    return est


def timeseries_rows(records, metrics=None):
    metrics = list(metrics) if metrics is not None else list(METRICS)
    sums: dict[tuple, list] = {}
    for r in records:
        for m in metrics:
            key = (r.chrono_hour, r.link_id, r.cell, m)
            cell = sums.setdefault(key, [0.0, 0])
            cell[0] += r.metric(m)
            cell[1] += 1
    rows = []
    for (t, link_id, cell, metric), (total, n) in sorted(sums.items()):
        rows.append([t, t % 24, link_id, cell, metric, total / n, n])
    return rows


def linkload_rows(link_stats: dict):
    rows = []
    for link_id in sorted(link_stats):
        stats = link_stats[link_id]
        hours = sorted(stats.hourly_active)
        for t in hours:
            active_sum, steps = stats.hourly_active[t]
            util_sum, usteps = stats.hourly_utilization[t]
            rows.append(
                [
                    t,
                    link_id,
                    active_sum / steps if steps else 0.0,
                    util_sum / usteps if usteps else 0.0,
                    stats.hourly_congested_steps.get(t, 0),
                ]
            )
    return rows


def sweep_rows(cell_means: dict):
    """cell_means: {(p, cell, metric): (mean, n)} -> ordered rows."""
    rows = []
    for (p, cell, metric), (mean, n) in sorted(cell_means.items()):
        rows.append([p, cell, metric, mean, n])
    return rows


def diagnostic_rows(report):
    threshold = report.alpha / report.n_tests if report.n_tests else 0.0
    rows = []
    for t in report.tests:
        rows.append(
            [
                t.condition,
                t.metric,
                t.p_i,
                t.p_j,
                t.delta,
                t.std_error,
                t.z,
                t.p_value,
                t.p_value < report.alpha,
                t.p_value < threshold,
            ]
        )
    return rows


@dataclass(frozen=True)
class CalibrationRow:
    design: str
    metric: str
    point: float
    std_error: float
    z: float
    false_positive: bool


def calibration_rows(rows: list[CalibrationRow]):
    return [[r.design, r.metric, r.point, r.std_error, r.z, r.false_positive] for r in rows]


@dataclass
class ReplicationSummary:
    estimand: str
    metric: str
    mean_point: float
    sd_point: float
    mc_se: float
    coverage: float
    replications: int


def summarize_replications(points: dict, cis: dict) -> list[ReplicationSummary]:
    """points/cis keyed by (estimand, metric) -> list over replications."""
    import math

    out = []
    for key in sorted(points):
        values = points[key]
        n = len(values)
        mean = sum(values) / n
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
        covered = sum(1 for lo, hi in cis[key] if lo <= mean <= hi)
        out.append(
            ReplicationSummary(
                estimand=key[0],
                metric=key[1],
                mean_point=mean,
                sd_point=sd,
                mc_se=sd / math.sqrt(n) if n else 0.0,
                coverage=covered / n if n else 0.0,
                replications=n,
            )
        )
    return out


def replication_rows(summaries: list[ReplicationSummary]):
    return [
        [s.estimand, s.metric, s.mean_point, s.sd_point, s.mc_se, s.coverage, s.replications]
        for s in summaries
    ]


def zero_estimate(estimand, metric) -> Estimate:
    return estimate_from_point(estimand, metric, 0.0, 0.0, 0, "hourly")
