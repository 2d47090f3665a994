"""Core record types and the session-log CSV schema.

A SessionRecord is the atom of all estimation: one completed session with
its treatment flag, timing, and outcome metrics. An Estimate is a labeled
point estimate with its standard error and 95% interval.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

from .errors import NormalizationError

# Metric name -> session-log CSV column. Order matters: it fixes the schema.
METRIC_COLUMNS = {
    "avg_throughput": "avg_throughput_bps",
    "min_rtt": "min_rtt_s",
    "retrans_frac": "retrans_frac",
    "bitrate": "bitrate_bps",
    "play_delay": "play_delay_s",
}

METRICS = tuple(METRIC_COLUMNS)

LOG_COLUMNS = [
    "session_id",
    "account_id",
    "link_id",
    "start_time_s",
    "hour",
    "treatment",
    "cell",
] + list(METRIC_COLUMNS.values())

CI_Z = 1.96


@dataclass(frozen=True)
class SessionRecord:
    """One completed session.

    `hour_of_day` is the 0-23 wall-clock hour; the chronological hour index
    used by the hourly analysis is derived from `start_time`.
    """

    session_id: int
    account_id: int
    link_id: int
    start_time: float
    treatment: int
    cell: str
    metrics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise ValueError(f"treatment must be 0 or 1, got {self.treatment}")
        rf = self.metrics.get("retrans_frac")
        if rf is not None and not 0.0 <= rf <= 1.0:
            raise ValueError(f"retrans_frac outside [0, 1]: {rf}")
        tp = self.metrics.get("avg_throughput")
        if tp is not None and tp < 0:
            raise ValueError(f"avg_throughput must be >= 0: {tp}")
        rtt = self.metrics.get("min_rtt")
        if rtt is not None and rtt <= 0:
            raise ValueError(f"min_rtt must be > 0: {rtt}")

    @property
    def hour_of_day(self) -> int:
        return int(self.start_time // 3600) % 24

    @property
    def chrono_hour(self) -> int:
        """Hour index from scenario start (not wrapped to 24)."""
        return int(self.start_time // 3600)

    def metric(self, name: str) -> float:
        return self.metrics[name]


@dataclass(frozen=True)
class Estimate:
    """A point estimate with standard error and 95% CI.

    Raw values are kept as-is; a normalization base, when attached, exposes
    the relative versions without destroying the raw ones.
    """

    estimand: str
    metric: str
    point: float
    std_error: float
    ci95_lo: float
    ci95_hi: float
    n_units: int
    aggregation: str  # "hourly" or "account"
    normalization_base: float | None = None

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")
        if not self.ci95_lo <= self.point <= self.ci95_hi:
            raise ValueError(
                f"CI must bracket the point: {self.ci95_lo}, {self.point}, {self.ci95_hi}"
            )
        if self.aggregation not in ("hourly", "account"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    def with_base(self, base: float) -> "Estimate":
        if base <= 0 or not math.isfinite(base):
            raise NormalizationError(f"normalization base must be > 0, got {base}")
        return replace(self, normalization_base=base)

    @property
    def point_normalized(self) -> float | None:
        if self.normalization_base is None:
            return None
        return self.point / self.normalization_base

    @property
    def se_normalized(self) -> float | None:
        if self.normalization_base is None:
            return None
        return self.std_error / self.normalization_base

    @property
    def ci95_normalized(self) -> tuple[float, float] | None:
        if self.normalization_base is None:
            return None
        return (self.ci95_lo / self.normalization_base, self.ci95_hi / self.normalization_base)

    def covers_zero(self, atol: float = 0.0) -> bool:
        return self.ci95_lo - atol <= 0.0 <= self.ci95_hi + atol

    @property
    def z_value(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.point == 0 else math.inf * math.copysign(1, self.point)
        return self.point / self.std_error


def estimate_from_point(estimand, metric, point, se, n_units, aggregation) -> Estimate:
    """Build an Estimate with the standard 1.96-sigma interval."""
    return Estimate(
        estimand=estimand,
        metric=metric,
        point=point,
        std_error=se,
        ci95_lo=point - CI_Z * se,
        ci95_hi=point + CI_Z * se,
        n_units=n_units,
        aggregation=aggregation,
    )


def _fmt(value) -> str:
    # repr round-trips floats exactly and never emits thousands separators
    return repr(float(value)) if isinstance(value, float) else str(value)


def write_session_log(records, path_or_buf) -> None:
    """Write records in the documented session-log CSV schema."""
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        buf = open(path_or_buf, "w", newline="")
        close = True
    else:
        buf = path_or_buf
    try:
        writer = csv.writer(buf)
        writer.writerow(LOG_COLUMNS)
        for r in records:
            row = [
                r.session_id,
                r.account_id,
                r.link_id,
                _fmt(r.start_time),
                r.hour_of_day,
                r.treatment,
                r.cell,
            ]
            row += [_fmt(r.metrics[m]) for m in METRIC_COLUMNS]
            writer.writerow(row)
    finally:
        if close:
            buf.close()


def session_log_text(records) -> str:
    buf = io.StringIO()
    write_session_log(records, buf)
    return buf.getvalue()


def read_session_log(path_or_buf) -> list[SessionRecord]:
    """Read a session-log CSV, validating the exact column schema."""
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        buf = open(path_or_buf, "r", newline="")
        close = True
    else:
        buf = path_or_buf
    try:
        reader = csv.reader(row for row in buf if not row.startswith("#"))
        header = next(reader, None)
        if header != LOG_COLUMNS:
            missing = set(LOG_COLUMNS) - set(header or [])
            extra = set(header or []) - set(LOG_COLUMNS)
            detail = []
            if missing:
                detail.append(f"missing columns: {sorted(missing)}")
            if extra:
                detail.append(f"unexpected columns: {sorted(extra)}")
            raise ValueError("session log schema mismatch; " + "; ".join(detail or ["bad header"]))
        records = []
        for row in reader:
            vals = dict(zip(LOG_COLUMNS, row))
            metrics = {m: float(vals[col]) for m, col in METRIC_COLUMNS.items()}
            records.append(
                SessionRecord(
                    session_id=int(vals["session_id"]),
                    account_id=int(vals["account_id"]),
                    link_id=int(vals["link_id"]),
                    start_time=float(vals["start_time_s"]),
                    treatment=int(vals["treatment"]),
                    cell=vals["cell"],
                    metrics=metrics,
                )
            )
        return records
    finally:
        if close:
            buf.close()
