"""Estimation pipeline: hourly panels, fixed-effects OLS, HAC errors.

All standard errors in the package come from here. Two routes exist:

* hourly: outcomes are averaged per (chronological hour, condition), fit
  with an hour-of-day fixed-effects regression, and given Newey-West
  standard errors with a two-hour lag. Aggregating to hours is a worst-case
  stance that sessions within an hour and condition move together.
* account: outcomes are averaged per (account, condition) and compared with
  a two-sample unequal-variance z interval, the usual A/B-test treatment.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CollinearityError,
    EmptyGroupError,
    EstimationError,
    InvalidLagError,
)
from .records import CI_Z, Estimate, estimate_from_point

_ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True)
class HourlyRow:
    t: int  # chronological hour since scenario start
    hour_of_day: int  # 0-23 clock hour
    condition: int  # 0 control, 1 treatment
    z: float  # mean outcome in the cell
    n: int  # sessions behind the mean


@dataclass
class HourlyPanel:
    rows: list[HourlyRow]

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.t, r.condition))
        seen = set()
        for r in self.rows:
            key = (r.t, r.condition)
            if key in seen:
                raise EstimationError(f"duplicate panel cell for (t={r.t}, A={r.condition})")
            seen.add(key)
            if r.n < 1:
                raise EstimationError("panel rows must aggregate at least one session")

    def conditions(self) -> set[int]:
        return {r.condition for r in self.rows}

    def hours(self) -> set[int]:
        return {r.t for r in self.rows}

    def __len__(self):
        return len(self.rows)


def hourly_aggregate(records, metric: str, condition=None) -> HourlyPanel:
    """Average a metric per (chronological hour, condition).

    Hours with no sessions in a condition are simply absent. `condition`
    optionally overrides the record's treatment flag (used when a cell of
    control sessions plays the "treated" role in a contrast).
    """
    if not records:
        raise EmptyGroupError(f"no records to aggregate for metric {metric!r}")
    sums: dict[tuple[int, int], list[float]] = {}
    for r in records:
        a = r.treatment if condition is None else condition
        key = (r.chrono_hour, a)
        cell = sums.setdefault(key, [0.0, 0])
        cell[0] += r.metric(metric)
        cell[1] += 1
    rows = [
        HourlyRow(t=t, hour_of_day=t % 24, condition=a, z=s / n, n=n)
        for (t, a), (s, n) in sums.items()
    ]
    return HourlyPanel(rows)


def merge_panels(panel_a: HourlyPanel, panel_b: HourlyPanel) -> HourlyPanel:
    return HourlyPanel(panel_a.rows + panel_b.rows)


@dataclass
class RegressionFit:
    """OLS fit of Z on an intercept, treatment flag, and hour-of-day dummies."""

    coefficients: np.ndarray
    column_names: list[str]
    design: np.ndarray
    outcome: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray
    treatment_index: int
    reference_hour: int
    lag: int | None = None
    robust_vcov: np.ndarray | None = None

    @property
    def treatment_effect(self) -> float:
        return float(self.coefficients[self.treatment_index])

    @property
    def nobs(self) -> int:
        return self.design.shape[0]

    def orthogonality(self) -> float:
        """Max |X'e| scaled by design magnitude; ~0 for a valid fit."""
        scale = max(float(np.abs(self.design.T @ self.outcome).max()), 1.0)
        return float(np.abs(self.design.T @ self.residuals).max()) / scale


def _build_design(panel: HourlyPanel, reference_hour: int):
    hours = sorted({r.hour_of_day for r in panel.rows})
    dummy_hours = [h for h in hours if h != reference_hour]
    names = ["intercept", "treatment"] + [f"hour_{h}" for h in dummy_hours]
    x = np.zeros((len(panel.rows), 2 + len(dummy_hours)))
    z = np.empty(len(panel.rows))
    col = {h: j + 2 for j, h in enumerate(dummy_hours)}
    for i, row in enumerate(panel.rows):
        x[i, 0] = 1.0
        x[i, 1] = float(row.condition)
        if row.hour_of_day != reference_hour:
            x[i, col[row.hour_of_day]] = 1.0
        z[i] = row.z
    return x, z, names


def _name_redundant_column(x: np.ndarray, names: list[str]) -> str:
    full_rank = np.linalg.matrix_rank(x)
    for j in range(x.shape[1] - 1, 0, -1):
        reduced = np.delete(x, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full_rank:
            return names[j]
    return names[0]


def ols_fixed_effects(panel: HourlyPanel, reference_hour: int = 0) -> RegressionFit:
    """Unweighted OLS of hourly means on treatment plus hour-of-day effects.

    The reference hour's dummy is dropped to identify the intercept; the
    treatment coefficient is invariant to that choice. When hour 0 never
    appears in the panel, the smallest observed hour becomes the reference.
    """
    conditions = panel.conditions()
    if conditions != {0, 1}:
        missing = "treatment" if 1 not in conditions else "control"
        raise EmptyGroupError(f"panel has no {missing} rows")
    if len(panel.hours()) < 2:
        raise EstimationError("panel needs at least two distinct hours")

    observed_hours = {r.hour_of_day for r in panel.rows}
    if reference_hour not in observed_hours:
        reference_hour = min(observed_hours)
    x, z, names = _build_design(panel, reference_hour)

    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise CollinearityError(_name_redundant_column(x, names))

    beta, *_ = np.linalg.lstsq(x, z, rcond=None)
    residuals = z - x @ beta
    fit = RegressionFit(
        coefficients=beta,
        column_names=names,
        design=x,
        outcome=z,
        residuals=residuals,
        xtx_inv=np.linalg.inv(x.T @ x),
        treatment_index=1,
        reference_hour=reference_hour,
    )
    if fit.orthogonality() > _ORTHOGONALITY_TOL:
        raise EstimationError(
            f"residuals not orthogonal to design (max scaled |X'e| = {fit.orthogonality():.2e})"
        )
    return fit


def newey_west_se(fit: RegressionFit, lag: int = 2) -> np.ndarray:
    """HAC standard errors with Bartlett weights up to `lag` panel rows.

    Rows are ordered chronologically with the control row of an hour before
    its treatment row, and that ordering defines the lag structure. With
    lag 0 this reduces to the plain heteroskedasticity-robust sandwich.
    """
    if lag < 0:
        raise InvalidLagError("lag must be >= 0")
    n = fit.nobs
    if lag >= n:
        raise InvalidLagError(f"lag {lag} must be smaller than the {n}-row panel")

    x = fit.design
    e = fit.residuals
    xe = x * e[:, None]
    s = xe.T @ xe  # lag-0 term
    for ell in range(1, lag + 1):
        w = 1.0 - ell / (lag + 1.0)
        gamma = xe[ell:].T @ xe[:-ell]
        s += w * (gamma + gamma.T)

    vcov = fit.xtx_inv @ s @ fit.xtx_inv
    diag = np.diag(vcov).copy()
    if np.any(diag < -1e-12):
        raise EstimationError("HAC variance has a significantly negative diagonal entry")
    if np.any(diag < 0):
        warnings.warn("clamping tiny negative HAC variances to zero", RuntimeWarning)
        diag = np.maximum(diag, 0.0)
    fit.lag = lag
    fit.robust_vcov = vcov
    return np.sqrt(diag)


def hourly_fixed_effects_analysis(
    treated_records,
    control_records,
    metric: str,
    estimand: str,
    lag: int = 2,
) -> Estimate:
    """Estimate a contrast between two record sets on the hourly route.

    The first set enters the regression with the treatment flag on and the
    second with it off, regardless of the records' own assignment; this is
    how a control-vs-control spillover contrast is fit.
    """
    if not treated_records:
        raise EmptyGroupError(f"{estimand}: numerator cell is empty")
    if not control_records:
        raise EmptyGroupError(f"{estimand}: denominator cell is empty")
    panel = merge_panels(
        hourly_aggregate(treated_records, metric, condition=1),
        hourly_aggregate(control_records, metric, condition=0),
    )
    fit = ols_fixed_effects(panel)
    se = newey_west_se(fit, lag=lag)[fit.treatment_index]
    n_units = len(treated_records) + len(control_records)
    return estimate_from_point(estimand, metric, fit.treatment_effect, float(se), n_units, "hourly")


def account_level_analysis(records, metric: str, estimand: str = "ate") -> Estimate:
    """Difference in means over per-account averages, Welch-style interval.

    Each account contributes one mean per condition it appears in. Accounts
    with a single session in a condition contribute that session directly;
    a condition whose account means are all identical gets a zero standard
    error and a degenerate interval.
    """
    groups: dict[tuple[int, int], list[float]] = {}
    for r in records:
        groups.setdefault((r.account_id, r.treatment), []).append(r.metric(metric))
    means = {0: [], 1: []}
    for (_, a), values in groups.items():
        means[a].append(sum(values) / len(values))
    if not means[1]:
        raise EmptyGroupError(f"{estimand}: no treated sessions")
    if not means[0]:
        raise EmptyGroupError(f"{estimand}: no control sessions")

    treated = np.asarray(means[1])
    control = np.asarray(means[0])
    point = float(treated.mean() - control.mean())

    def _var(v: np.ndarray) -> float:
        return float(v.var(ddof=1)) if v.size > 1 else 0.0

    se = float(np.sqrt(_var(treated) / treated.size + _var(control) / control.size))
    return estimate_from_point(estimand, metric, point, se, treated.size + control.size, "account")


def normalize(estimates, base: float):
    """Attach a normalization base to one estimate or a list of them.

    Raw values stay untouched; normalized views divide point, SE, and CI
    bounds by the base.
    """
    if isinstance(estimates, Estimate):
        return estimates.with_base(base)
    return [e.with_base(base) for e in estimates]


def z_interval(point: float, se: float) -> tuple[float, float]:
    return point - CI_Z * se, point + CI_Z * se
