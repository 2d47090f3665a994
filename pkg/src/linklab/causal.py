"""Treatment assignment and the four contrast estimators.

Estimands follow the potential-outcomes convention: with allocation p,
`ate(p)` compares treated and control units sharing a link and period,
`tte` compares a (near-)fully-treated cell to a (near-)fully-control one,
`spillover(p)` compares control units exposed to treated neighbors against
control units in an all-control world, and `partial(p)` compares treated
units at allocation p against that same all-control world.
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from hashlib import blake2b

from .analysis import account_level_analysis, hourly_fixed_effects_analysis
from .errors import (
    EmptyGroupError,
    InsufficientSweepError,
    InvalidAllocationError,
    InvalidDesignError,
    UndefinedSpilloverError,
)
from .records import Estimate, estimate_from_point

_HASH_SPAN = float(2**64)


def unit_uniform(seed: int, unit_id: int, domain: bytes = b"assign") -> float:
    """Stable uniform draw in [0, 1) from (seed, unit_id).

    Uses a keyed 64-bit hash so the draw is independent of iteration order,
    of the platform, and of how many other units exist: re-running with more
    units never reshuffles existing ones.
    """
    h = blake2b(digest_size=8, key=domain)
    h.update(struct.pack("<qq", seed, unit_id))
    return int.from_bytes(h.digest(), "little") / _HASH_SPAN


@dataclass(frozen=True)
class AssignmentVector:
    """Per-unit binary assignments for one allocation draw."""

    assignments: dict[int, int]
    allocation_p: float
    rng_seed: int

    def __getitem__(self, unit_id: int) -> int:
        return self.assignments[unit_id]

    @property
    def n_treated(self) -> int:
        return sum(self.assignments.values())

    @property
    def fraction_treated(self) -> float:
        return self.n_treated / len(self.assignments)


def _check_units(unit_ids):
    units = list(unit_ids)
    if not units:
        raise ValueError("unit_ids must be non-empty")
    if len(set(units)) != len(units):
        raise ValueError("unit_ids must be duplicate-free")
    return units


def assign_bernoulli(unit_ids, p: float, seed: int) -> AssignmentVector:
    """Independent Bernoulli(p) assignment, deterministic in (unit, p, seed).

    A unit is treated when its hash-uniform falls below p, so allocations
    are nested: raising p never flips a treated unit back to control.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidAllocationError(f"allocation must be in [0, 1], got {p}")
    units = _check_units(unit_ids)
    assignments = {u: int(unit_uniform(seed, u) < p) for u in units}
    return AssignmentVector(assignments, p, seed)


def assign_exact_fraction(unit_ids, p: float, seed: int) -> AssignmentVector:
    """Treat exactly round(p * n) units, chosen by hash rank.

    Used for small synchronized populations (lab-style runs) where the
    realized fraction must match the nominal allocation exactly. Ranking by
    the same hash keeps allocations nested across p.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidAllocationError(f"allocation must be in [0, 1], got {p}")
    units = _check_units(unit_ids)
    k = round(p * len(units))
    ranked = sorted(units, key=lambda u: (unit_uniform(seed, u), u))
    treated = set(ranked[:k])
    return AssignmentVector({u: int(u in treated) for u in units}, p, seed)


def group_mean(records, metric: str, where=None) -> float:
    """Arithmetic mean of a metric over records passing the filter."""
    total = 0.0
    count = 0
    for r in records:
        if where is None or where(r):
            total += r.metric(metric)
            count += 1
    if count == 0:
        raise EmptyGroupError(f"no records match the filter for metric {metric!r}")
    return total / count


def naive_ate(records, metric: str, allocation_p: float | None = None) -> Estimate:
    """Within-cell difference in means with account-aggregated uncertainty.

    The point is the exact difference of session-level group means; the
    standard error comes from the account-level analysis, the standard way
    concurrent A/B tests are read.
    """
    treated = [r for r in records if r.treatment == 1]
    control = [r for r in records if r.treatment == 0]
    if not treated:
        raise EmptyGroupError("naive ate: no treated records")
    if not control:
        raise EmptyGroupError("naive ate: no control records")
    label = f"ate({allocation_p:g})" if allocation_p is not None else "ate"
    account = account_level_analysis(records, metric, estimand=label)
    point = group_mean(treated, metric) - group_mean(control, metric)
    return estimate_from_point(label, metric, point, account.std_error, account.n_units, "account")


def _ids(records):
    return {r.session_id for r in records}


def tte_estimate(treated_records, control_records, metric: str, lag: int = 2) -> Estimate:
    """Total-effect contrast between a near-pure-treatment cell and a
    near-pure-control cell, on the hourly analysis route."""
    if _ids(treated_records) & _ids(control_records):
        raise InvalidDesignError("tte cells overlap: a session appears on both sides")
    return hourly_fixed_effects_analysis(treated_records, control_records, metric, "tte", lag=lag)


def spillover_estimate(control_at_p, control_at_0, metric: str, p: float, lag: int = 2) -> Estimate:
    """Effect of a p-fraction deployment on control units' outcomes."""
    if p >= 1.0:
        raise UndefinedSpilloverError("spillover is only defined for allocations below 1")
    for r in itertools.chain(control_at_p, control_at_0):
        if r.treatment != 0:
            raise InvalidDesignError("spillover cells must contain only control sessions")
    return hourly_fixed_effects_analysis(
        control_at_p, control_at_0, metric, f"spillover({p:g})", lag=lag
    )


def partial_effect(treated_at_p, control_at_0, metric: str, p: float, lag: int = 2) -> Estimate:
    """Treated outcomes at allocation p against an all-control world."""
    if _ids(treated_at_p) & _ids(control_at_0):
        raise InvalidDesignError("partial-effect cells overlap")
    return hourly_fixed_effects_analysis(
        treated_at_p, control_at_0, metric, f"partial({p:g})", lag=lag
    )


# ---------------------------------------------------------------------------
# Interference diagnostic


@dataclass(frozen=True)
class AllocationEstimates:
    """Estimates gathered at one allocation of a sweep."""

    p: float
    ate: dict[str, Estimate] = field(default_factory=dict)
    spillover: dict[str, Estimate] = field(default_factory=dict)
    partial: dict[str, Estimate] = field(default_factory=dict)


@dataclass(frozen=True)
class DiagnosticTest:
    condition: str  # "ate_constant", "partial_equals_ate", "spillover_zero"
    metric: str
    p_i: float
    p_j: float | None
    delta: float
    std_error: float
    z: float
    p_value: float

    def rejects(self, alpha: float) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class DiagnosticReport:
    tests: list[DiagnosticTest]
    alpha: float

    @property
    def n_tests(self) -> int:
        return len(self.tests)

    @property
    def failed_conditions(self) -> list[str]:
        failed = {t.condition for t in self.tests if t.rejects(self.alpha)}
        return sorted(failed)

    @property
    def failed_conditions_bonferroni(self) -> list[str]:
        if not self.tests:
            return []
        threshold = self.alpha / self.n_tests
        return sorted({t.condition for t in self.tests if t.p_value < threshold})

    @property
    def interference_flagged(self) -> bool:
        return bool(self.failed_conditions)

    @property
    def interference_flagged_bonferroni(self) -> bool:
        return bool(self.failed_conditions_bonferroni)


def _two_sided_p(z: float) -> float:
    if math.isinf(z):
        return 0.0
    return math.erfc(abs(z) / math.sqrt(2.0))


def _z_test(delta: float, se: float) -> tuple[float, float]:
    if se == 0.0:
        z = 0.0 if delta == 0.0 else math.inf
    else:
        z = delta / se
    return z, _two_sided_p(z)


def sutva_diagnostic(sweep, alpha: float = 0.05) -> DiagnosticReport:
    """Test the three no-interference conditions across a sweep.

    Without interference the within-cell effect is flat in p, the partial
    effect equals it, and spillover is zero everywhere. Each condition is
    checked with a two-sided z test from the estimates' standard errors;
    the report carries raw per-test p-values and a Bonferroni-adjusted
    verdict over all tests.
    """
    points = sorted(sweep, key=lambda pt: pt.p)
    if len({pt.p for pt in points}) < 2:
        raise InsufficientSweepError("diagnostic needs at least two distinct allocations")

    tests: list[DiagnosticTest] = []
    metrics = sorted({m for pt in points for m in pt.ate})

    for metric in metrics:
        with_ate = [pt for pt in points if metric in pt.ate]
        for a, b in itertools.combinations(with_ate, 2):
            ea, eb = a.ate[metric], b.ate[metric]
            delta = ea.point - eb.point
            se = math.hypot(ea.std_error, eb.std_error)
            z, pv = _z_test(delta, se)
            tests.append(DiagnosticTest("ate_constant", metric, a.p, b.p, delta, se, z, pv))
        for pt in points:
            if metric in pt.partial and metric in pt.ate:
                ep, ea = pt.partial[metric], pt.ate[metric]
                delta = ep.point - ea.point
                se = math.hypot(ep.std_error, ea.std_error)
                z, pv = _z_test(delta, se)
                tests.append(DiagnosticTest("partial_equals_ate", metric, pt.p, None, delta, se, z, pv))
            if metric in pt.spillover:
                es = pt.spillover[metric]
                z, pv = _z_test(es.point, es.std_error)
                tests.append(
                    DiagnosticTest("spillover_zero", metric, pt.p, None, es.point, es.std_error, z, pv)
                )

    return DiagnosticReport(tests=tests, alpha=alpha)
