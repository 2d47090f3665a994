"""Experiment designs: allocation plans and the cells they identify.

A DesignPlan maps (link, time) to a treatment allocation and gives every
session a cell label. A CellMap lists the contrasts a design identifies:
which cells are compared, which estimand each comparison yields, and which
analysis route (hourly or account) prices its uncertainty.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from . import causal
from .analysis import hourly_fixed_effects_analysis, normalize
from .causal import assign_bernoulli, assign_exact_fraction, unit_uniform
from .errors import EmptyGroupError, InvalidDesignError
from .records import METRICS, Estimate

DAY_S = 86400.0
_MAX_RELABEL_RETRIES = 32


@dataclass(frozen=True)
class Phase:
    start: float
    end: float  # exclusive
    label: str
    allocations: dict  # link_id -> p; the None key applies to every link

    def allocation(self, link_id: int) -> float:
        if link_id in self.allocations:
            return self.allocations[link_id]
        return self.allocations.get(None, 0.0)

    def contains(self, time: float) -> bool:
        return self.start <= time < self.end


@dataclass
class DesignPlan:
    """Allocation schedule for one experiment."""

    kind: str
    assignment_seed: int
    horizon_s: float
    phases: list[Phase]
    allocation_mode: str = "bernoulli"
    params: dict = field(default_factory=dict)
    relabel_retries: int = 0
    burn_in_s: float = 0.0
    carryover_sessions: int = 0

    def __post_init__(self):
        if self.allocation_mode not in ("bernoulli", "exact"):
            raise InvalidDesignError(f"unknown allocation mode {self.allocation_mode!r}")
        self.phases = sorted(self.phases, key=lambda ph: ph.start)
        if not self.phases:
            raise InvalidDesignError("plan needs at least one phase")
        if self.phases[0].start != 0.0 or self.phases[-1].end < self.horizon_s:
            raise InvalidDesignError("phases must cover the horizon")
        for a, b in zip(self.phases, self.phases[1:]):
            if a.end != b.start:
                raise InvalidDesignError("phases must partition time with no gaps or overlaps")
        for ph in self.phases:
            for p in ph.allocations.values():
                if not 0.0 <= p <= 1.0:
                    raise InvalidDesignError(f"allocation {p} outside [0, 1]")

    def phase_at(self, time: float) -> Phase:
        for ph in self.phases:
            if ph.contains(time):
                return ph
        return self.phases[-1]

    def allocation(self, link_id: int, time: float) -> float:
        return self.phase_at(time).allocation(link_id)

    def cell(self, link_id: int, time: float, treated: int) -> str:
        ph = self.phase_at(time)
        arm = "treated" if treated else "control"
        prefix = f"{ph.label}:" if ph.label else ""
        return f"{prefix}link{link_id}:{arm}"

    def assign_sessions(self, sessions) -> dict[int, int]:
        """Treatment flag per session id.

        Bernoulli mode hashes (assignment seed, session id) against the
        cell's allocation. Exact mode treats round(p*n) sessions within each
        synchronized start cohort, for lab-style populations where the
        realized split must match the nominal one.
        """
        out: dict[int, int] = {}
        self.carryover_sessions = 0
        if self.allocation_mode == "exact":
            cohorts: dict[tuple[int, int], list] = {}
            for s in sessions:
                cohorts.setdefault((s.link_id, s.first_step), []).append(s)
            for (link_id, _), members in sorted(cohorts.items()):
                p = self.allocation(link_id, members[0].start_time)
                vec = assign_exact_fraction([m.session_id for m in members], p, self.assignment_seed)
                out.update(vec.assignments)
        else:
            for s in sessions:
                p = self.allocation(s.link_id, s.start_time)
                out[s.session_id] = int(unit_uniform(self.assignment_seed, s.session_id) < p)
        return out

    def count_carryover(self, sessions, dt: float) -> int:
        """Sessions outliving the phase they started in (kept, but counted)."""
        if len(self.phases) <= 1:
            self.carryover_sessions = 0
        else:
            self.carryover_sessions = sum(
                1 for s in sessions if (s.last_step + 1) * dt > self.phase_at(s.start_time).end
            )
        return self.carryover_sessions

    def interval_labels(self) -> list[str]:
        return [ph.label for ph in self.phases]

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "assignment_seed": self.assignment_seed}
        cfg.update(self.params)
        if self.allocation_mode != "bernoulli":
            cfg["allocation_mode"] = self.allocation_mode
        if self.burn_in_s:
            cfg["burn_in_s"] = self.burn_in_s
        return cfg


# ---------------------------------------------------------------------------
# Cell selection


@dataclass(frozen=True)
class CellSelector:
    """Structural predicate over session records."""

    treatment: int | None = None
    link_ids: tuple[int, ...] | None = None
    windows: tuple[tuple[float, float], ...] | None = None  # [start, end) unions

    def matches(self, record) -> bool:
        if self.treatment is not None and record.treatment != self.treatment:
            return False
        if self.link_ids is not None and record.link_id not in self.link_ids:
            return False
        if self.windows is not None and not any(
            lo <= record.start_time < hi for lo, hi in self.windows
        ):
            return False
        return True

    def select(self, records) -> list:
        return [r for r in records if self.matches(r)]


@dataclass(frozen=True)
class CellContrast:
    estimand: str
    kind: str  # "ate", "tte", "spillover", "partial", "aa"
    p: float | None
    numerator: CellSelector
    denominator: CellSelector
    analysis: str  # "hourly" or "account"


@dataclass
class CellMap:
    contrasts: list[CellContrast]
    normalization: CellSelector | None = None

    def estimands(self) -> list[str]:
        return [c.estimand for c in self.contrasts]


def estimate_all(records, cell_map: CellMap, metrics=None, lag: int = 2) -> list[Estimate]:
    """Every estimand in the cell map, for every metric, with its base.

    Hourly contrasts run through the fixed-effects pipeline; naive contrasts
    run through the account-level analysis. Each estimate carries the
    normalization base (the mean of the map's global control cell) intact.
    """
    metrics = list(metrics) if metrics is not None else list(METRICS)
    estimates: list[Estimate] = []
    for metric in metrics:
        base = None
        if cell_map.normalization is not None:
            base_records = cell_map.normalization.select(records)
            if base_records:
                base = causal.group_mean(base_records, metric)
        for contrast in cell_map.contrasts:
            num = contrast.numerator.select(records)
            den = contrast.denominator.select(records)
            if not num:
                raise EmptyGroupError(f"{contrast.estimand}: numerator cell matched no sessions")
            if not den:
                raise EmptyGroupError(f"{contrast.estimand}: denominator cell matched no sessions")
            if contrast.kind == "ate":
                est = causal.naive_ate(num + den, metric, allocation_p=contrast.p)
            elif contrast.kind == "tte":
                est = causal.tte_estimate(num, den, metric, lag=lag)
            elif contrast.kind == "spillover":
                est = causal.spillover_estimate(num, den, metric, contrast.p, lag=lag)
            elif contrast.kind == "partial":
                est = causal.partial_effect(num, den, metric, contrast.p, lag=lag)
            elif contrast.kind == "aa":
                est = hourly_fixed_effects_analysis(num, den, metric, contrast.estimand, lag=lag)
            else:
                raise InvalidDesignError(f"unknown contrast kind {contrast.kind!r}")
            if base is not None and base > 0:
                est = normalize(est, base)
            estimates.append(est)
    return estimates


def cell_of(plan: DesignPlan, record) -> str:
    return plan.cell(record.link_id, record.start_time, record.treatment)


# ---------------------------------------------------------------------------
# Plan constructors


def plan_paired_link(
    horizon_s: float,
    p_high: float = 0.95,
    p_low: float = 0.05,
    seed: int = 0,
    link_high: int = 1,
    link_low: int = 2,
) -> tuple[DesignPlan, CellMap]:
    """Mirrored allocations on a pair of statistically similar links.

    The cross-link contrasts identify the total effect (treated on the
    mostly-treated link against control on the mostly-control link) and the
    spillover (control against control); the within-link contrasts give the
    two concurrent naive readings. Everything is normalized by the mostly-
    control link's control mean.
    """
    if not 0.0 < p_low < p_high < 1.0:
        raise InvalidDesignError(
            f"need 0 < p_low < p_high < 1, got p_low={p_low}, p_high={p_high}"
        )
    phase = Phase(0.0, horizon_s, "", {link_high: p_high, link_low: p_low})
    plan = DesignPlan(
        kind="paired_link",
        assignment_seed=seed,
        horizon_s=horizon_s,
        phases=[phase],
        params={"p_high": p_high, "p_low": p_low, "link_high": link_high, "link_low": link_low},
    )
    hi = (link_high,)
    lo = (link_low,)
    contrasts = [
        CellContrast(
            "tte", "tte", None,
            CellSelector(treatment=1, link_ids=hi),
            CellSelector(treatment=0, link_ids=lo),
            "hourly",
        ),
        CellContrast(
            f"spillover({p_high:g})", "spillover", p_high,
            CellSelector(treatment=0, link_ids=hi),
            CellSelector(treatment=0, link_ids=lo),
            "hourly",
        ),
        CellContrast(
            f"ate({p_high:g})", "ate", p_high,
            CellSelector(treatment=1, link_ids=hi),
            CellSelector(treatment=0, link_ids=hi),
            "account",
        ),
        CellContrast(
            f"ate({p_low:g})", "ate", p_low,
            CellSelector(treatment=1, link_ids=lo),
            CellSelector(treatment=0, link_ids=lo),
            "account",
        ),
    ]
    cell_map = CellMap(contrasts, normalization=CellSelector(treatment=0, link_ids=lo))
    return plan, cell_map


def _draw_interval_labels(n_intervals: int, seed: int) -> tuple[list[bool], int]:
    """Fair-coin interval labels, redrawn until both arms appear."""
    for attempt in range(_MAX_RELABEL_RETRIES + 1):
        labels = [unit_uniform(seed + attempt, k, domain=b"switch") < 0.5 for k in range(n_intervals)]
        if any(labels) and not all(labels):
            return labels, attempt
    raise InvalidDesignError(
        f"could not draw both interval labels in {_MAX_RELABEL_RETRIES} retries"
    )


def plan_switchback(
    horizon_s: float,
    interval_length_s: float = DAY_S,
    within_alloc: float = 0.95,
    seed: int = 0,
    burn_in_s: float = 0.0,
) -> tuple[DesignPlan, CellMap]:
    """Whole intervals flip between mostly-treated and mostly-control.

    Treatment intervals run Bernoulli(within_alloc), control intervals the
    mirror image, so spillover stays estimable unless within_alloc is 1.
    Label draws that put every interval in one arm are redrawn (the retry
    count is kept on the plan). Sessions outliving their interval are
    counted as carryover; a positive burn-in trims each interval's head out
    of the estimation windows.
    """
    n_intervals = int(horizon_s // interval_length_s)
    if n_intervals < 2:
        raise InvalidDesignError("switchback needs at least two intervals")
    if not 0.5 < within_alloc <= 1.0:
        raise InvalidDesignError("within_alloc should be in (0.5, 1]")
    labels, retries = _draw_interval_labels(n_intervals, seed)

    phases = []
    for k, is_treatment in enumerate(labels):
        start = k * interval_length_s
        end = min((k + 1) * interval_length_s, horizon_s)
        p = within_alloc if is_treatment else 1.0 - within_alloc
        phases.append(Phase(start, end, f"i{k}{'T' if is_treatment else 'C'}", {None: p}))
    if phases[-1].end < horizon_s:
        phases[-1] = Phase(phases[-1].start, horizon_s, phases[-1].label, phases[-1].allocations)

    plan = DesignPlan(
        kind="switchback",
        assignment_seed=seed,
        horizon_s=horizon_s,
        phases=phases,
        params={"interval_length_s": interval_length_s, "within_alloc": within_alloc},
        relabel_retries=retries,
        burn_in_s=burn_in_s,
    )

    t_windows = tuple(
        (ph.start + burn_in_s, ph.end) for ph, t in zip(phases, labels) if t
    )
    c_windows = tuple(
        (ph.start + burn_in_s, ph.end) for ph, t in zip(phases, labels) if not t
    )
    contrasts = [
        CellContrast(
            "tte", "tte", None,
            CellSelector(treatment=1, windows=t_windows),
            CellSelector(treatment=0, windows=c_windows),
            "hourly",
        ),
        CellContrast(
            f"ate({within_alloc:g})", "ate", within_alloc,
            CellSelector(treatment=1, windows=t_windows),
            CellSelector(treatment=0, windows=t_windows),
            "account",
        ),
        CellContrast(
            f"ate({1 - within_alloc:g})", "ate", 1 - within_alloc,
            CellSelector(treatment=1, windows=c_windows),
            CellSelector(treatment=0, windows=c_windows),
            "account",
        ),
    ]
    if within_alloc < 1.0:
        contrasts.insert(
            1,
            CellContrast(
                f"spillover({within_alloc:g})", "spillover", within_alloc,
                CellSelector(treatment=0, windows=t_windows),
                CellSelector(treatment=0, windows=c_windows),
                "hourly",
            ),
        )
    cell_map = CellMap(contrasts, normalization=CellSelector(treatment=0, windows=c_windows))
    return plan, cell_map


def plan_event_study(
    horizon_s: float,
    change_time_s: float,
    pre_alloc: float = 0.05,
    post_alloc: float = 0.95,
    seed: int = 0,
) -> tuple[DesignPlan, CellMap]:
    """Before/after comparison around one deployment change point.

    Needs at least a full day on each side of the change. Identical pre and
    post allocations degenerate to a plain concurrent test, which is allowed
    but warned about. Seasonality lining up with the change (weekends in
    particular) biases this design; calibrate it on baseline data first.
    """
    if not DAY_S <= change_time_s <= horizon_s - DAY_S:
        raise InvalidDesignError(
            "change point must leave at least one full day on each side of the horizon"
        )
    if pre_alloc == post_alloc:
        warnings.warn(
            "pre and post allocations are equal; the design degenerates to a naive test",
            UserWarning,
        )
    phases = [
        Phase(0.0, change_time_s, "pre", {None: pre_alloc}),
        Phase(change_time_s, horizon_s, "post", {None: post_alloc}),
    ]
    plan = DesignPlan(
        kind="event_study",
        assignment_seed=seed,
        horizon_s=horizon_s,
        phases=phases,
        params={"change_time_s": change_time_s, "pre_alloc": pre_alloc, "post_alloc": post_alloc},
    )
    pre_w = ((0.0, change_time_s),)
    post_w = ((change_time_s, horizon_s),)
    contrasts = [
        CellContrast(
            "tte", "tte", None,
            CellSelector(treatment=1, windows=post_w),
            CellSelector(treatment=0, windows=pre_w),
            "hourly",
        ),
        CellContrast(
            f"spillover({post_alloc:g})", "spillover", post_alloc,
            CellSelector(treatment=0, windows=post_w),
            CellSelector(treatment=0, windows=pre_w),
            "hourly",
        ),
        CellContrast(
            f"ate({post_alloc:g})", "ate", post_alloc,
            CellSelector(treatment=1, windows=post_w),
            CellSelector(treatment=0, windows=post_w),
            "account",
        ),
        CellContrast(
            f"ate({pre_alloc:g})", "ate", pre_alloc,
            CellSelector(treatment=1, windows=pre_w),
            CellSelector(treatment=0, windows=pre_w),
            "account",
        ),
    ]
    cell_map = CellMap(contrasts, normalization=CellSelector(treatment=0, windows=pre_w))
    return plan, cell_map


def plan_gradual(
    horizon_s: float,
    schedule,
    seed: int = 0,
) -> tuple[DesignPlan, CellMap]:
    """Staged rollout: per-phase allocations climbing to full deployment.

    Each intermediate phase yields its naive, spillover, and partial
    estimands against the initial (all-control) phase; the final phase
    against the first gives the total effect. The full estimand set feeds
    the interference diagnostic.
    """
    sched = [(float(t), float(p)) for t, p in schedule]
    if not sched:
        raise InvalidDesignError("gradual schedule is empty")
    if sched[0][0] != 0.0:
        raise InvalidDesignError("gradual schedule must start at time 0")
    ps = [p for _, p in sched]
    if any(b < a for a, b in zip(ps, ps[1:])):
        raise InvalidDesignError("gradual schedule allocations must be nondecreasing")
    times = [t for t, _ in sched]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InvalidDesignError("gradual schedule times must be strictly increasing")
    single_full = len(sched) == 1 and ps[0] == 1.0
    if not single_full:
        if ps[-1] != 1.0:
            raise InvalidDesignError("gradual schedule must end at full deployment (p = 1)")
        if ps[0] > 0.1:
            warnings.warn("gradual schedule starts above 10%; baseline phase is impure", UserWarning)

    phases = []
    for k, (t, p) in enumerate(sched):
        end = sched[k + 1][0] if k + 1 < len(sched) else horizon_s
        phases.append(Phase(t, end, f"ph{k}", {None: p}))
    plan = DesignPlan(
        kind="gradual",
        assignment_seed=seed,
        horizon_s=horizon_s,
        phases=phases,
        params={"schedule": [[t, p] for t, p in sched]},
    )

    contrasts: list[CellContrast] = []
    windows = [((ph.start, ph.end),) for ph in phases]
    base_window = windows[0]
    base_is_control = ps[0] < 1.0
    for k, p in enumerate(ps):
        if 0.0 < p < 1.0:
            contrasts.append(
                CellContrast(
                    f"ate({p:g})", "ate", p,
                    CellSelector(treatment=1, windows=windows[k]),
                    CellSelector(treatment=0, windows=windows[k]),
                    "account",
                )
            )
            if base_is_control and k > 0:
                contrasts.append(
                    CellContrast(
                        f"spillover({p:g})", "spillover", p,
                        CellSelector(treatment=0, windows=windows[k]),
                        CellSelector(treatment=0, windows=base_window),
                        "hourly",
                    )
                )
                contrasts.append(
                    CellContrast(
                        f"partial({p:g})", "partial", p,
                        CellSelector(treatment=1, windows=windows[k]),
                        CellSelector(treatment=0, windows=base_window),
                        "hourly",
                    )
                )
    if base_is_control and ps[-1] == 1.0 and len(ps) > 1:
        contrasts.append(
            CellContrast(
                "tte", "tte", None,
                CellSelector(treatment=1, windows=windows[-1]),
                CellSelector(treatment=0, windows=base_window),
                "hourly",
            )
        )
    norm = CellSelector(treatment=0, windows=base_window) if base_is_control else None
    return plan, CellMap(contrasts, normalization=norm)


def plan_aa(
    horizon_s: float,
    seed: int = 0,
    links: tuple[int, ...] = (1, 2),
) -> tuple[DesignPlan, CellMap]:
    """Everything in control; used to calibrate a design's false positives.

    With two or more links the comparison is link against link; with one
    link it is the first half of the horizon against the second.
    """
    phase = Phase(0.0, horizon_s, "", {None: 0.0})
    plan = DesignPlan(
        kind="aa",
        assignment_seed=seed,
        horizon_s=horizon_s,
        phases=[phase],
        params={"links": list(links)},
    )
    if len(links) >= 2:
        num = CellSelector(treatment=0, link_ids=(links[0],))
        den = CellSelector(treatment=0, link_ids=(links[1],))
        norm = den
    else:
        half = horizon_s / 2.0
        num = CellSelector(treatment=0, windows=((half, horizon_s),))
        den = CellSelector(treatment=0, windows=((0.0, half),))
        norm = den
    contrast = CellContrast("aa", "aa", None, num, den, "hourly")
    return plan, CellMap([contrast], normalization=norm)


# ---------------------------------------------------------------------------
# Emulated designs over a paired-link log


def switchback_emulation_cellmap(
    horizon_s: float,
    interval_length_s: float = DAY_S,
    seed: int = 0,
    treated_link: int = 1,
    control_link: int = 2,
) -> tuple[CellMap, list[bool]]:
    """Re-read a paired-link log as if a switchback had been run.

    Treatment intervals take the treated sessions of the mostly-treated
    link; control intervals take the control sessions of the mostly-control
    link; everything else is ignored.
    """
    n_intervals = int(horizon_s // interval_length_s)
    if n_intervals < 2:
        raise InvalidDesignError("switchback emulation needs at least two intervals")
    labels, _ = _draw_interval_labels(n_intervals, seed)
    t_windows = tuple(
        (k * interval_length_s, min((k + 1) * interval_length_s, horizon_s))
        for k, t in enumerate(labels)
        if t
    )
    c_windows = tuple(
        (k * interval_length_s, min((k + 1) * interval_length_s, horizon_s))
        for k, t in enumerate(labels)
        if not t
    )
    contrast = CellContrast(
        "tte", "tte", None,
        CellSelector(treatment=1, link_ids=(treated_link,), windows=t_windows),
        CellSelector(treatment=0, link_ids=(control_link,), windows=c_windows),
        "hourly",
    )
    norm = CellSelector(treatment=0, link_ids=(control_link,), windows=c_windows)
    return CellMap([contrast], normalization=norm), labels


def event_study_emulation_cellmap(
    horizon_s: float,
    change_time_s: float,
    treated_link: int = 1,
    control_link: int = 2,
) -> CellMap:
    """Re-read a paired-link log as if treatment had launched mid-horizon."""
    if not 0.0 < change_time_s < horizon_s:
        raise InvalidDesignError("change point must fall inside the horizon")
    contrast = CellContrast(
        "tte", "tte", None,
        CellSelector(treatment=1, link_ids=(treated_link,), windows=((change_time_s, horizon_s),)),
        CellSelector(treatment=0, link_ids=(control_link,), windows=((0.0, change_time_s),)),
        "hourly",
    )
    norm = CellSelector(
        treatment=0, link_ids=(control_link,), windows=((0.0, change_time_s),)
    )
    return CellMap([contrast], normalization=norm)


# ---------------------------------------------------------------------------
# A/A calibration views of candidate designs


def aa_view_of_design(design: dict, horizon_s: float, links) -> CellMap:
    """Cell map a candidate design induces on an all-control baseline log.

    The design's "treated" side becomes a purely temporal (or link-wise)
    selection, so any rejection is a false positive by construction.
    """
    kind = design.get("kind")
    if kind == "event_study":
        change = float(design["change_time_s"])
        contrast = CellContrast(
            "aa_event_study", "aa", None,
            CellSelector(windows=((change, horizon_s),)),
            CellSelector(windows=((0.0, change),)),
            "hourly",
        )
        return CellMap([contrast])
    if kind == "switchback":
        interval = float(design.get("interval_length_s", DAY_S))
        seed = int(design.get("assignment_seed", 0))
        n_intervals = int(horizon_s // interval)
        if n_intervals < 2:
            raise InvalidDesignError("switchback calibration needs at least two intervals")
        labels, _ = _draw_interval_labels(n_intervals, seed)
        t_w = tuple(
            (k * interval, min((k + 1) * interval, horizon_s)) for k, t in enumerate(labels) if t
        )
        c_w = tuple(
            (k * interval, min((k + 1) * interval, horizon_s)) for k, t in enumerate(labels) if not t
        )
        contrast = CellContrast(
            "aa_switchback", "aa", None,
            CellSelector(windows=t_w),
            CellSelector(windows=c_w),
            "hourly",
        )
        return CellMap([contrast])
    if kind == "paired_link":
        link_high = int(design.get("link_high", links[0]))
        link_low = int(design.get("link_low", links[-1]))
        contrast = CellContrast(
            "aa_paired_link", "aa", None,
            CellSelector(link_ids=(link_high,)),
            CellSelector(link_ids=(link_low,)),
            "hourly",
        )
        return CellMap([contrast])
    raise InvalidDesignError(f"calibration does not support design kind {kind!r}")


# ---------------------------------------------------------------------------
# Config dispatch


def build_plan(design: dict, horizon_s: float, link_ids) -> DesignPlan:
    plan, _ = build_plan_and_cells(design, horizon_s, link_ids)
    return plan


def build_plan_and_cells(design: dict, horizon_s: float, link_ids) -> tuple[DesignPlan, CellMap]:
    """Construct the plan and cell map described by a config design block."""
    kind = design.get("kind")
    seed = int(design.get("assignment_seed", 0))
    mode = design.get("allocation_mode", "bernoulli")
    if mode not in ("bernoulli", "exact"):
        raise InvalidDesignError(f"unknown allocation mode {mode!r}")
    link_ids = list(link_ids)

    if kind == "ab":
        p = float(design["p"])
        if not 0.0 <= p <= 1.0:
            raise InvalidDesignError(f"allocation {p} outside [0, 1]")
        phase = Phase(0.0, horizon_s, "", {None: p})
        plan = DesignPlan(
            kind="ab",
            assignment_seed=seed,
            horizon_s=horizon_s,
            phases=[phase],
            allocation_mode=mode,
            params={"p": p},
        )
        contrasts = []
        if 0.0 < p < 1.0:
            contrasts.append(
                CellContrast(
                    f"ate({p:g})", "ate", p,
                    CellSelector(treatment=1),
                    CellSelector(treatment=0),
                    "account",
                )
            )
        norm = CellSelector(treatment=0) if p < 1.0 else None
        return plan, CellMap(contrasts, normalization=norm)
    if kind == "paired_link":
        plan, cells = plan_paired_link(
            horizon_s,
            p_high=float(design.get("p_high", 0.95)),
            p_low=float(design.get("p_low", 0.05)),
            seed=seed,
            link_high=int(design.get("link_high", link_ids[0])),
            link_low=int(design.get("link_low", link_ids[-1])),
        )
    elif kind == "switchback":
        plan, cells = plan_switchback(
            horizon_s,
            interval_length_s=float(design.get("interval_length_s", DAY_S)),
            within_alloc=float(design.get("within_alloc", 0.95)),
            seed=seed,
            burn_in_s=float(design.get("burn_in_s", 0.0)),
        )
    elif kind == "event_study":
        plan, cells = plan_event_study(
            horizon_s,
            change_time_s=float(design["change_time_s"]),
            pre_alloc=float(design.get("pre_alloc", 0.05)),
            post_alloc=float(design.get("post_alloc", 0.95)),
            seed=seed,
        )
    elif kind == "gradual":
        plan, cells = plan_gradual(horizon_s, design["schedule"], seed=seed)
    elif kind == "aa":
        plan, cells = plan_aa(horizon_s, seed=seed, links=tuple(link_ids))
    else:
        raise InvalidDesignError(f"unknown design kind {kind!r}")
    plan.allocation_mode = mode
    return plan, cells
