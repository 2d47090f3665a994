"""Time-stepped fluid simulator of sessions sharing bottleneck links.

Sessions arrive by a diurnal Poisson process (or as a fixed set of
synchronized bulk "applications"), pick a bitrate from a ladder once at
start, and then share each link by weighted max-min fairness every step.
Congestion is two-regime: while offered load meets capacity, a standing
queue delay applies and the per-byte retransmit probability scales with how
aggressive the flow mix is.

Throughput is recorded as the per-step available bandwidth a client's
bursts would measure (the flow's max-min rate with its own demand
unbounded), not the content delivery rate; content bytes are tracked
separately and feed the retransmit fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLogError, ModelError
from .fairshare import available_rates, weighted_share
from .records import METRICS, SessionRecord

DEFAULT_DT = 60.0
DEFAULT_LOSS_GAMMA = math.log2(3.0)
INCUMBENT_ALGORITHM = "incumbent"


@dataclass(frozen=True)
class LinkSpec:
    """A bottleneck link; the standing queue delay defaults to one base RTT
    (a one-bandwidth-delay-product buffer)."""

    link_id: int
    capacity: float  # bits/s
    base_rtt: float  # seconds
    standing_queue_delay: float | None = None
    base_loss: float = 0.0025

    def __post_init__(self):
        if self.capacity <= 0:
            raise ModelError(f"link {self.link_id}: capacity must be > 0")
        if self.base_rtt <= 0:
            raise ModelError(f"link {self.link_id}: base_rtt must be > 0")
        if self.standing_queue_delay is None:
            object.__setattr__(self, "standing_queue_delay", self.base_rtt)
        if self.standing_queue_delay < 0:
            raise ModelError(f"link {self.link_id}: standing_queue_delay must be >= 0")
        if not 0.0 <= self.base_loss < 1.0:
            raise ModelError(f"link {self.link_id}: base_loss must be in [0, 1)")


@dataclass(frozen=True)
class WorkloadSpec:
    """Session arrivals and client behavior.

    `hourly_arrival_rates` gives per-link arrival rates (sessions/s) by hour
    of day, optionally scaled per day by `day_factors` (e.g. a weekend
    bump). When `persistent_sessions` is set the Poisson process is replaced
    by that many synchronized bulk-transfer slots that restart back to back
    for the whole horizon.
    """

    hourly_arrival_rates: tuple[float, ...]
    bitrate_ladder: tuple[float, ...]
    session_duration: float = 900.0
    ladder_fraction: float = 1.0
    startup_bytes: float = 2e6
    n_days: int = 1
    day_factors: tuple[float, ...] | None = None
    persistent_sessions: int | None = None
    accounts_per_link: int = 200
    access_rate: float | None = None
    # Client-reported throughput blends delivered rate with burst headroom:
    # rate-limited flows only probe headroom during a fraction of the time.
    probe_weight: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "hourly_arrival_rates", tuple(self.hourly_arrival_rates))
        object.__setattr__(self, "bitrate_ladder", tuple(self.bitrate_ladder))
        if self.day_factors is not None:
            object.__setattr__(self, "day_factors", tuple(self.day_factors))
        if len(self.hourly_arrival_rates) != 24:
            raise ModelError("hourly_arrival_rates must have exactly 24 entries")
        if any(r < 0 for r in self.hourly_arrival_rates):
            raise ModelError("arrival rates must be >= 0")
        if not self.bitrate_ladder or any(
            b <= a for a, b in zip(self.bitrate_ladder, self.bitrate_ladder[1:])
        ):
            raise ModelError("bitrate ladder must be non-empty and strictly ascending")
        if any(b <= 0 for b in self.bitrate_ladder):
            raise ModelError("bitrate ladder rungs must be > 0")
        if not 0.0 < self.ladder_fraction <= 1.0:
            raise ModelError("ladder_fraction must be in (0, 1]")
        if self.session_duration <= 0:
            raise ModelError("session_duration must be > 0")
        if self.n_days < 1:
            raise ModelError("n_days must be >= 1")
        if self.day_factors is not None and len(self.day_factors) != self.n_days:
            raise ModelError("day_factors must have one entry per day")
        if self.persistent_sessions is not None and self.persistent_sessions < 1:
            raise ModelError("persistent_sessions must be >= 1 when set")
        if self.accounts_per_link < 1:
            raise ModelError("accounts_per_link must be >= 1")
        if not 0.0 <= self.probe_weight <= 1.0:
            raise ModelError("probe_weight must be in [0, 1]")

    @property
    def horizon_s(self) -> float:
        return self.n_days * 86400.0

    def arrival_rate(self, hour: int) -> float:
        rate = self.hourly_arrival_rates[hour % 24]
        if self.day_factors is not None:
            rate *= self.day_factors[min(hour // 24, len(self.day_factors) - 1)]
        return rate

    def client_access_rate(self) -> float:
        """Throughput estimate a client uses to pick its rung when the
        network is not the constraint."""
        if self.access_rate is not None:
            return self.access_rate
        return self.bitrate_ladder[-1] / self.ladder_fraction


TREATMENT_KINDS = ("inert", "weight_multiplier", "bitrate_cap", "pacing_flag", "cc_algorithm")


@dataclass(frozen=True)
class TreatmentSpec:
    kind: str
    multiplier: float | None = None
    cap: float | None = None
    algorithm: str | None = None

    def __post_init__(self):
        if self.kind not in TREATMENT_KINDS:
            raise ModelError(f"unknown treatment kind {self.kind!r}")
        if self.kind == "weight_multiplier" and (self.multiplier is None or self.multiplier <= 0):
            raise ModelError("weight_multiplier treatment needs multiplier > 0")
        if self.kind == "bitrate_cap" and (self.cap is None or self.cap <= 0):
            raise ModelError("bitrate_cap treatment needs cap > 0")
        if self.kind == "cc_algorithm" and not self.algorithm:
            raise ModelError("cc_algorithm treatment needs an algorithm label")


@dataclass(frozen=True)
class CompetitionModel:
    """How concurrent flows translate into competitive weights and losses.

    `loss_gamma` calibrates congested retransmits: doubling every flow's
    weight multiplies the congested loss rate by 2**gamma (3x at the
    default). `unpaced_weight` is the competitive advantage of unpaced over
    paced flows. `advantage_kappa` shapes the minority advantage curve for
    competing congestion-control algorithms.
    """

    kind: str = "weighted_share"
    loss_gamma: float = DEFAULT_LOSS_GAMMA
    unpaced_weight: float = 2.0
    advantage_kappa: float = 3.0

    def __post_init__(self):
        if self.kind not in ("weighted_share", "asymmetric_cc"):
            raise ModelError(f"unknown competition model {self.kind!r}")
        if self.unpaced_weight <= 0 or self.advantage_kappa < 0:
            raise ModelError("competition parameters must be positive")


@dataclass
class FlowState:
    """Mutable per-session state while the session is on the link."""

    session_id: int
    account_id: int
    link_id: int
    start_time: float
    treatment: int
    cell: str
    demand: float  # bits/s; inf for bulk transfers
    bitrate: float  # chosen rung; 0 for bulk (reported as mean delivered rate)
    first_step: int
    last_step: int
    startup_bytes: float = 2e6
    delivered_bytes: float = 0.0
    retransmitted_bytes: float = 0.0
    min_queue_delay_seen: float = math.inf
    sum_available: float = 0.0
    sum_alloc: float = 0.0
    steps_seen: int = 0
    play_delay: float = 0.0

    def __post_init__(self):
        if self.demand != math.inf and self.demand <= 0:
            raise ModelError("flow demand must be positive or unbounded")


@dataclass(frozen=True)
class MixSummary:
    """Aggregate flow attributes a step's loss rate depends on."""

    mean_weight: float
    unpaced_byte_fraction: float | None = None


@dataclass(frozen=True)
class StepOutcome:
    utilization: float
    congested: bool
    queue_delay: float
    loss: float
    allocations: np.ndarray
    available: np.ndarray


def choose_bitrate(estimated_throughput: float, workload: WorkloadSpec, cap: float | None = None) -> float:
    """Highest rung within the usable fraction of estimated throughput,
    held at or below the cap when one applies, never below the floor rung."""
    target = workload.ladder_fraction * estimated_throughput
    if cap is not None:
        target = min(target, cap)
    chosen = workload.bitrate_ladder[0]
    for rung in workload.bitrate_ladder:
        if rung <= target:
            chosen = rung
        else:
            break
    return chosen


def advantage_curve(own_fraction: float, kappa: float) -> float:
    """Minority-advantage weight ratio, 1 + kappa * (1 - f), clamped to the
    curve's limit values outside (0, 1). Equals 1 when the algorithm carries
    all traffic, so pure populations share identically."""
    f = min(max(own_fraction, 0.0), 1.0)
    return 1.0 + kappa * (1.0 - f)


def asymmetric_cc_weight(
    algorithm: str,
    own_fraction: float,
    new_algorithm: str,
    kappa: float = 3.0,
) -> float:
    """Competitive weight of a flow running `algorithm` when that algorithm
    carries `own_fraction` of flows. The newly introduced algorithm follows
    the advantage curve against incumbent flows of weight 1, whichever label
    it carries."""
    if algorithm == new_algorithm:
        return advantage_curve(own_fraction, kappa)
    return 1.0


def step_weights(flows, treatment: TreatmentSpec, model: CompetitionModel) -> np.ndarray:
    n = len(flows)
    if n == 0:
        return np.zeros(0)
    if treatment.kind == "weight_multiplier":
        return np.array([treatment.multiplier if f.treatment else 1.0 for f in flows])
    if treatment.kind == "pacing_flag":
        return np.array([1.0 if f.treatment else model.unpaced_weight for f in flows])
    if treatment.kind == "cc_algorithm":
        treated_fraction = sum(f.treatment for f in flows) / n
        w_new = asymmetric_cc_weight(
            treatment.algorithm, treated_fraction, treatment.algorithm, model.advantage_kappa
        )
        return np.array([w_new if f.treatment else 1.0 for f in flows])
    return np.ones(n)


def loss_rate(
    utilization: float,
    mix: MixSummary,
    link: LinkSpec,
    model: CompetitionModel,
    pacing_active: bool = False,
) -> float:
    """Per-byte retransmit probability for one step.

    Uncongested links sit at the base loss. Under congestion the loss scales
    with (mean flow weight) ** gamma, and, when pacing is in play, with the
    fraction of bytes from unpaced flows: an all-paced population halves the
    congested multiplier while an all-unpaced one keeps it whole.
    """
    if utilization < 1.0:
        return link.base_loss
    aggressiveness = mix.mean_weight**model.loss_gamma
    if pacing_active and mix.unpaced_byte_fraction is not None:
        aggressiveness *= (1.0 + mix.unpaced_byte_fraction) / 2.0
    return min(link.base_loss * aggressiveness, 0.999)


def advance_step(
    link: LinkSpec,
    flows: list[FlowState],
    dt: float,
    model: CompetitionModel,
    treatment: TreatmentSpec,
    queue_delay_uniforms: np.ndarray | None = None,
    probe_weight: float = 0.4,
) -> StepOutcome:
    """Advance every flow on one link by dt seconds.

    Allocations come from weighted max-min sharing; the step is congested
    when offered demand meets capacity, which switches on the standing queue
    delay and the congested loss rate. Reported throughput blends the burst
    rate (fair share while the link is saturated, available headroom while
    it is not) with the delivered rate, weighted by `probe_weight`. A flow
    records the step's queue delay into its running minimum on its first
    step always, and afterwards with probability demand/burst (its duty
    cycle): a mostly-idle flow's bursts sample the queue sparsely. Passing
    no uniforms records the delay on every step.
    """
    if dt <= 0:
        raise ModelError("dt must be > 0")
    if not flows:
        return StepOutcome(0.0, False, 0.0, link.base_loss, np.zeros(0), np.zeros(0))

    weights = step_weights(flows, treatment, model)
    demands = np.array([f.demand for f in flows])
    alloc = weighted_share(demands, weights, link.capacity)
    avail = available_rates(demands, weights, link.capacity, alloc)

    total_demand = demands.sum()
    utilization = float(total_demand / link.capacity) if math.isfinite(total_demand) else math.inf
    congested = utilization >= 1.0
    queue_delay = link.standing_queue_delay if congested else 0.0

    if congested:
        unpaced_fraction = None
        if treatment.kind == "pacing_flag":
            total_alloc = float(alloc.sum())
            unpaced = sum(a for a, f in zip(alloc, flows) if not f.treatment)
            unpaced_fraction = unpaced / total_alloc if total_alloc > 0 else 0.0
        mix = MixSummary(float(weights.mean()), unpaced_fraction)
        loss = loss_rate(utilization, mix, link, model, treatment.kind == "pacing_flag")
    else:
        loss = link.base_loss

    # During standing-queue congestion every flow is backlogged and bursts
    # at its fair share; otherwise a burst sees the flow's headroom.
    burst = alloc if congested else avail
    measured = probe_weight * burst + (1.0 - probe_weight) * alloc
    with np.errstate(invalid="ignore"):
        duty = np.where(burst > 0, np.minimum(demands / burst, 1.0), 1.0)

    for i, flow in enumerate(flows):
        first = flow.steps_seen == 0
        delivered = alloc[i] * dt / 8.0
        flow.delivered_bytes += delivered
        flow.retransmitted_bytes += delivered * loss
        flow.sum_available += measured[i]
        flow.sum_alloc += alloc[i]
        if first:
            first_rate = burst[i] if burst[i] > 0 else alloc[i]
            startup = (flow.startup_bytes * 8.0 / first_rate) if first_rate > 0 else math.inf
            flow.play_delay = startup + 2.0 * (link.base_rtt + queue_delay)
        sampled = first or queue_delay_uniforms is None or queue_delay_uniforms[i] < duty[i]
        if sampled:
            flow.min_queue_delay_seen = min(flow.min_queue_delay_seen, queue_delay)
        flow.steps_seen += 1
    return StepOutcome(utilization, congested, queue_delay, loss, alloc, avail)


@dataclass
class LinkStats:
    """Per-link congestion bookkeeping over the run."""

    link_id: int
    congested_steps: int = 0
    total_steps: int = 0
    hourly_congested_steps: dict[int, int] = field(default_factory=dict)
    hourly_active: dict[int, list] = field(default_factory=dict)
    hourly_utilization: dict[int, list] = field(default_factory=dict)

    @property
    def congested_hours(self) -> float:
        return self.congested_steps * DEFAULT_DT / 3600.0

    def record(self, hour: int, active: int, utilization: float, congested: bool):
        self.total_steps += 1
        if congested:
            self.congested_steps += 1
            self.hourly_congested_steps[hour] = self.hourly_congested_steps.get(hour, 0) + 1
        self.hourly_active.setdefault(hour, [0, 0])
        self.hourly_active[hour][0] += active
        self.hourly_active[hour][1] += 1
        cap = 99.0 if math.isinf(utilization) else utilization
        self.hourly_utilization.setdefault(hour, [0.0, 0])
        self.hourly_utilization[hour][0] += cap
        self.hourly_utilization[hour][1] += 1


@dataclass
class SimulationResult:
    records: list[SessionRecord]
    link_stats: dict[int, LinkStats]
    plan: object

    def sessions_per_cell(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.cell] = counts.get(r.cell, 0) + 1
        return dict(sorted(counts.items()))


@dataclass
class _PlannedSession:
    session_id: int
    account_id: int
    link_id: int
    start_time: float
    first_step: int
    last_step: int


def _poisson_arrivals(workload: WorkloadSpec, links, rng, dt: float):
    """Arrival times and account draws per link, deterministic in the rng."""
    duration_steps = max(1, round(workload.session_duration / dt))
    total_hours = workload.n_days * 24
    raw = []
    for link in links:
        for hour in range(total_hours):
            lam = workload.arrival_rate(hour) * 3600.0
            if lam <= 0:
                continue
            count = int(rng.poisson(lam))
            if count == 0:
                continue
            starts = np.sort(rng.uniform(hour * 3600.0, (hour + 1) * 3600.0, size=count))
            accounts = rng.integers(0, workload.accounts_per_link, size=count)
            for s, acct in zip(starts, accounts):
                first = int(s // dt)
                raw.append(
                    (
                        float(s),
                        link.link_id,
                        link.link_id * 100_000 + int(acct),
                        first,
                        first + duration_steps - 1,
                    )
                )
    raw.sort(key=lambda item: (item[0], item[1]))
    return [
        _PlannedSession(sid, acct, link_id, start, first, last)
        for sid, (start, link_id, acct, first, last) in enumerate(raw)
    ]


def _persistent_sessions(workload: WorkloadSpec, links, dt: float):
    """Synchronized bulk-transfer slots restarting back to back."""
    duration_steps = max(1, round(workload.session_duration / dt))
    total_steps = int(workload.horizon_s / dt)
    n_cohorts = total_steps // duration_steps
    raw = []
    for cohort in range(n_cohorts):
        start = cohort * duration_steps * dt
        for link in links:
            for slot in range(workload.persistent_sessions):
                raw.append(
                    (
                        start,
                        link.link_id,
                        link.link_id * 100_000 + slot,
                        cohort * duration_steps,
                        (cohort + 1) * duration_steps - 1,
                    )
                )
    raw.sort(key=lambda item: (item[0], item[1], item[2]))
    return [
        _PlannedSession(sid, acct, link_id, start, first, last)
        for sid, (start, link_id, acct, first, last) in enumerate(raw)
    ]


def simulate(config, plan=None, seed: int | None = None) -> SimulationResult:
    """Run one scenario and return the session log plus link statistics.

    Deterministic: identical (config, plan, seed) inputs produce an
    identical log. The seed drives arrivals and queue-delay sampling; the
    plan's own assignment seed drives treatment assignment.
    """
    from . import designs  # local import to keep module load order simple

    if plan is None:
        plan = designs.build_plan(config.design, config.workload.horizon_s, [l.link_id for l in config.links])
    if seed is None:
        seed = config.seed

    rng = np.random.default_rng(seed)
    workload = config.workload
    dt = DEFAULT_DT

    if workload.persistent_sessions is not None:
        sessions = _persistent_sessions(workload, config.links, dt)
    else:
        sessions = _poisson_arrivals(workload, config.links, rng, dt)
    if not sessions:
        raise EmptyLogError("scenario produced no sessions over the whole horizon")

    assignments = plan.assign_sessions(sessions)
    plan.count_carryover(sessions, dt)

    links = {l.link_id: l for l in config.links}
    flows_by_link: dict[int, list[FlowState]] = {lid: [] for lid in links}
    pending: dict[tuple[int, int], list[FlowState]] = {}
    cap = config.treatment.cap if config.treatment.kind == "bitrate_cap" else None
    access = workload.client_access_rate()

    for s in sessions:
        treated = assignments[s.session_id]
        cell = plan.cell(s.link_id, s.start_time, treated)
        if workload.persistent_sessions is not None:
            demand, bitrate = math.inf, 0.0
        else:
            bitrate = choose_bitrate(access, workload, cap if treated else None)
            demand = bitrate
        flow = FlowState(
            session_id=s.session_id,
            account_id=s.account_id,
            link_id=s.link_id,
            start_time=s.start_time,
            treatment=treated,
            cell=cell,
            demand=demand,
            bitrate=bitrate,
            first_step=s.first_step,
            last_step=s.last_step,
            startup_bytes=workload.startup_bytes,
        )
        pending.setdefault((s.link_id, s.first_step), []).append(flow)

    last_step = max(s.last_step for s in sessions)
    stats = {lid: LinkStats(lid) for lid in links}
    records: list[SessionRecord] = []
    link_ids = sorted(links)

    for step in range(last_step + 1):
        hour = int(step * dt // 3600)
        for lid in link_ids:
            arriving = pending.pop((lid, step), None)
            if arriving:
                flows_by_link[lid].extend(arriving)
            flows = flows_by_link[lid]
            if not flows:
                stats[lid].record(hour, 0, 0.0, False)
                continue
            uniforms = rng.random(len(flows))
            outcome = advance_step(
                links[lid],
                flows,
                dt,
                config.competition,
                config.treatment,
                uniforms,
                probe_weight=workload.probe_weight,
            )
            stats[lid].record(hour, len(flows), outcome.utilization, outcome.congested)

            if any(f.last_step == step for f in flows):
                remaining = []
                for f in flows:
                    if f.last_step == step:
                        records.append(_finalize(f, links[lid], workload))
                    else:
                        remaining.append(f)
                flows_by_link[lid] = remaining

    records.sort(key=lambda r: r.session_id)
    return SimulationResult(records=records, link_stats=stats, plan=plan)


def _finalize(flow: FlowState, link: LinkSpec, workload: WorkloadSpec) -> SessionRecord:
    steps = max(flow.steps_seen, 1)
    avg_throughput = flow.sum_available / steps
    min_rtt = link.base_rtt + (
        flow.min_queue_delay_seen if math.isfinite(flow.min_queue_delay_seen) else 0.0
    )
    retrans = flow.retransmitted_bytes / flow.delivered_bytes if flow.delivered_bytes > 0 else 0.0
    bitrate = flow.bitrate if flow.bitrate > 0 else flow.sum_alloc / steps
    metrics = {
        "avg_throughput": avg_throughput,
        "min_rtt": min_rtt,
        "retrans_frac": retrans,
        "bitrate": bitrate,
        "play_delay": flow.play_delay,
    }
    assert set(metrics) == set(METRICS)
    return SessionRecord(
        session_id=flow.session_id,
        account_id=flow.account_id,
        link_id=flow.link_id,
        start_time=flow.start_time,
        treatment=flow.treatment,
        cell=flow.cell,
        metrics=metrics,
    )


def run_scenario(config, plan=None, seed: int | None = None) -> list[SessionRecord]:
    """Session log for one scenario run; see `simulate` for link statistics."""
    return simulate(config, plan=plan, seed=seed).records
