"""Scenario configuration: parsing, validation, serialization, presets.

A scenario config is a single self-contained JSON document describing
links, workload, competition model, treatment, design, and seed, so one
file reproduces one experiment. Validation collects every violation with a
path-qualified message instead of stopping at the first.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError, ModelError
from .records import METRICS
from .sim import CompetitionModel, LinkSpec, TreatmentSpec, WorkloadSpec

PRESET_NAMES = (
    "test1_connections",
    "test2_pacing",
    "test3_cc",
    "capping_paired_link",
    "capping_switchback",
    "capping_event_study",
    "aa_baseline",
)

_DESIGN_KINDS = ("ab", "paired_link", "switchback", "event_study", "gradual", "aa")

_LINK_KEYS = {"link_id", "capacity_bps", "base_rtt_s", "standing_queue_delay_s", "base_loss"}
_WORKLOAD_KEYS = {
    "hourly_arrival_rates",
    "bitrate_ladder_bps",
    "session_duration_s",
    "ladder_fraction",
    "startup_bytes",
    "n_days",
    "day_factors",
    "persistent_sessions",
    "accounts_per_link",
    "access_rate_bps",
    "probe_weight",
}
_COMPETITION_KEYS = {"kind", "loss_gamma", "unpaced_weight", "advantage_kappa"}
_TREATMENT_KEYS = {"kind", "multiplier", "cap_bps", "algorithm"}
_DESIGN_KEYS = {
    "kind",
    "p",
    "p_high",
    "p_low",
    "link_high",
    "link_low",
    "interval_length_s",
    "within_alloc",
    "change_time_s",
    "pre_alloc",
    "post_alloc",
    "schedule",
    "allocation_mode",
    "assignment_seed",
    "burn_in_s",
}
_TOP_KEYS = {
    "name",
    "seed",
    "links",
    "workload",
    "competition",
    "treatment",
    "design",
    "metrics",
    "replication_count",
}


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    links: list[LinkSpec]
    workload: WorkloadSpec
    competition: CompetitionModel
    treatment: TreatmentSpec
    design: dict
    metrics: list[str] = field(default_factory=lambda: list(METRICS))
    replication_count: int = 1


class _Validator:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, message: str):
        self.errors.append(f"{path}: {message}")

    def require(self, obj: dict, key: str, path: str):
        if key not in obj:
            self.fail(f"{path}.{key}" if path else key, "missing required field")
            return None
        return obj[key]

    def unknown_keys(self, obj: dict, allowed: set, path: str):
        for key in sorted(set(obj) - allowed):
            self.fail(f"{path}.{key}" if path else key, "unknown key")

    def number(self, value, path: str, lo=None, hi=None, integer=False) -> float | None:
        if value is None:
            return None  # a missing-field error was already recorded
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {type(value).__name__}")
            return None
        if integer and int(value) != value:
            self.fail(path, f"expected an integer, got {value}")
            return None
        if not math.isfinite(value):
            self.fail(path, "must be finite")
            return None
        if lo is not None and value < lo:
            self.fail(path, f"{value} below minimum {lo}")
            return None
        if hi is not None and value > hi:
            self.fail(path, f"{value} above maximum {hi}")
            return None
        return value


def _parse_links(v: _Validator, raw) -> list[LinkSpec]:
    links = []
    if not isinstance(raw, list) or not raw:
        v.fail("links", "must be a non-empty list")
        return links
    seen_ids = set()
    for i, item in enumerate(raw):
        path = f"links[{i}]"
        if not isinstance(item, dict):
            v.fail(path, "must be an object")
            continue
        v.unknown_keys(item, _LINK_KEYS, path)
        link_id = v.number(v.require(item, "link_id", path), f"{path}.link_id", lo=0, integer=True)
        cap = v.number(v.require(item, "capacity_bps", path), f"{path}.capacity_bps", lo=1e-9)
        rtt = v.number(v.require(item, "base_rtt_s", path), f"{path}.base_rtt_s", lo=1e-12)
        queue = item.get("standing_queue_delay_s")
        if queue is not None:
            queue = v.number(queue, f"{path}.standing_queue_delay_s", lo=0)
        base_loss = item.get("base_loss", 0.0025)
        base_loss = v.number(base_loss, f"{path}.base_loss", lo=0)
        if base_loss is not None and base_loss >= 1:
            v.fail(f"{path}.base_loss", "must be below 1")
            base_loss = None
        if None in (link_id, cap, rtt) or base_loss is None:
            continue
        if int(link_id) in seen_ids:
            v.fail(f"{path}.link_id", f"duplicate link id {int(link_id)}")
            continue
        seen_ids.add(int(link_id))
        try:
            links.append(
                LinkSpec(
                    link_id=int(link_id),
                    capacity=float(cap),
                    base_rtt=float(rtt),
                    standing_queue_delay=queue,
                    base_loss=float(base_loss),
                )
            )
        except ModelError as exc:
            v.fail(path, str(exc))
    return links


def _parse_workload(v: _Validator, raw) -> WorkloadSpec | None:
    path = "workload"
    if not isinstance(raw, dict):
        v.fail(path, "must be an object")
        return None
    v.unknown_keys(raw, _WORKLOAD_KEYS, path)
    rates = v.require(raw, "hourly_arrival_rates", path)
    if rates is not None:
        if not isinstance(rates, list) or len(rates) != 24:
            v.fail(f"{path}.hourly_arrival_rates", "must be a list of exactly 24 rates")
            rates = None
        else:
            rates = [v.number(r, f"{path}.hourly_arrival_rates[{i}]", lo=0) for i, r in enumerate(rates)]
            if any(r is None for r in rates):
                rates = None
    ladder = v.require(raw, "bitrate_ladder_bps", path)
    if ladder is not None:
        if not isinstance(ladder, list) or not ladder:
            v.fail(f"{path}.bitrate_ladder_bps", "must be a non-empty ascending list")
            ladder = None
        else:
            ladder = [v.number(b, f"{path}.bitrate_ladder_bps[{i}]", lo=1e-9) for i, b in enumerate(ladder)]
            if any(b is None for b in ladder):
                ladder = None
            elif any(b <= a for a, b in zip(ladder, ladder[1:])):
                v.fail(f"{path}.bitrate_ladder_bps", "must be strictly ascending")
                ladder = None
    n_days = v.number(raw.get("n_days", 1), f"{path}.n_days", lo=1, integer=True)
    duration = v.number(raw.get("session_duration_s", 900.0), f"{path}.session_duration_s", lo=1e-9)
    fraction = v.number(raw.get("ladder_fraction", 1.0), f"{path}.ladder_fraction", lo=1e-9, hi=1.0)
    startup = v.number(raw.get("startup_bytes", 2e6), f"{path}.startup_bytes", lo=0)
    accounts = v.number(raw.get("accounts_per_link", 200), f"{path}.accounts_per_link", lo=1, integer=True)
    probe_weight = v.number(raw.get("probe_weight", 0.4), f"{path}.probe_weight", lo=0.0, hi=1.0)
    persistent = raw.get("persistent_sessions")
    if persistent is not None:
        persistent = v.number(persistent, f"{path}.persistent_sessions", lo=1, integer=True)
        if persistent is None:
            return None
    access = raw.get("access_rate_bps")
    if access is not None:
        access = v.number(access, f"{path}.access_rate_bps", lo=1e-9)
        if access is None:
            return None
    day_factors = raw.get("day_factors")
    if day_factors is not None:
        if not isinstance(day_factors, list):
            v.fail(f"{path}.day_factors", "must be a list with one factor per day")
            day_factors = None
        else:
            day_factors = [v.number(f, f"{path}.day_factors[{i}]", lo=0) for i, f in enumerate(day_factors)]
            if any(f is None for f in day_factors):
                day_factors = None
            elif n_days is not None and len(day_factors) != int(n_days):
                v.fail(f"{path}.day_factors", f"needs exactly {int(n_days)} entries")
                day_factors = None

    if None in (rates, ladder, n_days, duration, fraction, startup, accounts, probe_weight):
        return None
    try:
        return WorkloadSpec(
            hourly_arrival_rates=tuple(rates),
            bitrate_ladder=tuple(ladder),
            session_duration=float(duration),
            ladder_fraction=float(fraction),
            startup_bytes=float(startup),
            n_days=int(n_days),
            day_factors=tuple(day_factors) if day_factors is not None else None,
            persistent_sessions=int(persistent) if persistent is not None else None,
            accounts_per_link=int(accounts),
            access_rate=float(access) if access is not None else None,
            probe_weight=float(probe_weight),
        )
    except ModelError as exc:
        v.fail(path, str(exc))
        return None


def _parse_competition(v: _Validator, raw) -> CompetitionModel | None:
    path = "competition"
    raw = raw if raw is not None else {}
    if not isinstance(raw, dict):
        v.fail(path, "must be an object")
        return None
    v.unknown_keys(raw, _COMPETITION_KEYS, path)
    kind = raw.get("kind", "weighted_share")
    if kind not in ("weighted_share", "asymmetric_cc"):
        v.fail(f"{path}.kind", f"unknown competition model {kind!r}")
        return None
    gamma = v.number(raw.get("loss_gamma", math.log2(3.0)), f"{path}.loss_gamma", lo=0)
    unpaced = v.number(raw.get("unpaced_weight", 2.0), f"{path}.unpaced_weight", lo=1e-9)
    kappa = v.number(raw.get("advantage_kappa", 3.0), f"{path}.advantage_kappa", lo=0)
    if None in (gamma, unpaced, kappa):
        return None
    return CompetitionModel(
        kind=kind, loss_gamma=float(gamma), unpaced_weight=float(unpaced), advantage_kappa=float(kappa)
    )


def _parse_treatment(v: _Validator, raw) -> TreatmentSpec | None:
    path = "treatment"
    if not isinstance(raw, dict):
        v.fail(path, "must be an object")
        return None
    v.unknown_keys(raw, _TREATMENT_KEYS, path)
    kind = v.require(raw, "kind", path)
    if kind is None:
        return None
    try:
        cap = raw.get("cap_bps")
        if cap is not None:
            cap = v.number(cap, f"{path}.cap_bps", lo=1e-9)
            if cap is None:
                return None
        multiplier = raw.get("multiplier")
        if multiplier is not None:
            multiplier = v.number(multiplier, f"{path}.multiplier", lo=1e-9)
            if multiplier is None:
                return None
        return TreatmentSpec(
            kind=kind,
            multiplier=multiplier,
            cap=cap,
            algorithm=raw.get("algorithm"),
        )
    except ModelError as exc:
        v.fail(path, str(exc))
        return None


def _parse_design(v: _Validator, raw) -> dict | None:
    path = "design"
    if not isinstance(raw, dict):
        v.fail(path, "must be an object")
        return None
    v.unknown_keys(raw, _DESIGN_KEYS, path)
    kind = raw.get("kind")
    if kind not in _DESIGN_KINDS:
        v.fail(f"{path}.kind", f"must be one of {_DESIGN_KINDS}")
        return None
    for key in ("p", "p_high", "p_low", "within_alloc", "pre_alloc", "post_alloc"):
        if key in raw:
            v.number(raw[key], f"{path}.{key}", lo=0.0, hi=1.0)
    for key in ("interval_length_s", "change_time_s", "burn_in_s"):
        if key in raw:
            v.number(raw[key], f"{path}.{key}", lo=0.0)
    if "assignment_seed" in raw:
        v.number(raw["assignment_seed"], f"{path}.assignment_seed", integer=True)
    if "allocation_mode" in raw and raw["allocation_mode"] not in ("bernoulli", "exact"):
        v.fail(f"{path}.allocation_mode", "must be 'bernoulli' or 'exact'")
    if kind == "ab" and "p" not in raw:
        v.fail(f"{path}.p", "missing required field")
    if kind == "event_study" and "change_time_s" not in raw:
        v.fail(f"{path}.change_time_s", "missing required field")
    if kind == "gradual":
        sched = raw.get("schedule")
        if not isinstance(sched, list) or not sched or not all(
            isinstance(s, list) and len(s) == 2 for s in sched
        ):
            v.fail(f"{path}.schedule", "must be a list of [start_time_s, p] pairs")
    return dict(raw)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario config, reporting every violation."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be an object"])

    v = _Validator()
    v.unknown_keys(raw, _TOP_KEYS, "")
    seed = v.number(raw.get("seed", 0), "seed", integer=True)
    name = raw.get("name", "scenario")
    if not isinstance(name, str):
        v.fail("name", "must be a string")
        name = "scenario"

    links = _parse_links(v, v.require(raw, "links", ""))
    workload = _parse_workload(v, v.require(raw, "workload", ""))
    competition = _parse_competition(v, raw.get("competition"))
    treatment = _parse_treatment(v, v.require(raw, "treatment", ""))
    design = _parse_design(v, v.require(raw, "design", ""))

    metrics = raw.get("metrics", list(METRICS))
    if not isinstance(metrics, list) or not metrics:
        v.fail("metrics", "must be a non-empty list of metric names")
        metrics = list(METRICS)
    else:
        for m in metrics:
            if m not in METRICS:
                v.fail(f"metrics.{m}", f"unknown metric; choose from {sorted(METRICS)}")
    reps = v.number(raw.get("replication_count", 1), "replication_count", lo=1, integer=True)

    if design is not None and links:
        link_ids = [l.link_id for l in links]
        for key in ("link_high", "link_low"):
            if key in design and design[key] not in link_ids:
                v.fail(f"design.{key}", f"references unknown link {design[key]}")
        if design.get("kind") == "paired_link" and len(links) < 2:
            v.fail("design.kind", "paired_link needs at least two links")
        if design.get("allocation_mode") == "exact" and workload is not None:
            if workload.persistent_sessions is None:
                v.fail("design.allocation_mode", "exact allocation requires a persistent workload")
        if design.get("kind") == "event_study" and workload is not None and "change_time_s" in design:
            ct = design["change_time_s"]
            if isinstance(ct, (int, float)) and not 86400.0 <= ct <= workload.horizon_s - 86400.0:
                v.fail("design.change_time_s", "must leave a full day on each side of the horizon")

    if v.errors:
        raise ConfigError(v.errors)
    return ScenarioConfig(
        name=name,
        seed=int(seed),
        links=links,
        workload=workload,
        competition=competition,
        treatment=treatment,
        design=design,
        metrics=list(metrics),
        replication_count=int(reps),
    )


def config_to_dict(config: ScenarioConfig) -> dict:
    links = []
    for l in config.links:
        entry = {
            "link_id": l.link_id,
            "capacity_bps": l.capacity,
            "base_rtt_s": l.base_rtt,
            "standing_queue_delay_s": l.standing_queue_delay,
            "base_loss": l.base_loss,
        }
        links.append(entry)
    w = config.workload
    workload = {
        "hourly_arrival_rates": list(w.hourly_arrival_rates),
        "bitrate_ladder_bps": list(w.bitrate_ladder),
        "session_duration_s": w.session_duration,
        "ladder_fraction": w.ladder_fraction,
        "startup_bytes": w.startup_bytes,
        "n_days": w.n_days,
        "accounts_per_link": w.accounts_per_link,
        "probe_weight": w.probe_weight,
    }
    if w.day_factors is not None:
        workload["day_factors"] = list(w.day_factors)
    if w.persistent_sessions is not None:
        workload["persistent_sessions"] = w.persistent_sessions
    if w.access_rate is not None:
        workload["access_rate_bps"] = w.access_rate
    treatment = {"kind": config.treatment.kind}
    if config.treatment.multiplier is not None:
        treatment["multiplier"] = config.treatment.multiplier
    if config.treatment.cap is not None:
        treatment["cap_bps"] = config.treatment.cap
    if config.treatment.algorithm is not None:
        treatment["algorithm"] = config.treatment.algorithm
    return {
        "name": config.name,
        "seed": config.seed,
        "links": links,
        "workload": workload,
        "competition": {
            "kind": config.competition.kind,
            "loss_gamma": config.competition.loss_gamma,
            "unpaced_weight": config.competition.unpaced_weight,
            "advantage_kappa": config.competition.advantage_kappa,
        },
        "treatment": treatment,
        "design": dict(config.design),
        "metrics": list(config.metrics),
        "replication_count": config.replication_count,
    }


def serialize_config(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"])
    return resources.files("linklab.presets").joinpath(f"{name}.json").read_text()


def load_config(path_or_preset: str) -> ScenarioConfig:
    """Load a config from a file path or a shipped preset name."""
    if path_or_preset in PRESET_NAMES:
        return parse_config(preset_text(path_or_preset))
    with open(path_or_preset, "r") as fh:
        return parse_config(fh.read())
