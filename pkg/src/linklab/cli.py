"""Command-line surface: simulate, analyze, sweep, replicate, calibrate.

Exit codes: 0 ok, 2 config error, 3 empty-group or estimation error,
4 I/O error. Errors go to stderr with a machine-parseable `error code=...`
first line.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings

from . import causal, designs, reporting
from .config import ScenarioConfig, config_hash, load_config, PRESET_NAMES
from .errors import (
    CalibrationError,
    ConfigError,
    EmptyGroupError,
    EmptyLogError,
    EstimationError,
    CollinearityError,
    InsufficientSweepError,
    InvalidAllocationError,
    InvalidDesignError,
    InvalidLagError,
    LinkLabError,
    ModelError,
    NormalizationError,
    UndefinedSpilloverError,
)
from .records import METRICS, read_session_log, write_session_log
from .sim import simulate

_CONFIG_ERRORS = (ConfigError, InvalidDesignError, InvalidAllocationError, CalibrationError, ModelError)
_ESTIMATION_ERRORS = (
    EmptyGroupError,
    EmptyLogError,
    EstimationError,
    CollinearityError,
    InvalidLagError,
    NormalizationError,
    UndefinedSpilloverError,
    InsufficientSweepError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4


def _meta(config: ScenarioConfig, seed=None) -> dict:
    return {"config_hash": config_hash(config), "seed": config.seed if seed is None else seed}


def _apply_overrides(config: ScenarioConfig, seed=None) -> ScenarioConfig:
    if seed is None:
        return config
    return dataclasses.replace(config, seed=int(seed))


def cmd_simulate(config: ScenarioConfig, out_path: str, seed=None) -> dict:
    """Run one scenario and persist the session log."""
    config = _apply_overrides(config, seed)
    result = simulate(config)
    write_session_log(result.records, out_path)
    summary = {
        "config_hash": config_hash(config),
        "seed": config.seed,
        "sessions": len(result.records),
        "sessions_per_cell": result.sessions_per_cell(),
        "congested_hours_per_link": {
            lid: round(st.congested_hours, 3) for lid, st in sorted(result.link_stats.items())
        },
        "carryover_sessions": result.plan.carryover_sessions,
        "out": out_path,
    }
    if getattr(result.plan, "relabel_retries", 0):
        summary["interval_relabel_retries"] = result.plan.relabel_retries
    return summary


def cmd_analyze(log_path: str, config: ScenarioConfig, out_dir: str | None = None) -> dict:
    """Full estimates table plus hourly time series for a session log."""
    records = read_session_log(log_path) if isinstance(log_path, str) else log_path
    if not records:
        raise EmptyLogError(f"no sessions in {log_path}")
    _, cells = designs.build_plan_and_cells(
        config.design, config.workload.horizon_s, [l.link_id for l in config.links]
    )
    estimates = designs.estimate_all(records, cells, metrics=config.metrics)
    ts_rows = reporting.timeseries_rows(records, config.metrics)
    meta = _meta(config)
    outputs = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        est_path = os.path.join(out_dir, "estimates.csv")
        ts_path = os.path.join(out_dir, "timeseries.csv")
        reporting.write_table(est_path, reporting.ESTIMATE_COLUMNS, reporting.estimate_rows(estimates), meta)
        reporting.write_table(ts_path, reporting.TIMESERIES_COLUMNS, ts_rows, meta)
        outputs = {"estimates": est_path, "timeseries": ts_path}
    return {"estimates": estimates, "timeseries": ts_rows, "outputs": outputs, "meta": meta}


def _with_allocation(config: ScenarioConfig, p: float) -> ScenarioConfig:
    design = dict(config.design)
    design["kind"] = "ab"
    design["p"] = p
    design.pop("schedule", None)
    return dataclasses.replace(config, design=design)


def cmd_sweep(config: ScenarioConfig, allocations, out_dir: str | None = None, lag: int = 2) -> dict:
    """One run per allocation plus pure 0/1 endpoints, with the
    interference diagnostic over the per-allocation estimates."""
    ps = sorted(set(float(p) for p in allocations))
    if len(ps) < 2:
        raise InvalidAllocationError("sweep needs at least two allocations")
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise InvalidAllocationError(f"allocation {p} outside [0, 1]")
    run_ps = sorted(set(ps) | {0.0, 1.0})

    logs: dict[float, list] = {}
    for p in run_ps:
        logs[p] = simulate(_with_allocation(config, p)).records

    control_base = [r for r in logs[0.0] if r.treatment == 0]
    treated_full = [r for r in logs[1.0] if r.treatment == 1]

    cell_means: dict[tuple, tuple] = {}
    for p, records in logs.items():
        for arm, name in ((1, "treated"), (0, "control")):
            group = [r for r in records if r.treatment == arm]
            if not group:
                continue
            for metric in config.metrics:
                mean = causal.group_mean(group, metric)
                cell_means[(p, name, metric)] = (mean, len(group))

    points: list[causal.AllocationEstimates] = []
    for p in ps:
        if not 0.0 < p < 1.0:
            continue
        records = logs[p]
        ate, spill, partial = {}, {}, {}
        for metric in config.metrics:
            base = causal.group_mean(control_base, metric)
            ate[metric] = causal.naive_ate(records, metric, allocation_p=p)
            controls = [r for r in records if r.treatment == 0]
            treats = [r for r in records if r.treatment == 1]
            sp = causal.spillover_estimate(controls, control_base, metric, p, lag=lag)
            pt = causal.partial_effect(treats, control_base, metric, p, lag=lag)
            if base > 0:
                ate[metric] = ate[metric].with_base(base)
                sp = sp.with_base(base)
                pt = pt.with_base(base)
            spill[metric] = sp
            partial[metric] = pt
        points.append(causal.AllocationEstimates(p=p, ate=ate, spillover=spill, partial=partial))

    tte = {}
    for metric in config.metrics:
        est = causal.tte_estimate(treated_full, control_base, metric, lag=lag)
        base = causal.group_mean(control_base, metric)
        tte[metric] = est.with_base(base) if base > 0 else est

    report = causal.sutva_diagnostic(points)
    meta = _meta(config)
    outputs = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        sweep_path = os.path.join(out_dir, "sweep.csv")
        diag_path = os.path.join(out_dir, "diagnostic.csv")
        tte_path = os.path.join(out_dir, "tte.csv")
        reporting.write_table(sweep_path, reporting.SWEEP_COLUMNS, reporting.sweep_rows(cell_means), meta)
        reporting.write_table(diag_path, reporting.DIAGNOSTIC_COLUMNS, reporting.diagnostic_rows(report), meta)
        reporting.write_table(
            tte_path, reporting.ESTIMATE_COLUMNS, reporting.estimate_rows(list(tte.values())), meta
        )
        outputs = {"sweep": sweep_path, "diagnostic": diag_path, "tte": tte_path}
    return {
        "cell_means": cell_means,
        "allocation_estimates": points,
        "tte": tte,
        "diagnostic": report,
        "outputs": outputs,
        "meta": meta,
    }


def cmd_replicate(config: ScenarioConfig, replications: int, out_dir: str | None = None) -> dict:
    """Monte Carlo replications with consecutive seeds.

    Reports the mean, spread, and empirical CI coverage (of the replication
    mean) per estimand and metric.
    """
    if replications < 2:
        raise InvalidAllocationError("replications must be >= 2")
    points: dict[tuple, list] = {}
    cis: dict[tuple, list] = {}
    link_ids = [l.link_id for l in config.links]
    for r in range(replications):
        cfg = dataclasses.replace(config, seed=config.seed + r)
        design = dict(cfg.design)
        design["assignment_seed"] = int(design.get("assignment_seed", 0)) + r
        cfg = dataclasses.replace(cfg, design=design)
        plan, cells = designs.build_plan_and_cells(design, cfg.workload.horizon_s, link_ids)
        result = simulate(cfg, plan=plan)
        for est in designs.estimate_all(result.records, cells, metrics=cfg.metrics):
            key = (est.estimand, est.metric)
            points.setdefault(key, []).append(est.point)
            cis.setdefault(key, []).append((est.ci95_lo, est.ci95_hi))
    summaries = reporting.summarize_replications(points, cis)
    meta = _meta(config)
    outputs = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "replications.csv")
        reporting.write_table(
            path, reporting.REPLICATION_COLUMNS, reporting.replication_rows(summaries), meta
        )
        outputs = {"replications": path}
    return {"summaries": summaries, "outputs": outputs, "meta": meta}


DEFAULT_CALIBRATION_DESIGNS = [
    {"kind": "event_study", "change_time_s": 2 * 86400.0},
    {"kind": "switchback", "interval_length_s": 86400.0, "assignment_seed": 0},
]


def cmd_calibrate(config: ScenarioConfig, candidate_designs=None, out_dir: str | None = None) -> dict:
    """A/A false-positive check of candidate designs on baseline data."""
    if config.treatment.kind != "inert":
        raise CalibrationError("calibration baseline must have an inert treatment")
    candidates = candidate_designs or DEFAULT_CALIBRATION_DESIGNS
    result = simulate(config)
    horizon = config.workload.horizon_s
    link_ids = [l.link_id for l in config.links]
    asymmetric = config.workload.day_factors is not None and len(set(config.workload.day_factors)) > 1

    rows: list[reporting.CalibrationRow] = []
    verdicts: dict[str, bool] = {}
    for design in candidates:
        kind = design.get("kind", "?")
        if kind == "event_study" and asymmetric:
            warnings.warn(
                "event-study candidate spans days with asymmetric demand; "
                "expect seasonality false positives",
                UserWarning,
            )
        cells = designs.aa_view_of_design(design, horizon, link_ids)
        estimates = designs.estimate_all(result.records, cells, metrics=config.metrics)
        any_fp = False
        for est in estimates:
            fp = not est.covers_zero()
            any_fp = any_fp or fp
            rows.append(
                reporting.CalibrationRow(
                    design=kind,
                    metric=est.metric,
                    point=est.point,
                    std_error=est.std_error,
                    z=est.z_value,
                    false_positive=fp,
                )
            )
        verdicts[kind] = any_fp
    meta = _meta(config)
    outputs = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "calibration.csv")
        reporting.write_table(
            path, reporting.CALIBRATION_COLUMNS, reporting.calibration_rows(rows), meta
        )
        outputs = {"calibration": path}
    return {"rows": rows, "verdicts": verdicts, "outputs": outputs, "meta": meta}


# ---------------------------------------------------------------------------
# argparse wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linklab",
        description="Fluid-model experiments on congested links: simulate, design, analyze.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help=f"config path or preset ({', '.join(PRESET_NAMES)})")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--format", default="csv", choices=["csv"], help="output format")

    p_sim = sub.add_parser("simulate", help="run a scenario and write the session log")
    add_common(p_sim)
    p_sim.add_argument("--out", required=True, help="session log CSV path")

    p_an = sub.add_parser("analyze", help="estimate every design estimand from a session log")
    add_common(p_an)
    p_an.add_argument("--log", required=True, help="session log CSV path")
    p_an.add_argument("--out-dir", default=None, help="directory for estimates/timeseries tables")

    p_sw = sub.add_parser("sweep", help="run one scenario per allocation and diagnose interference")
    add_common(p_sw)
    p_sw.add_argument(
        "--allocations", required=True, help="comma-separated allocations, e.g. 0.1,0.5,0.9"
    )
    p_sw.add_argument("--out-dir", default=None)

    p_rep = sub.add_parser("replicate", help="Monte Carlo replications with consecutive seeds")
    add_common(p_rep)
    p_rep.add_argument("--replications", type=int, required=True)
    p_rep.add_argument("--out-dir", default=None)

    p_cal = sub.add_parser("calibrate", help="A/A false-positive check of candidate designs")
    add_common(p_cal)
    p_cal.add_argument(
        "--designs", default=None, help="JSON file with a list of candidate design objects"
    )
    p_cal.add_argument("--out-dir", default=None)
    return parser


def _print_summary(obj) -> None:
    print(json.dumps(obj, indent=2, default=str))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = _apply_overrides(config, args.seed)
        if args.command == "simulate":
            summary = cmd_simulate(config, args.out)
            _print_summary(summary)
        elif args.command == "analyze":
            result = cmd_analyze(args.log, config, out_dir=args.out_dir)
            _print_summary(
                {
                    "meta": result["meta"],
                    "estimates": len(result["estimates"]),
                    "outputs": result["outputs"],
                }
            )
        elif args.command == "sweep":
            allocations = [float(p) for p in args.allocations.split(",") if p.strip()]
            result = cmd_sweep(config, allocations, out_dir=args.out_dir)
            report = result["diagnostic"]
            _print_summary(
                {
                    "meta": result["meta"],
                    "interference_flagged": report.interference_flagged,
                    "failed_conditions": report.failed_conditions,
                    "failed_conditions_bonferroni": report.failed_conditions_bonferroni,
                    "outputs": result["outputs"],
                }
            )
        elif args.command == "replicate":
            result = cmd_replicate(config, args.replications, out_dir=args.out_dir)
            _print_summary(
                {
                    "meta": result["meta"],
                    "estimands": len(result["summaries"]),
                    "outputs": result["outputs"],
                }
            )
        elif args.command == "calibrate":
            candidates = None
            if args.designs:
                with open(args.designs) as fh:
                    candidates = json.load(fh)
            result = cmd_calibrate(config, candidates, out_dir=args.out_dir)
            _print_summary(
                {
                    "meta": result["meta"],
                    "verdicts": result["verdicts"],
                    "outputs": result["outputs"],
                }
            )
        return EXIT_OK
    except _CONFIG_ERRORS as exc:
        _report_error("CONFIG", exc)
        return EXIT_CONFIG
    except _ESTIMATION_ERRORS as exc:
        _report_error("ESTIMATION", exc)
        return EXIT_ESTIMATION
    except OSError as exc:
        _report_error("IO", exc)
        return EXIT_IO
    except LinkLabError as exc:  # anything else from the package
        _report_error("ESTIMATION", exc)
        return EXIT_ESTIMATION


def _report_error(code: str, exc: Exception) -> None:
    print(f"error code={code}", file=sys.stderr)
    if isinstance(exc, ConfigError):
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
    else:
        print(f"  - {exc}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
