"""Desk-scale experiments on congested links.

A seeded fluid-model simulator of sessions sharing bottleneck links, the
experiment designs that allocate treatment over links and time, and the
estimation pipeline that turns session logs into effect estimates with
honest uncertainty.
"""

from .analysis import (
    HourlyPanel,
    HourlyRow,
    RegressionFit,
    account_level_analysis,
    hourly_aggregate,
    hourly_fixed_effects_analysis,
    newey_west_se,
    normalize,
    ols_fixed_effects,
)
from .causal import (
    AllocationEstimates,
    AssignmentVector,
    DiagnosticReport,
    assign_bernoulli,
    assign_exact_fraction,
    group_mean,
    naive_ate,
    partial_effect,
    spillover_estimate,
    sutva_diagnostic,
    tte_estimate,
)
from .config import ScenarioConfig, config_hash, load_config, parse_config, serialize_config
from .designs import (
    CellContrast,
    CellMap,
    CellSelector,
    DesignPlan,
    build_plan_and_cells,
    estimate_all,
    plan_aa,
    plan_event_study,
    plan_gradual,
    plan_paired_link,
    plan_switchback,
)
from .fairshare import available_rates, weighted_share
from .records import Estimate, SessionRecord, read_session_log, write_session_log
from .sim import (
    CompetitionModel,
    FlowState,
    LinkSpec,
    TreatmentSpec,
    WorkloadSpec,
    advance_step,
    asymmetric_cc_weight,
    choose_bitrate,
    loss_rate,
    run_scenario,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationEstimates",
    "AssignmentVector",
    "CellContrast",
    "CellMap",
    "CellSelector",
    "CompetitionModel",
    "DesignPlan",
    "DiagnosticReport",
    "Estimate",
    "FlowState",
    "HourlyPanel",
    "HourlyRow",
    "LinkSpec",
    "RegressionFit",
    "ScenarioConfig",
    "SessionRecord",
    "TreatmentSpec",
    "WorkloadSpec",
    "account_level_analysis",
    "advance_step",
    "assign_bernoulli",
    "assign_exact_fraction",
    "asymmetric_cc_weight",
    "available_rates",
    "build_plan_and_cells",
    "choose_bitrate",
    "config_hash",
    "estimate_all",
    "group_mean",
    "hourly_aggregate",
    "hourly_fixed_effects_analysis",
    "load_config",
    "loss_rate",
    "naive_ate",
    "newey_west_se",
    "normalize",
    "ols_fixed_effects",
    "parse_config",
    "partial_effect",
    "plan_aa",
    "plan_event_study",
    "plan_gradual",
    "plan_paired_link",
    "plan_switchback",
    "read_session_log",
    "run_scenario",
    "serialize_config",
    "simulate",
    "spillover_estimate",
    "sutva_diagnostic",
    "tte_estimate",
    "weighted_share",
    "write_session_log",
]
