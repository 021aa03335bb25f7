"""Aggregate EV charging flexibility with carbon-aware procurement.

The package simulates a charging station that (1) quotes an aggregate
power band to the grid each slot, sized by per-delay-group charging
queues, and (2) procures energy and trades emission allowances inside
that band while a virtual carbon queue keeps the footprint under a hard
quota.  Closed-form slot subproblems, per-EV envelope disaggregation,
hindsight benchmarks, and a dense LP solver are included; `evflex run`
drives a full horizon from the command line.
"""

from .band import DriftConstants, FlexibilityBand, drift_constants, flexibility_value, prop2_gap, solve_stage1
from .benchmarks import (
    BenchmarkResult,
    alpha_dispatch,
    b1_charge_first,
    b2_offline_flex,
    b3_modified,
    b3_myopic,
    b4_offline_cost,
    cost_lower_bound,
    offline_flex_group,
    commuter_scenario,
    stress_scenario,
)
from .carbon import (
    CarbonLedger,
    ConfigurationError,
    DispatchDecision,
    QuotaViolation,
    a2_constant,
    perturbation_phi,
    prop4_gap,
    solve_stage2,
    update_carbon,
    v2_max,
    v2_max_tight,
)
from .engine import RunResult, RunSetup, make_alpha_rule, prepare, run
from .envelopes import (
    EnvelopeBuilder,
    EnvelopeProfiles,
    beta,
    build_envelopes,
    check_profiles,
    disaggregate_power,
)
from .fleet import (
    ArrivalDemand,
    GroupIndex,
    GroupState,
    arrival_demand,
    assign_groups,
    capacity_matrix,
    group_arrivals,
    group_capacity,
    update_queues,
)
from .figures import render_figures
from .lpsolve import LinearProgram, LpResult, solve_lp
from .report import CheckResult, RunReport, evaluate, render_json, render_text
from .scenario import (
    ChargingTask,
    PriceSeries,
    Scenario,
    TimeGrid,
    default_scenario,
    desk_scenario,
    load_fleet,
    load_scenario,
    load_series,
    sample_fleet,
    save_fleet,
    save_scenario,
    save_series,
    synth_prices,
    with_overrides,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalDemand",
    "BenchmarkResult",
    "CarbonLedger",
    "ChargingTask",
    "CheckResult",
    "ConfigurationError",
    "DispatchDecision",
    "DriftConstants",
    "EnvelopeBuilder",
    "EnvelopeProfiles",
    "FlexibilityBand",
    "GroupIndex",
    "GroupState",
    "LinearProgram",
    "LpResult",
    "PriceSeries",
    "QuotaViolation",
    "RunReport",
    "RunResult",
    "RunSetup",
    "Scenario",
    "TimeGrid",
    "a2_constant",
    "alpha_dispatch",
    "arrival_demand",
    "assign_groups",
    "b1_charge_first",
    "b2_offline_flex",
    "b3_modified",
    "b3_myopic",
    "b4_offline_cost",
    "beta",
    "build_envelopes",
    "capacity_matrix",
    "check_profiles",
    "cost_lower_bound",
    "default_scenario",
    "desk_scenario",
    "disaggregate_power",
    "drift_constants",
    "evaluate",
    "flexibility_value",
    "group_arrivals",
    "group_capacity",
    "load_fleet",
    "load_scenario",
    "load_series",
    "make_alpha_rule",
    "offline_flex_group",
    "perturbation_phi",
    "prepare",
    "prop2_gap",
    "prop4_gap",
    "render_figures",
    "render_json",
    "render_text",
    "run",
    "sample_fleet",
    "save_fleet",
    "save_scenario",
    "save_series",
    "solve_lp",
    "solve_stage1",
    "solve_stage2",
    "commuter_scenario",
    "stress_scenario",
    "synth_prices",
    "update_carbon",
    "update_queues",
    "v2_max",
    "v2_max_tight",
    "with_overrides",
]
