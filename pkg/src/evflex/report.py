"""Run summaries and the four built-in guarantee checks.

Every report carries the same four checks regardless of scale:

  disaggregation  the realised per-EV schedule is feasible (presence,
                  power box, energy corridor, terminal requirement) and
                  sums back to the dispatched total
  flex_gap        the online band value trails the group-relaxed
                  hindsight optimum by at most A1/V1 per slot; the lower
                  tolerance is the price-weighted backlog the finite
                  horizon left unserved
  quota           the footprint stayed inside [0, quota] all horizon
  cost_gap        the online cost exceeds a certified hindsight lower
                  bound by at most A2/V2 per slot ("unbounded" when
                  v2 = 0 switches cost tracking off)

The hindsight references are the closed-form oracles, so evaluation
stays cheap at any scale; the dense LP benchmarks remain available for
desk-scale work.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .benchmarks import cost_lower_bound, offline_flex_group
from .engine import RunResult

CHECK_TOL = 1e-6
CHECK_NAMES = ("disaggregation", "flex_gap", "quota", "cost_gap")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    gap: float | None = None    # measured quantity, per-slot average where applicable
    bound: float | None = None  # allowed ceiling; None reads as unbounded
    detail: str = ""

    @property
    def bound_text(self) -> str:
        return "unbounded" if self.bound is None else repr(float(self.bound))


@dataclass
class RunReport:
    policy: str
    n_ev: int
    n_slots: int
    dt_hours: float
    seed: int
    v1: float
    v2: float
    quota: float
    value_total: float
    value_avg: float
    value_queue_total: float
    cost_total: float
    cost_avg: float
    trade_count: int
    c_max: float
    c_min: float
    min_target_margin: float
    unserved_total: float
    checks: dict[str, CheckResult]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def _check_disaggregation(result: RunResult) -> CheckResult:
    problems = result.dispatch_errors(tol=CHECK_TOL)
    if problems:
        head = problems[0] + (f" (+{len(problems) - 1} more)" if len(problems) > 1 else "")
        return CheckResult("disaggregation", False, detail=head)
    return CheckResult(
        "disaggregation", True,
        detail=f"fleet schedule feasible, min terminal margin "
               f"{result.min_target_margin:.6f} kWh",
    )


def _check_flex_gap(result: RunResult) -> CheckResult:
    scenario = result.scenario
    T = scenario.grid.n_slots
    reference = offline_flex_group(scenario)
    gap = float(reference.value - result.value_queue_total) / T
    bound = float(result.setup.constants.bound)
    pi_max = float(scenario.prices.combined().max())
    allowance = pi_max * float(result.q_check_final.sum()) / T + CHECK_TOL
    passed = bool(-allowance <= gap <= bound + CHECK_TOL)
    return CheckResult(
        "flex_gap", passed, gap=gap, bound=bound,
        detail=(
            f"per-slot gap {gap:.6f} vs bound {bound:.6f} "
            f"(lower tolerance {allowance:.2e} from residual backlog)"
        ),
    )


def _check_quota(result: RunResult) -> CheckResult:
    quota = result.scenario.quota
    worst = max(result.c_max - quota, -result.c_min, 0.0)
    passed = bool(worst <= CHECK_TOL)
    return CheckResult(
        "quota", passed, gap=worst, bound=quota,
        detail=(
            f"footprint in [{result.c_min:.6f}, {result.c_max:.6f}] kg, "
            f"quota {quota:.6f} kg"
        ),
    )


def _check_cost_gap(result: RunResult) -> CheckResult:
    scenario = result.scenario
    T = scenario.grid.n_slots
    v2 = result.setup.v2
    lb = cost_lower_bound(scenario, result.p_check)
    gap = (result.cost_total - lb) / T
    if v2 == 0.0:
        return CheckResult(
            "cost_gap", True, gap=gap, bound=None,
            detail="bound unbounded at v2 = 0 (cost tracking disabled)",
        )
    bound = float(result.setup.a2 / v2)
    passed = bool(-CHECK_TOL <= gap <= bound + CHECK_TOL)
    return CheckResult(
        "cost_gap", passed, gap=gap, bound=bound,
        detail=f"per-slot gap {gap:.6f} vs bound {bound:.6f}",
    )


def evaluate(result: RunResult) -> RunReport:
    """Summarise a run and evaluate all four guarantee checks."""
    scenario = result.scenario
    checks = {
        "disaggregation": _check_disaggregation(result),
        "flex_gap": _check_flex_gap(result),
        "quota": _check_quota(result),
        "cost_gap": _check_cost_gap(result),
    }
    return RunReport(
        policy=result.policy,
        n_ev=len(scenario.fleet),
        n_slots=scenario.grid.n_slots,
        dt_hours=scenario.grid.dt_hours,
        seed=scenario.seed,
        v1=scenario.v1,
        v2=result.setup.v2,
        quota=scenario.quota,
        value_total=result.value_total,
        value_avg=result.value_avg,
        value_queue_total=result.value_queue_total,
        cost_total=result.cost_total,
        cost_avg=result.cost_avg,
        trade_count=result.trade_count,
        c_max=result.c_max,
        c_min=result.c_min,
        min_target_margin=result.min_target_margin,
        unserved_total=result.unserved_total,
        checks=checks,
    )


def render_text(report: RunReport, extra: dict[str, str] | None = None) -> str:
    """Key-value text summary, one fact per line."""
    lines = [
        f"policy = {report.policy}",
        f"evs = {report.n_ev}",
        f"slots = {report.n_slots}",
        f"dt_hours = {repr(report.dt_hours)}",
        f"seed = {report.seed}",
        f"v1 = {repr(report.v1)}",
        f"v2 = {repr(report.v2)}",
        f"quota = {repr(report.quota)}",
        f"value_total = {repr(report.value_total)}",
        f"value_avg = {repr(report.value_avg)}",
        f"value_queue_total = {repr(report.value_queue_total)}",
        f"cost_total = {repr(report.cost_total)}",
        f"cost_avg = {repr(report.cost_avg)}",
        f"trade_count = {report.trade_count}",
        f"c_max = {repr(report.c_max)}",
        f"c_min = {repr(report.c_min)}",
        f"min_target_margin = {repr(report.min_target_margin)}",
        f"unserved_total = {repr(report.unserved_total)}",
    ]
    for name in CHECK_NAMES:
        check = report.checks[name]
        status = "pass" if check.passed else "FAIL"
        gap = "n/a" if check.gap is None else repr(float(check.gap))
        lines.append(
            f"check.{name} = {status} (gap = {gap}, bound = {check.bound_text})"
        )
        lines.append(f"check.{name}.detail = {check.detail}")
    if extra:
        lines.extend(f"{key} = {val}" for key, val in extra.items())
    return "\n".join(lines) + "\n"


def render_json(report: RunReport, extra: dict | None = None) -> str:
    """Machine-readable twin of the text summary."""

    def _num(x):
        if x is None:
            return None
        x = float(x)
        return None if math.isnan(x) else x

    payload = {
        "policy": report.policy,
        "evs": report.n_ev,
        "slots": report.n_slots,
        "dt_hours": report.dt_hours,
        "seed": report.seed,
        "v1": report.v1,
        "v2": report.v2,
        "quota": report.quota,
        "value_total": report.value_total,
        "value_avg": report.value_avg,
        "value_queue_total": report.value_queue_total,
        "cost_total": report.cost_total,
        "cost_avg": report.cost_avg,
        "trade_count": report.trade_count,
        "c_max": report.c_max,
        "c_min": report.c_min,
        "min_target_margin": report.min_target_margin,
        "unserved_total": report.unserved_total,
        "all_passed": report.all_passed,
        "checks": {
            name: {
                "passed": check.passed,
                "gap": _num(check.gap),
                "bound": "unbounded" if check.bound is None else _num(check.bound),
                "detail": check.detail,
            }
            for name, check in report.checks.items()
        },
    }
    if extra:
        payload["benchmark"] = extra
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"
