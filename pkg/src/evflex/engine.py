"""Online simulation loop for the two-stage charging controller.

One call to :func:`run` simulates a full horizon.  Per slot the engine

1. folds newly arrived demand into the delay-group queues,
2. solves the queue-side band subproblem (closed form, ``band.solve_stage1``),
3. advances the per-EV envelope pair, whose aggregates form the effective
   band that downstream consumers see,
4. picks a dispatch inside the effective band (procurement policy,
   fixed-ratio policy, or a caller-supplied rule),
5. splits the dispatch across EVs as a mixture of the two envelope
   profiles and advances the batteries,
6. updates the carbon ledger (footprint, perturbed queue) and the
   delay-group queues, then moves to the next slot.

Two band traces are kept on purpose.  The queue-side band is what the
closed-form subproblem produces and what the queues are charged against;
it ignores battery ceilings, so it is the right object for the drift
analysis and for solver exactness checks.  The effective band is the
envelope aggregate: every point in it is realisable by the fleet, so it
is the right object for dispatch, disaggregation and reported
flexibility value.

All engine arithmetic is plain numpy on preallocated arrays; a run is
deterministic given the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .band import DriftConstants, FlexibilityBand, drift_constants, solve_stage1
from .carbon import (
    CarbonLedger,
    ConfigurationError,
    DispatchDecision,
    a2_constant,
    solve_stage2,
    update_carbon,
    v2_max,
    v2_max_tight,
)
from .envelopes import EnvelopeBuilder, EnvelopeProfiles, beta, check_profiles
from .fleet import (
    ArrivalDemand,
    GroupState,
    assign_groups,
    capacity_matrix,
    group_arrivals,
    update_queues,
)
from .scenario import Scenario

AGG_TOL = 1e-9

# dispatch hook: (t, p_check, p_hat, ledger, pi_e, pi_c, rho, pv, dt, trading)
DispatchRule = Callable[
    [int, float, float, CarbonLedger, float, float, float, float, float, bool],
    DispatchDecision,
]


@dataclass(frozen=True)
class RunSetup:
    """Quantities fixed before the first slot."""

    groups: tuple
    arrivals: ArrivalDemand
    caps: np.ndarray          # (G, T) queue service capacity
    p_g_max: float            # worst-case grid draw, kW
    pi_g_max: float           # worst-case per-slot energy price, $/kW
    v2_loose: float
    v2_tight: float
    v2: float                 # resolved weight actually used
    constants: DriftConstants
    a2: float


@dataclass
class RunResult:
    """Everything a single simulated horizon produced."""

    scenario: Scenario
    setup: RunSetup
    policy: str
    # queue-side band, per group and aggregated
    x_hat: np.ndarray         # (G, T)
    x_check: np.ndarray       # (G, T)
    q_hat: np.ndarray         # (G, T) queue state seen by the slot-t solve
    q_check: np.ndarray       # (G, T)
    p_hat_queue: np.ndarray   # (T,)
    p_check_queue: np.ndarray
    f_queue: np.ndarray       # (T,) band value of the queue-side band
    # effective band (envelope aggregates)
    profiles: EnvelopeProfiles
    p_hat: np.ndarray         # (T,)
    p_check: np.ndarray       # (T,)
    f_value: np.ndarray       # (T,)
    # procurement trace
    p_d: np.ndarray
    p_g: np.ndarray
    p_r: np.ndarray
    m_b: np.ndarray
    cost: np.ndarray
    c: np.ndarray             # (T + 1,) footprint at slot starts
    h: np.ndarray             # (T,) virtual queue used in slot t
    phi: np.ndarray           # (T,) perturbation used in slot t
    beta: np.ndarray          # (T,) mixture weight applied to the fleet
    unserved: np.ndarray      # (T,) kWh the dispatch fell short of the floor
    # fleet trace
    p_ev: np.ndarray          # (N, T)
    e_ev: np.ndarray          # (N, T + 1)
    # queue backlogs left after the last slot was served
    q_hat_final: np.ndarray   # (G,)
    q_check_final: np.ndarray # (G,)

    # -- aggregates ---------------------------------------------------

    @property
    def value_total(self) -> float:
        return float(self.f_value.sum())

    @property
    def value_avg(self) -> float:
        return float(self.f_value.mean())

    @property
    def value_queue_total(self) -> float:
        return float(self.f_queue.sum())

    @property
    def value_queue_avg(self) -> float:
        return float(self.f_queue.mean())

    @property
    def cost_total(self) -> float:
        return float(self.cost.sum())

    @property
    def cost_avg(self) -> float:
        return float(self.cost.mean())

    @property
    def trade_count(self) -> int:
        return int(np.count_nonzero(self.m_b > AGG_TOL))

    @property
    def unserved_total(self) -> float:
        return float(self.unserved.sum())

    @property
    def c_max(self) -> float:
        return float(self.c.max())

    @property
    def c_min(self) -> float:
        return float(self.c.min())

    def target_margins(self) -> np.ndarray:
        """Terminal energy minus required energy, one entry per EV."""
        fleet = self.scenario.fleet
        out = np.empty(len(fleet))
        for task in fleet:
            # energy state is indexed by slot start; departure-slot start
            # is where the requirement must already be met
            out[task.id] = self.e_ev[task.id, task.t_depart - 1] - task.e_target
        return out

    @property
    def min_target_margin(self) -> float:
        return float(self.target_margins().min())

    def dispatch_errors(self, tol: float = 1e-6) -> list[str]:
        """Feasibility audit of the realised per-EV dispatch."""
        problems = check_profiles(
            self.p_ev, self.e_ev, self.scenario.fleet, self.scenario.grid, tol=tol
        )
        gap = np.abs(self.p_ev.sum(axis=0) - self.p_d)
        worst = float(gap.max()) if gap.size else 0.0
        if worst > AGG_TOL:
            t_bad = int(gap.argmax()) + 1
            problems.append(
                f"slot {t_bad}: fleet total misses dispatch by {worst:.3e} kW"
            )
        return problems


def prepare(scenario: Scenario) -> RunSetup:
    """Validate a scenario and fix the run constants.

    Raises ConfigurationError when the quota cannot absorb a worst-case
    slot (the safety argument needs rho_max * p_g_max * dt + m_b_max to
    fit inside the quota) or when the requested v2 exceeds the safe
    ceiling.
    """

    scenario.validate()
    grid, prices, fleet = scenario.grid, scenario.prices, scenario.fleet

    groups = assign_groups(fleet)
    arrivals = group_arrivals(groups, fleet, grid)
    caps = capacity_matrix(groups, fleet, grid)

    p_g_max = float(caps.sum(axis=0).max())
    pi_g_max = float((prices.pi_e * grid.dt_hours).max())
    rho_max = float(prices.rho.max())
    rho_min = float(prices.rho.min())

    jump = rho_max * p_g_max * grid.dt_hours + scenario.m_b_max
    if jump > scenario.quota + 1e-9:
        raise ConfigurationError(
            "quota too small for the fleet: a worst-case slot can add "
            f"{jump:.3f} kg (grid draw {p_g_max:.1f} kW at intensity "
            f"{rho_max:.3f} plus allowance sales {scenario.m_b_max:.1f} kg) "
            f"but the quota is {scenario.quota:.3f} kg; shrink the fleet, "
            "the slot length, or the allowance block, or raise the quota"
        )

    loose = float(v2_max(scenario.quota, scenario.m_b_max, prices.pi_c.max(), pi_g_max, rho_min))
    tight = float(v2_max_tight(
        scenario.quota,
        scenario.m_b_max,
        prices.pi_c.max(),
        pi_g_max,
        rho_min,
        rho_max,
        p_g_max,
        grid.dt_hours,
    ))
    v2 = 0.5 * tight if scenario.v2 is None else float(scenario.v2)
    if v2 > tight + 1e-9:
        raise ConfigurationError(
            f"v2={v2:.4f} exceeds the safe ceiling {tight:.4f}; footprint "
            "excursions above the quota could no longer be ruled out"
        )

    constants = drift_constants(caps, arrivals, scenario.v1)
    a2 = a2_constant(rho_max, p_g_max, grid.dt_hours, scenario.m_b_max)

    return RunSetup(
        groups=groups,
        arrivals=arrivals,
        caps=caps,
        p_g_max=p_g_max,
        pi_g_max=pi_g_max,
        v2_loose=loose,
        v2_tight=tight,
        v2=v2,
        constants=constants,
        a2=a2,
    )


def _procurement_rule(t, p_check, p_hat, ledger, pi_e, pi_c, rho, pv, dt, trading):
    return solve_stage2(p_check, p_hat, ledger, pi_e, pi_c, rho, pv, dt, trading)


def make_alpha_rule(alpha: float) -> DispatchRule:
    """Fixed-ratio dispatch: slide between the band edges, keep the
    allowance rule of the procurement policy."""

    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")

    def rule(t, p_check, p_hat, ledger, pi_e, pi_c, rho, pv, dt, trading):
        p_d = p_check + alpha * (p_hat - p_check)
        p_r = min(p_d, pv)
        p_g = p_d - p_r
        coeff_b = ledger.v2 * pi_c - ledger.h
        m_b = ledger.m_b_max if (trading and coeff_b < 0.0) else 0.0
        cost = pi_e * p_g * dt + pi_c * m_b
        return DispatchDecision(
            p_d=p_d, p_g=p_g, p_r=p_r, m_b=m_b, cost=cost,
            m_c=rho * p_g * dt - m_b,
        )

    return rule


def run(
    scenario: Scenario,
    policy: str = "proposed",
    dispatch: DispatchRule | None = None,
) -> RunResult:
    """Simulate one horizon under the given dispatch policy.

    policy: "proposed" (drift-plus-penalty procurement), "alpha"
    (fixed-ratio inside the band), or "custom" with an explicit
    ``dispatch`` rule.  Raises QuotaViolation if the footprint leaves
    [0, quota], ConfigurationError if the scenario cannot be run safely.
    """

    setup = prepare(scenario)
    grid, prices, fleet = scenario.grid, scenario.prices, scenario.fleet
    T = grid.n_slots
    G = len(setup.groups)
    N = len(fleet)
    dt = grid.dt_hours
    combined = prices.combined()
    carbon_mask = grid.carbon_mask()

    if dispatch is not None:
        rule = dispatch
        policy = policy if policy != "proposed" else "custom"
    elif policy == "proposed":
        rule = _procurement_rule
    elif policy == "alpha":
        rule = make_alpha_rule(scenario.alpha)
    else:
        raise ValueError(f"unknown policy {policy!r} and no dispatch rule given")

    builder = EnvelopeBuilder(fleet, setup.groups, grid)
    ledger = CarbonLedger.start(
        scenario.c_init,
        scenario.quota,
        scenario.m_b_max,
        setup.v2,
        setup.pi_g_max,
        float(prices.rho[0]),
        mode=scenario.h_update,
    )
    # arrivals of slot 1 are visible to the slot-1 solve
    state = GroupState(
        q_hat=setup.arrivals.a_hat[:, 0].copy(),
        q_check=setup.arrivals.a_check[:, 0].copy(),
        x_max_t=np.zeros(G),
    )

    x_hat = np.zeros((G, T))
    x_check = np.zeros((G, T))
    q_hat = np.zeros((G, T))
    q_check = np.zeros((G, T))
    f_queue = np.zeros(T)
    p_d = np.zeros(T)
    p_g = np.zeros(T)
    p_r = np.zeros(T)
    m_b = np.zeros(T)
    cost = np.zeros(T)
    c = np.zeros(T + 1)
    h = np.zeros(T)
    phi = np.zeros(T)
    betas = np.zeros(T)
    unserved = np.zeros(T)
    p_ev = np.zeros((N, T))
    e_ev = np.zeros((N, T + 1))
    eta = np.empty(N)
    for task in fleet:
        # rows are indexed by task id, matching the envelope profiles
        e_ev[task.id, : task.t_arrive] = task.e_init
        eta[task.id] = task.eta_c
    c[0] = ledger.c

    for t in range(1, T + 1):
        i = t - 1
        q_hat[:, i] = state.q_hat
        q_check[:, i] = state.q_check

        band = solve_stage1(state, float(combined[i]), scenario.v1, setup.caps[:, i])
        x_hat[:, i] = band.x_hat
        x_check[:, i] = band.x_check
        f_queue[i] = band.f_value

        p_lo, p_hi = builder.step(t, band.x_check, band.x_hat, state.q_check)
        lo = float(p_lo.sum())
        hi = float(p_hi.sum())

        h[i] = ledger.h
        phi[i] = ledger.phi
        decision = rule(
            t, lo, hi, ledger,
            float(prices.pi_e[i]), float(prices.pi_c[i]), float(prices.rho[i]),
            float(prices.pv_max[i]), dt, bool(carbon_mask[i]),
        )
        p_d[i] = decision.p_d
        p_g[i] = decision.p_g
        p_r[i] = decision.p_r
        m_b[i] = decision.m_b
        cost[i] = decision.cost

        if decision.p_d < lo - AGG_TOL:
            # dispatch below the committed floor (load-shedding rules):
            # scale the lower profile down, track the shortfall
            unserved[i] = (lo - decision.p_d) * dt
            scale = decision.p_d / lo if lo > 0.0 else 0.0
            betas[i] = 1.0
            p_ev[:, i] = scale * p_lo
        else:
            b = beta(decision.p_d, lo, hi)
            betas[i] = b
            p_ev[:, i] = b * p_lo + (1.0 - b) * p_hi
        e_ev[:, t] = e_ev[:, t - 1] + eta * p_ev[:, i] * dt

        rho_next = float(prices.rho[i + 1]) if t < T else float(prices.rho[i])
        ledger = update_carbon(ledger, decision, float(prices.rho[i]), dt, rho_next)
        c[t] = ledger.c

        # queue recursion: serve this slot's claims, then fold in the
        # arrivals that become visible at the next slot
        if t < T:
            state = update_queues(
                state, band.x_hat, band.x_check,
                setup.arrivals.a_hat[:, t], setup.arrivals.a_check[:, t],
            )
        else:
            state = update_queues(
                state, band.x_hat, band.x_check, np.zeros(G), np.zeros(G)
            )

    profiles = builder.finish()
    return RunResult(
        scenario=scenario,
        setup=setup,
        policy=policy,
        x_hat=x_hat,
        x_check=x_check,
        q_hat=q_hat,
        q_check=q_check,
        p_hat_queue=x_hat.sum(axis=0),
        p_check_queue=x_check.sum(axis=0),
        f_queue=f_queue,
        profiles=profiles,
        p_hat=profiles.x_hat_eff.sum(axis=0),
        p_check=profiles.x_check_eff.sum(axis=0),
        f_value=combined * (profiles.x_hat_eff.sum(axis=0) - profiles.x_check_eff.sum(axis=0)),
        p_d=p_d,
        p_g=p_g,
        p_r=p_r,
        m_b=m_b,
        cost=cost,
        c=c,
        h=h,
        phi=phi,
        beta=betas,
        unserved=unserved,
        p_ev=p_ev,
        e_ev=e_ev,
        q_hat_final=state.q_hat,
        q_check_final=state.q_check,
    )
