"""Procurement stage: grid purchase, renewable use, aggregate EV dispatch, and
allowance trading against a carbon-footprint budget.

The footprint c_t behaves like a battery: grid emissions rho_t * p_g * dt
charge it, allowance purchases m_b discharge it, and 0 <= c_t <= quota must
hold at every slot. A shifted copy H_t = c_t - phi_t acts as the virtual queue
steering per-slot decisions; phi is sized so the greedy slot objective

    H_t * (rho_t p_g dt - m_b) + v2 * (pi_e p_g dt + pi_c m_b)

can never push the footprint outside the budget. Free renewable power is always
used first; the purchase coefficient only decides the grid margin beyond it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

SAFETY_TOL = 1e-7


class ConfigurationError(ValueError):
    """Scenario parameters violate a feasibility precondition."""


class QuotaViolation(RuntimeError):
    """The footprint left [0, quota]; the safety preconditions were broken."""


def perturbation_phi(m_b_max: float, v2: float, pi_g_max: float, rho_t: float) -> float:
    """Queue shift phi_t = m_b_max + v2 * pi_g_max / rho_t.

    pi_g_max is the horizon maximum of the per-slot grid energy cost pi_e * dt.
    Larger rho makes grid power dirtier, so the shift tightens toward m_b_max.
    """
    if rho_t <= 0:
        raise ValueError("carbon intensity must be positive")
    if v2 < 0:
        raise ValueError("v2 must be nonnegative")
    return m_b_max + v2 * pi_g_max / rho_t


def v2_max(c_quota: float, m_b_max: float, pi_c_max: float, pi_g_max: float, rho_min: float) -> float:
    """Loose safety cap on v2: (quota - m_b_max) / (pi_c_max + pi_g_max / rho_min)."""
    if c_quota <= m_b_max:
        raise ConfigurationError("quota must exceed m_b_max for any safe v2")
    denom = pi_c_max + pi_g_max / rho_min
    if denom <= 0:
        raise ConfigurationError("price bounds must be positive")
    return (c_quota - m_b_max) / denom


def v2_max_tight(
    c_quota: float,
    m_b_max: float,
    pi_c_max: float,
    pi_g_max: float,
    rho_min: float,
    rho_max: float,
    p_g_max: float,
    dt: float,
) -> float:
    """Tight safety cap: also reserves headroom for one worst-case emission step."""
    head = c_quota - m_b_max - rho_max * p_g_max * dt
    if head <= 0:
        raise ConfigurationError(
            "quota too small: one worst-case slot emission plus one trade exceeds it "
            f"(rho_max * p_g_max * dt = {rho_max * p_g_max * dt:.3f}, m_b_max = {m_b_max}, quota = {c_quota})"
        )
    denom = pi_c_max + pi_g_max / rho_min
    if denom <= 0:
        raise ConfigurationError("price bounds must be positive")
    return head / denom


def a2_constant(rho_max: float, p_g_max: float, dt: float, m_b_max: float) -> float:
    """Worst-case squared one-slot footprint move, halved."""
    return 0.5 * max((rho_max * p_g_max * dt) ** 2, m_b_max**2)


@dataclass(frozen=True)
class CarbonLedger:
    """Footprint state plus the fixed queue-shift parameters."""

    c: float
    h: float
    phi: float
    c_quota: float
    m_b_max: float
    v2: float
    pi_g_max: float
    mode: str = "anchored"  # "anchored": H := c - phi each slot; "recursive": H += m_c

    def __post_init__(self) -> None:
        if not (-SAFETY_TOL <= self.c <= self.c_quota + SAFETY_TOL):
            raise QuotaViolation(f"footprint {self.c:.6f} outside [0, {self.c_quota}]")
        if self.mode == "anchored" and abs(self.h - (self.c - self.phi)) > 1e-9:
            raise AssertionError("anchored ledger must keep h = c - phi")

    @classmethod
    def start(
        cls,
        c_init: float,
        c_quota: float,
        m_b_max: float,
        v2: float,
        pi_g_max: float,
        rho_1: float,
        mode: str = "anchored",
    ) -> "CarbonLedger":
        phi = perturbation_phi(m_b_max, v2, pi_g_max, rho_1)
        return cls(c=c_init, h=c_init - phi, phi=phi, c_quota=c_quota, m_b_max=m_b_max, v2=v2, pi_g_max=pi_g_max, mode=mode)


@dataclass(frozen=True)
class DispatchDecision:
    p_d: float  # aggregate EV charging power, kW
    p_g: float  # grid purchase, kW
    p_r: float  # renewable used, kW
    m_b: float  # allowance bought, kg
    cost: float  # pi_e * p_g * dt + pi_c * m_b
    m_c: float  # footprint increment rho * p_g * dt - m_b


def solve_stage2(
    p_check: float,
    p_hat: float,
    ledger: CarbonLedger,
    pi_e: float,
    pi_c: float,
    rho: float,
    pv_max: float,
    dt: float,
    trading: bool,
) -> DispatchDecision:
    """Exact minimizer of the slot objective with renewable used first.

    With p_r = min(p_d, pv_max) the objective reduces to
    coeff_g * max(p_d - pv_max, 0) + coeff_b * m_b with
    coeff_g = dt * (h * rho + v2 * pi_e) per kW and coeff_b = v2 * pi_c - h.
    Ties break toward the largest p_d (serve more EV energy at equal cost)
    and toward m_b = 0.
    """
    if p_check > p_hat + 1e-9:
        raise ValueError(f"empty band: p_check {p_check} > p_hat {p_hat}")
    p_check = max(p_check, 0.0)
    p_hat = max(p_hat, p_check)

    coeff_g = dt * (ledger.h * rho + ledger.v2 * pi_e)
    if coeff_g <= 0:
        p_d = p_hat
    else:
        p_d = min(p_hat, max(p_check, pv_max))
    p_r = min(p_d, pv_max)
    p_g = p_d - p_r

    coeff_b = ledger.v2 * pi_c - ledger.h
    m_b = ledger.m_b_max if (trading and coeff_b < 0) else 0.0

    return DispatchDecision(
        p_d=p_d,
        p_g=p_g,
        p_r=p_r,
        m_b=m_b,
        cost=pi_e * p_g * dt + pi_c * m_b,
        m_c=rho * p_g * dt - m_b,
    )


def update_carbon(
    ledger: CarbonLedger,
    decision: DispatchDecision,
    rho_t: float,
    delta_t: float,
    rho_next: float | None = None,
) -> CarbonLedger:
    """Advance the footprint one slot and re-derive the virtual queue.

    The footprint recursion is c' = c + rho_t * p_g * dt - m_b and must stay in
    [0, quota]; a violation raises QuotaViolation with diagnostics since it can
    only come from a broken precondition. In anchored mode the queue is re-tied
    to the footprint through the fresh shift (h' = c' - phi'); recursive mode
    instead accumulates h' = h + m_c, which matches the anchored value only
    while rho (hence phi) is constant.
    """
    c_next = ledger.c + rho_t * decision.p_g * delta_t - decision.m_b
    if not (-SAFETY_TOL <= c_next <= ledger.c_quota + SAFETY_TOL):
        raise QuotaViolation(
            f"footprint {c_next:.6f} left [0, {ledger.c_quota}] "
            f"(c={ledger.c:.6f}, p_g={decision.p_g:.3f}, m_b={decision.m_b:.3f}, rho={rho_t:.3f})"
        )
    c_next = min(max(c_next, 0.0), ledger.c_quota)
    phi_next = perturbation_phi(ledger.m_b_max, ledger.v2, ledger.pi_g_max, rho_next if rho_next is not None else rho_t)
    if ledger.mode == "anchored":
        h_next = c_next - phi_next
    else:
        h_next = ledger.h + decision.m_c
    return replace(ledger, c=c_next, h=h_next, phi=phi_next)


def prop4_gap(
    online_cost: float,
    offline_cost: float,
    a2: float,
    v2: float,
    tol: float = 1e-6,
) -> tuple[float, float, bool]:
    """Optimality-gap check for time-average costs: gap in [0, a2 / v2].

    v2 = 0 yields an infinite (vacuous) bound; only gap >= -tol is then checked.
    """
    gap = online_cost - offline_cost
    bound = math.inf if v2 == 0 else a2 / v2
    return gap, bound, (-tol <= gap <= bound + tol)
