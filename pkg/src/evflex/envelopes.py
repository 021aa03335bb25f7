"""Per-EV boundary charging profiles realizing the aggregate band.

The band published per slot is backed by two feasible per-EV profiles: a lower
profile that still reaches every EV's target by departure, and an upper profile
dominating it pointwise without breaching battery ceilings. Any aggregate
dispatch inside the band then disaggregates exactly by mixing the two profiles
with a per-slot ratio.

Construction per group and slot, members in earliest-departure order:

1. the lower budget min(x_check, q_check) water-fills toward each target,
   capped at rated power and remaining target energy;
2. leftover lower budget spills toward ceilings, capped by the *upper* path's
   headroom so the upper profile can keep dominating;
3. any EV short of its target gets its power floor raised to remaining energy
   spread over the slots left before departure (may exceed the budget: targets
   are hard);
4. the upper profile adds width on top of the lower one from the claim x_hat,
   capped by rated power, ceiling headroom, and a running gap limit
   e_hat - e_check <= e_max - e_target that keeps step 1 and step 3 always
   compatible with dominance.

The lower budget is clipped to the backlog q_check so the conveyor pauses
whenever the claims do (that pause is where band value comes from). The upper
budget deliberately is not: the max-plus queue forgets backlog whenever claims
exceed what batteries absorb, and clipping to it would strangle the offered
width right after an arrival rush. Ceiling headroom already guarantees the
upper profile never promises energy the fleet cannot take.

Sums of the profiles define the *effective* band actually offered for
dispatch; it never claims width the fleet cannot absorb.

Energy bookkeeping: e[v, s] is the battery level at the start of slot s+1
(0-based s), so the target must be met at e[v, t_depart - 1] and charging
during the departure slot itself can only top up toward the ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fleet import GroupIndex
from .scenario import ChargingTask, TimeGrid

ENV_TOL = 1e-7


@dataclass
class EnvelopeProfiles:
    """Boundary profiles (N, T) and their energy paths (N, T+1)."""

    p_hat_c: np.ndarray
    p_check_c: np.ndarray
    e_hat: np.ndarray
    e_check: np.ndarray
    x_hat_eff: np.ndarray  # per-group sums of p_hat_c, shape (G, T)
    x_check_eff: np.ndarray


class EnvelopeBuilder:
    """Incremental construction, one slot per step (the band arrives online)."""

    def __init__(self, fleet: list[ChargingTask], groups: list[GroupIndex], grid: TimeGrid):
        self.fleet = fleet
        self.groups = groups
        self.grid = grid
        self.n = len(fleet)
        by_id = {task.id: task for task in fleet}
        if set(by_id) != set(range(self.n)):
            raise ValueError("task ids must be 0..N-1 for envelope construction")
        self.tasks = [by_id[v] for v in range(self.n)]
        # member ids per group in earliest-departure order
        self._edf = [sorted(g.members, key=lambda v: (by_id[v].t_depart, v)) for g in groups]
        self.e_check = np.array([task.e_init for task in self.tasks])
        self.e_hat = self.e_check.copy()
        T = grid.n_slots
        self.p_check_c = np.zeros((self.n, T))
        self.p_hat_c = np.zeros((self.n, T))
        self.e_check_path = np.zeros((self.n, T + 1))
        self.e_hat_path = np.zeros((self.n, T + 1))
        self.e_check_path[:, 0] = self.e_check
        self.e_hat_path[:, 0] = self.e_hat
        self.x_check_eff = np.zeros((len(groups), T))
        self.x_hat_eff = np.zeros((len(groups), T))
        self._t_done = 0

    def step(
        self,
        t: int,
        x_check: np.ndarray,
        x_hat: np.ndarray,
        q_check: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Build both profiles for 1-based slot t; returns (p_check, p_hat) rows."""
        if t != self._t_done + 1:
            raise ValueError(f"slots must be built in order (expected {self._t_done + 1}, got {t})")
        dt = self.grid.dt_hours
        p_lo = np.zeros(self.n)
        p_hi = np.zeros(self.n)
        for gi, order in enumerate(self._edf):
            present = [v for v in order if self.tasks[v].t_arrive <= t <= self.tasks[v].t_depart]
            if not present:
                continue
            budget_lo = float(x_check[gi]) if q_check is None else min(float(x_check[gi]), float(q_check[gi]))
            budget_lo = max(budget_lo, 0.0)
            for v in present:
                task = self.tasks[v]
                need = max(task.e_target - self.e_check[v], 0.0) / (task.eta_c * dt)
                take = min(task.p_max, need, budget_lo)
                if take > 0:
                    p_lo[v] = take
                    budget_lo -= take
            if budget_lo > ENV_TOL:
                for v in present:
                    task = self.tasks[v]
                    head = max(task.e_max - self.e_hat[v], 0.0) / (task.eta_c * dt)
                    room = min(task.p_max, head) - p_lo[v]
                    take = min(max(room, 0.0), budget_lo)
                    if take > 0:
                        p_lo[v] += take
                        budget_lo -= take
            for v in present:
                task = self.tasks[v]
                n_left = task.t_depart - t  # slots that still count toward the target
                if n_left >= 1:
                    floor = max(task.e_target - self.e_check[v], 0.0) / (task.eta_c * dt * n_left)
                    if floor > p_lo[v]:
                        p_lo[v] = min(floor, task.p_max)

            width = max(float(x_hat[gi]) - sum(p_lo[v] for v in present), 0.0)
            for v in present:
                task = self.tasks[v]
                head = max(task.e_max - self.e_hat[v], 0.0) / (task.eta_c * dt)
                gap_room = ((task.e_max - task.e_target) - (self.e_hat[v] - self.e_check[v])) / (task.eta_c * dt)
                delta = min(task.p_max - p_lo[v], head - p_lo[v], max(gap_room, 0.0), width)
                p_hi[v] = p_lo[v] + max(delta, 0.0)
                width -= max(delta, 0.0)

        self.e_check = self.e_check + np.array([task.eta_c for task in self.tasks]) * p_lo * dt
        self.e_hat = self.e_hat + np.array([task.eta_c for task in self.tasks]) * p_hi * dt
        for v, task in enumerate(self.tasks):
            if self.e_hat[v] > task.e_max + ENV_TOL:
                raise AssertionError(f"upper path of EV {v} exceeds ceiling at slot {t}")
            if self.e_hat[v] - self.e_check[v] > (task.e_max - task.e_target) + ENV_TOL:
                raise AssertionError(f"gap invariant broken for EV {v} at slot {t}")
        idx = t - 1
        self.p_check_c[:, idx] = p_lo
        self.p_hat_c[:, idx] = p_hi
        self.e_check_path[:, idx + 1] = self.e_check
        self.e_hat_path[:, idx + 1] = self.e_hat
        for gi, group in enumerate(self.groups):
            self.x_check_eff[gi, idx] = sum(p_lo[v] for v in group.members)
            self.x_hat_eff[gi, idx] = sum(p_hi[v] for v in group.members)
        self._t_done = t
        return p_lo, p_hi

    def finish(self) -> EnvelopeProfiles:
        if self._t_done != self.grid.n_slots:
            raise ValueError("horizon incomplete")
        return EnvelopeProfiles(
            p_hat_c=self.p_hat_c,
            p_check_c=self.p_check_c,
            e_hat=self.e_hat_path,
            e_check=self.e_check_path,
            x_hat_eff=self.x_hat_eff,
            x_check_eff=self.x_check_eff,
        )


def build_envelopes(
    x_check: np.ndarray,
    x_hat: np.ndarray,
    groups: list[GroupIndex],
    fleet: list[ChargingTask],
    grid: TimeGrid,
    q_check: np.ndarray | None = None,
) -> EnvelopeProfiles:
    """Whole-horizon construction from per-group bound arrays of shape (G, T)."""
    builder = EnvelopeBuilder(fleet, groups, grid)
    for t in range(1, grid.n_slots + 1):
        builder.step(
            t,
            x_check[:, t - 1],
            x_hat[:, t - 1],
            None if q_check is None else q_check[:, t - 1],
        )
    return builder.finish()


def beta(p_d: float, p_check: float, p_hat: float, tol: float = 1e-7) -> float:
    """Mixing ratio (p_hat - p_d) / (p_hat - p_check); 0 on a degenerate band."""
    if p_d < p_check - tol or p_d > p_hat + tol:
        raise ValueError(f"dispatch {p_d} outside band [{p_check}, {p_hat}]")
    width = p_hat - p_check
    if width <= tol:
        return 0.0
    return float(min(max((p_hat - p_d) / width, 0.0), 1.0))


def disaggregate_power(betas: np.ndarray, profiles: EnvelopeProfiles, fleet: list[ChargingTask], grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Mix the boundary profiles slot-wise: p = beta * lower + (1 - beta) * upper.

    Returns per-EV powers (N, T) and energy paths (N, T+1). The mix inherits
    feasibility from the boundary profiles: each power lies in [lower, upper],
    so each energy path lies between the boundary paths.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.shape != (grid.n_slots,):
        raise ValueError("one beta per slot required")
    if np.any((betas < -1e-9) | (betas > 1 + 1e-9)):
        raise ValueError("beta out of [0, 1]")
    p = betas * profiles.p_check_c + (1.0 - betas) * profiles.p_hat_c
    e = np.zeros((p.shape[0], grid.n_slots + 1))
    e[:, 0] = profiles.e_check[:, 0]
    eta = np.array([task.eta_c for task in sorted(fleet, key=lambda x: x.id)])
    for s in range(grid.n_slots):
        e[:, s + 1] = e[:, s] + eta * p[:, s] * grid.dt_hours
    return p, e


def check_profiles(
    p: np.ndarray,
    e: np.ndarray,
    fleet: list[ChargingTask],
    grid: TimeGrid,
    tol: float = 1e-6,
) -> list[str]:
    """All per-EV constraint violations of a dispatch (empty list = feasible)."""
    problems: list[str] = []
    tasks = sorted(fleet, key=lambda task: task.id)
    for v, task in enumerate(tasks):
        for t in range(1, grid.n_slots + 1):
            inside = task.t_arrive <= t <= task.t_depart
            if not inside and abs(p[v, t - 1]) > tol:
                problems.append(f"EV {task.id}: power {p[v, t - 1]:.6f} outside presence at slot {t}")
            if p[v, t - 1] < -tol or p[v, t - 1] > task.p_max + tol:
                problems.append(f"EV {task.id}: power {p[v, t - 1]:.6f} outside [0, {task.p_max}] at slot {t}")
        if np.any(e[v] < task.e_min - tol) or np.any(e[v] > task.e_max + tol):
            problems.append(f"EV {task.id}: energy path leaves [{task.e_min}, {task.e_max}]")
        if e[v, task.t_depart - 1] < task.e_target - tol:
            problems.append(
                f"EV {task.id}: departs with {e[v, task.t_depart - 1]:.6f} < target {task.e_target:.6f}"
            )
        expect = e[v, 0] + np.cumsum(task.eta_c * p[v] * grid.dt_hours)
        if np.max(np.abs(expect - e[v, 1:])) > tol:
            problems.append(f"EV {task.id}: energy path inconsistent with its powers")
    return problems
