"""Delay groups, arrival-demand sequences, and the two charging queues.

EVs are grouped by parking duration (delay) R_g = t_depart - t_arrive. Each
group g carries two backlog queues in kW units:

* q_check tracks the demand that must be served (target energy), fed by the
  lower arrival sequence;
* q_hat tracks the demand that could be served (battery ceiling), fed by the
  upper arrival sequence.

A task's demand enters its group queue at the arrival slot, spread as a power
sequence: full rated power for the whole slots of the minimum charging time,
then the remainder. Service never exceeds the per-slot group capacity, which
sums rated powers over members currently plugged in (slots t_arrive..t_depart
inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ChargingTask, TimeGrid


@dataclass(frozen=True)
class GroupIndex:
    g: int  # 1-based group id
    r_g: int  # charging delay in slots
    members: tuple[int, ...]  # task ids


@dataclass
class ArrivalDemand:
    """Per-group arrival sequences, shape (G, T); maxima are per-group."""

    a_hat: np.ndarray
    a_check: np.ndarray
    a_hat_max: np.ndarray
    a_check_max: np.ndarray

    def __post_init__(self) -> None:
        if self.a_hat.shape != self.a_check.shape:
            raise ValueError("arrival arrays must share a shape")
        if np.any(self.a_check < -1e-12) or np.any(self.a_hat - self.a_check < -1e-9):
            raise ValueError("arrival sequences must satisfy 0 <= a_check <= a_hat")


@dataclass
class GroupState:
    """Queue backlogs (kW) and the current service capacity per group."""

    q_hat: np.ndarray
    q_check: np.ndarray
    x_max_t: np.ndarray

    @classmethod
    def zeros(cls, n_groups: int) -> "GroupState":
        return cls(np.zeros(n_groups), np.zeros(n_groups), np.zeros(n_groups))


def assign_groups(fleet: list[ChargingTask]) -> list[GroupIndex]:
    """Partition tasks by distinct delay, ascending; group ids are 1..G."""
    if not fleet:
        raise ValueError("empty fleet")
    by_delay: dict[int, list[int]] = {}
    for task in fleet:
        by_delay.setdefault(task.dwell_slots, []).append(task.id)
    return [
        GroupIndex(g=i + 1, r_g=delay, members=tuple(sorted(by_delay[delay])))
        for i, delay in enumerate(sorted(by_delay))
    ]


def _demand_sequence(energy_kwh: float, task: ChargingTask, grid: TimeGrid) -> np.ndarray:
    """Spread energy_kwh over slots from t_arrive at rated power, remainder last.

    The sum over slots of a * eta_c * dt recovers energy_kwh exactly, except
    when the sequence would run past the horizon; the overhang is dropped (it
    could never be served anyway).
    """
    T = grid.n_slots
    a = np.zeros(T)
    if energy_kwh <= 0:
        return a
    per_slot = task.p_max * task.eta_c * grid.dt_hours  # kWh moved per full-power slot
    t_min = energy_kwh / per_slot  # minimum charging time, in slots
    full = int(math.floor(t_min))
    start = task.t_arrive - 1
    stop_full = min(start + full, T)
    a[start:stop_full] = task.p_max
    rem = energy_kwh / (task.eta_c * grid.dt_hours) - full * task.p_max
    if rem > 1e-12 and start + full < T:
        a[start + full] = rem
    return a


def arrival_demand(task: ChargingTask, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper arrival sequences (kW), each of length T."""
    a_check = _demand_sequence(task.required_energy(), task, grid)
    a_hat = _demand_sequence(task.ceiling_energy(), task, grid)
    return a_check, a_hat


def group_arrivals(groups: list[GroupIndex], fleet: list[ChargingTask], grid: TimeGrid) -> ArrivalDemand:
    by_id = {task.id: task for task in fleet}
    G, T = len(groups), grid.n_slots
    a_hat = np.zeros((G, T))
    a_check = np.zeros((G, T))
    for i, group in enumerate(groups):
        for vid in group.members:
            lo, hi = arrival_demand(by_id[vid], grid)
            a_check[i] += lo
            a_hat[i] += hi
    return ArrivalDemand(
        a_hat=a_hat,
        a_check=a_check,
        a_hat_max=a_hat.max(axis=1),
        a_check_max=a_check.max(axis=1),
    )


def group_capacity(group: GroupIndex, fleet: list[ChargingTask], t: int) -> float:
    """Total rated power of members plugged in at 1-based slot t."""
    by_id = {task.id: task for task in fleet}
    return sum(by_id[vid].p_max for vid in group.members if by_id[vid].t_arrive <= t <= by_id[vid].t_depart)


def capacity_matrix(groups: list[GroupIndex], fleet: list[ChargingTask], grid: TimeGrid) -> np.ndarray:
    """x_{g,max} for every group and slot, shape (G, T)."""
    by_id = {task.id: task for task in fleet}
    caps = np.zeros((len(groups), grid.n_slots))
    for i, group in enumerate(groups):
        for vid in group.members:
            task = by_id[vid]
            caps[i, task.t_arrive - 1 : task.t_depart] += task.p_max
    return caps


def update_queues(
    state: GroupState,
    x_hat: np.ndarray,
    x_check: np.ndarray,
    a_hat: np.ndarray,
    a_check: np.ndarray,
) -> GroupState:
    """One step of Q <- max(Q - x, 0) + a on both queues."""
    for name, arr in (("x_hat", x_hat), ("x_check", x_check), ("a_hat", a_hat), ("a_check", a_check)):
        if np.any(np.asarray(arr) < 0):
            raise ValueError(f"{name} must be nonnegative")
    return GroupState(
        q_hat=np.maximum(state.q_hat - x_hat, 0.0) + a_hat,
        q_check=np.maximum(state.q_check - x_check, 0.0) + a_check,
        x_max_t=state.x_max_t.copy(),
    )
