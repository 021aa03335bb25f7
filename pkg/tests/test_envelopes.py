"""Boundary-profile construction, invariants, and the mixing rule."""

import numpy as np
import pytest

from evflex.envelopes import EnvelopeBuilder, beta, build_envelopes, check_profiles, disaggregate_power
from evflex.fleet import assign_groups, capacity_matrix
from evflex.scenario import ChargingTask, TimeGrid, desk_scenario


def small_instance():
    grid = TimeGrid(n_slots=6, dt_hours=1.0, carbon_every=1)
    fleet = [
        ChargingTask(id=0, t_arrive=1, t_depart=4, e_init=0.0, e_target=3.0, e_min=0.0, e_max=5.0, p_max=2.0, eta_c=1.0),
        ChargingTask(id=1, t_arrive=2, t_depart=6, e_init=1.0, e_target=4.0, e_min=0.0, e_max=6.0, p_max=3.0, eta_c=1.0),
    ]
    groups = assign_groups(fleet)
    return grid, fleet, groups


def full_claims(groups, fleet, grid):
    caps = capacity_matrix(groups, fleet, grid)
    return caps.copy(), caps.copy()


def test_boundary_profiles_feasible_and_ordered():
    grid, fleet, groups = small_instance()
    x_check, x_hat = full_claims(groups, fleet, grid)
    prof = build_envelopes(x_check, x_hat, groups, fleet, grid)
    assert np.all(prof.p_hat_c >= prof.p_check_c - 1e-12)
    assert check_profiles(prof.p_check_c, prof.e_check, fleet, grid) == []
    assert check_profiles(prof.p_hat_c, prof.e_hat, fleet, grid) == []
    for task in fleet:
        assert prof.e_check[task.id, task.t_depart - 1] >= task.e_target - 1e-9
        gap = prof.e_hat[task.id] - prof.e_check[task.id]
        assert np.all(gap <= (task.e_max - task.e_target) + 1e-9)


def test_effective_sums_match_members():
    grid, fleet, groups = small_instance()
    x_check, x_hat = full_claims(groups, fleet, grid)
    prof = build_envelopes(x_check, x_hat, groups, fleet, grid)
    for gi, group in enumerate(groups):
        lo = sum(prof.p_check_c[v] for v in group.members)
        hi = sum(prof.p_hat_c[v] for v in group.members)
        assert np.allclose(prof.x_check_eff[gi], lo, atol=1e-12)
        assert np.allclose(prof.x_hat_eff[gi], hi, atol=1e-12)
    # effective band never promises beyond the claims
    assert np.all(prof.x_hat_eff <= x_hat + 1e-9)


def test_deadline_forcing_without_budget():
    grid = TimeGrid(n_slots=3, dt_hours=1.0, carbon_every=1)
    fleet = [ChargingTask(id=0, t_arrive=1, t_depart=3, e_init=0.0, e_target=3.0, e_min=0.0, e_max=3.5, p_max=2.0, eta_c=1.0)]
    groups = assign_groups(fleet)
    zeros = np.zeros((1, 3))
    prof = build_envelopes(zeros, zeros, groups, fleet, grid, q_check=zeros)
    # zero claims everywhere: the floor must still deliver 3 kWh by slot 2
    assert prof.p_check_c[0, 0] == pytest.approx(1.5)  # 3 kWh over 2 remaining slots
    assert prof.p_check_c[0, 1] == pytest.approx(1.5)
    assert prof.e_check[0, 2] >= 3.0 - 1e-9


def test_lower_budget_defers_service():
    grid = TimeGrid(n_slots=4, dt_hours=1.0, carbon_every=1)
    fleet = [ChargingTask(id=0, t_arrive=1, t_depart=4, e_init=0.0, e_target=3.0, e_min=0.0, e_max=4.0, p_max=3.0, eta_c=1.0)]
    groups = assign_groups(fleet)
    caps = capacity_matrix(groups, fleet, grid)
    paused = caps.copy()
    paused[0, 0] = 0.0  # claims pause in slot 1
    prof_paused = build_envelopes(paused, caps, groups, fleet, grid)
    prof_eager = build_envelopes(caps, caps, groups, fleet, grid)
    assert prof_paused.p_check_c[0, 0] < prof_eager.p_check_c[0, 0]
    assert prof_paused.e_check[0, -1] >= 3.0 - 1e-9  # target still lands


def test_builder_requires_slot_order_and_dense_ids():
    grid, fleet, groups = small_instance()
    builder = EnvelopeBuilder(fleet, groups, grid)
    with pytest.raises(ValueError, match="order"):
        builder.step(2, np.zeros(len(groups)), np.zeros(len(groups)))
    with pytest.raises(ValueError, match="horizon"):
        EnvelopeBuilder(fleet, groups, grid).finish()
    sparse = [ChargingTask(id=5, t_arrive=1, t_depart=2, e_init=0.0, e_target=1.0, e_min=0.0, e_max=2.0, p_max=2.0, eta_c=1.0)]
    with pytest.raises(ValueError, match="ids"):
        EnvelopeBuilder(sparse, assign_groups(sparse), grid)


def test_beta_mixing_rule():
    assert beta(6.0, 2.0, 10.0) == pytest.approx(0.5)
    assert beta(10.0, 2.0, 10.0) == 0.0
    assert beta(2.0, 2.0, 10.0) == 1.0
    assert beta(4.0, 4.0, 4.0) == 0.0  # degenerate band
    with pytest.raises(ValueError):
        beta(11.0, 2.0, 10.0)
    with pytest.raises(ValueError):
        beta(1.0, 2.0, 10.0)


def test_random_mixtures_stay_inside_envelope():
    sc = desk_scenario(9, n_ev=6, n_slots=24)
    groups = assign_groups(sc.fleet)
    caps = capacity_matrix(groups, sc.fleet, sc.grid)
    prof = build_envelopes(caps, caps, groups, sc.fleet, sc.grid)
    rng = np.random.default_rng(5)
    for _ in range(25):
        betas = rng.uniform(0.0, 1.0, size=sc.grid.n_slots)
        p, e = disaggregate_power(betas, prof, sc.fleet, sc.grid)
        assert np.all(p >= prof.p_check_c - 1e-9)
        assert np.all(p <= prof.p_hat_c + 1e-9)
        assert check_profiles(p, e, sc.fleet, sc.grid) == []
    with pytest.raises(ValueError):
        disaggregate_power(np.full(sc.grid.n_slots, 1.2), prof, sc.fleet, sc.grid)
    with pytest.raises(ValueError):
        disaggregate_power(np.zeros(3), prof, sc.fleet, sc.grid)


def test_check_profiles_flags_violations():
    grid, fleet, groups = small_instance()
    x_check, x_hat = full_claims(groups, fleet, grid)
    prof = build_envelopes(x_check, x_hat, groups, fleet, grid)
    p = prof.p_check_c.copy()
    p[0, 5] = 1.0  # outside EV 0's window
    e = prof.e_check.copy()
    problems = check_profiles(p, e, fleet, grid)
    assert any("outside presence" in msg for msg in problems)
    assert any("inconsistent" in msg for msg in problems)
