"""Render a run to a small set of PNG figures.

Import stays cheap (matplotlib is only pulled in when rendering) and the
Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .engine import RunResult


def _hours(result: RunResult) -> np.ndarray:
    dt = result.scenario.grid.dt_hours
    return np.arange(1, result.scenario.grid.n_slots + 1) * dt


def render_figures(result: RunResult, out_dir: str | Path, stem: str = "fig") -> list[Path]:
    """Write band, procurement, footprint and fleet figures; returns paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hours = _hours(result)
    prices = result.scenario.prices
    written: list[Path] = []

    # band and dispatch
    fig, (ax, axp) = plt.subplots(
        2, 1, figsize=(9, 6), sharex=True, height_ratios=[2, 1]
    )
    ax.fill_between(hours, result.p_check, result.p_hat, alpha=0.3, label="feasible band")
    ax.plot(hours, result.p_d, lw=1.2, label="dispatch")
    ax.plot(hours, result.p_r, lw=0.9, ls="--", label="renewable share")
    ax.set_ylabel("power [kW]")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("aggregate flexibility band and dispatch")
    axp.plot(hours, prices.combined(), lw=1.0, label="effective energy price")
    axp.plot(hours, prices.pi_e, lw=0.8, ls=":", label="energy price")
    axp.set_ylabel("$/kWh")
    axp.set_xlabel("hour")
    axp.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = out / f"{stem}_band.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    # carbon ledger
    fig, ax = plt.subplots(figsize=(9, 4))
    edges = np.concatenate([[hours[0] - result.scenario.grid.dt_hours], hours])
    ax.step(edges, result.c, where="post", lw=1.2, label="footprint")
    ax.axhline(result.scenario.quota, color="tab:red", ls="--", lw=1.0, label="quota")
    trade_slots = result.m_b > 1e-9
    if trade_slots.any():
        ax.plot(
            hours[trade_slots], result.c[1:][trade_slots], "v",
            ms=5, color="tab:green", label="allowance purchase",
        )
    ax.set_xlabel("hour")
    ax.set_ylabel("kg CO2")
    ax.set_title("carbon footprint against the quota")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out / f"{stem}_carbon.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    # queue backlogs
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(hours, result.q_hat.sum(axis=0), lw=1.1, label="upper backlog")
    ax.plot(hours, result.q_check.sum(axis=0), lw=1.1, label="lower backlog")
    ax.set_xlabel("hour")
    ax.set_ylabel("kW backlog")
    ax.set_title("charging queues")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out / f"{stem}_queues.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    # fleet state of charge
    fig, ax = plt.subplots(figsize=(9, 4))
    e_hours = np.concatenate([[hours[0] - result.scenario.grid.dt_hours], hours])
    for task in result.scenario.fleet:
        ax.plot(e_hours, result.e_ev[task.id], lw=0.6, alpha=0.5)
    ax.set_xlabel("hour")
    ax.set_ylabel("energy [kWh]")
    ax.set_title("per-EV energy paths")
    fig.tight_layout()
    path = out / f"{stem}_fleet.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    return written
