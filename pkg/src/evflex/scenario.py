"""Scenario model: time grid, price/PV series, charging tasks, and file formats.

Conventions used across the package:

* slots are labeled 1..T in files and task fields; in-memory arrays are 0-based,
  so column ``t`` in a trace maps to array index ``t - 1``;
* an EV is plugged in for slots t_arrive..t_depart inclusive, but energy checked
  against its target accumulates from charging during slots t_arrive..t_depart-1
  (slot t power acts on the slot-boundary *after* it);
* energies are kWh, powers kW, emissions kg, allowance/energy prices per kWh and
  per kg; a slot lasts ``dt_hours``.

Scenario files round-trip bit-exactly: floats are written with ``repr``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

PRICE_COLUMNS = ["t", "pi_e", "pi_c", "rho", "pv_max"]
FLEET_COLUMNS = ["id", "t_arrive", "t_depart", "e_init", "e_target", "e_min", "e_max", "p_max", "eta_c"]

# Capacity (kWh) -> rated charging power (kW) pairs used by the fleet sampler.
BATTERY_TYPES = ((24.0, 3.3), (40.0, 6.6), (60.0, 10.0))

MAX_RESAMPLE = 1000


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class TimeGrid:
    """Operating horizon: n_slots slots of dt_hours, plus the trading calendar."""

    n_slots: int
    dt_hours: float
    carbon_every: int  # allowance trading permitted every carbon_every-th slot

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        if not (self.dt_hours > 0):
            raise ValueError("dt_hours must be positive")
        if not (1 <= self.carbon_every <= self.n_slots):
            raise ValueError("carbon_every must lie in [1, n_slots]")

    @property
    def carbon_slots(self) -> np.ndarray:
        """1-based, strictly increasing trading slots."""
        return np.arange(self.carbon_every, self.n_slots + 1, self.carbon_every)

    def carbon_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_slots, dtype=bool)
        mask[self.carbon_slots - 1] = True
        return mask

    @property
    def slots_per_hour(self) -> int:
        return max(1, _round_half_up(1.0 / self.dt_hours))


@dataclass
class PriceSeries:
    """Per-slot energy price, allowance price, grid carbon intensity, PV cap."""

    pi_e: np.ndarray  # $/kWh, >= 0
    pi_c: np.ndarray  # $/kg, >= 0
    rho: np.ndarray  # kg/kWh, > 0
    pv_max: np.ndarray  # kW, >= 0

    def __post_init__(self) -> None:
        for name in ("pi_e", "pi_c", "rho", "pv_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.pi_e.size
        if not (self.pi_c.size == self.rho.size == self.pv_max.size == n):
            raise ValueError("price series length mismatch")
        if np.any(self.pi_e < 0) or np.any(self.pi_c < 0) or np.any(self.pv_max < 0):
            raise ValueError("prices and pv_max must be nonnegative")
        if np.any(self.rho <= 0):
            raise ValueError("carbon intensity must be positive")

    def __len__(self) -> int:
        return self.pi_e.size

    def combined(self) -> np.ndarray:
        """Carbon-adjusted energy price pi_t = pi_e + pi_c * rho."""
        return self.pi_e + self.pi_c * self.rho


@dataclass(frozen=True)
class ChargingTask:
    """One EV visit. Slots are 1-based; presence window [t_arrive, t_depart]."""

    id: int
    t_arrive: int
    t_depart: int
    e_init: float  # kWh at arrival
    e_target: float  # must be reached by t_depart
    e_min: float
    e_max: float  # battery ceiling honored by all profiles
    p_max: float  # rated charging power, kW
    eta_c: float  # charging efficiency

    def validate(self, grid: TimeGrid) -> None:
        if not (1 <= self.t_arrive < self.t_depart <= grid.n_slots):
            raise ValueError(f"task {self.id}: window [{self.t_arrive}, {self.t_depart}] invalid for T={grid.n_slots}")
        if not (self.e_min <= self.e_init <= self.e_target <= self.e_max):
            raise ValueError(f"task {self.id}: energy levels must satisfy e_min <= e_init <= e_target <= e_max")
        if not (self.p_max > 0):
            raise ValueError(f"task {self.id}: p_max must be positive")
        if not (0 < self.eta_c <= 1):
            raise ValueError(f"task {self.id}: eta_c must lie in (0, 1]")
        window = self.t_depart - self.t_arrive  # chargeable slots before departure
        if self.e_target - self.e_init > self.eta_c * self.p_max * grid.dt_hours * window + 1e-9:
            raise ValueError(f"task {self.id}: target unreachable within the stay")

    @property
    def dwell_slots(self) -> int:
        return self.t_depart - self.t_arrive

    def required_energy(self) -> float:
        return self.e_target - self.e_init

    def ceiling_energy(self) -> float:
        return self.e_max - self.e_init


@dataclass
class Scenario:
    """Full problem instance plus controller weights."""

    grid: TimeGrid
    prices: PriceSeries
    fleet: list[ChargingTask]
    v1: float = 20.0  # flexibility-vs-backlog weight
    v2: float | None = None  # cost-vs-quota weight; None -> safe bound / 2 at run time
    alpha: float = 0.5  # fixed dispatch ratio for the alpha policy
    quota: float = 80.0  # carbon cap c0, kg
    c_init: float = 40.0  # opening footprint, kg
    m_b_max: float = 20.0  # per-trade allowance cap, kg
    penalty_lambda: float | None = None  # unserved-energy penalty; None -> 10 * max pi_e
    h_update: str = "anchored"  # "anchored" | "recursive"
    seed: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if len(self.prices) != self.grid.n_slots:
            raise ValueError("price series does not cover the grid")
        ids = [task.id for task in self.fleet]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")
        for task in self.fleet:
            task.validate(self.grid)
        if not (self.v1 > 0):
            raise ValueError("v1 must be positive")
        if self.v2 is not None and not (self.v2 >= 0):
            raise ValueError("v2 must be nonnegative when given")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not (0 <= self.c_init <= self.quota):
            raise ValueError("c_init must lie in [0, quota]")
        if not (self.m_b_max >= 0):
            raise ValueError("m_b_max must be nonnegative")
        if self.h_update not in ("anchored", "recursive"):
            raise ValueError("h_update must be 'anchored' or 'recursive'")

    def penalty(self) -> float:
        if self.penalty_lambda is not None:
            return self.penalty_lambda
        return 10.0 * float(np.max(self.prices.pi_e))


# ---------------------------------------------------------------------------
# synthetic inputs


def synth_prices(grid: TimeGrid, seed: int, *, pv_peak_kw: float = 320.0, shape: str = "day") -> PriceSeries:
    """Seeded synthetic price/PV day.

    ``shape='day'`` is the default operating profile: energy price peaking in the
    morning and easing through the afternoon, carbon intensity dipping at midday
    (solar-heavy grid), PV following a daylight bell. ``shape='evening'`` moves
    the energy-price peak to the evening instead (useful for small studies where
    late-day flexibility should be worth more).
    """
    rng = np.random.default_rng(seed)
    T = grid.n_slots
    hours = (np.arange(T) + 0.5) * grid.dt_hours
    day = hours % 24.0

    if shape == "day":
        base = 0.06 + 0.055 * np.exp(-0.5 * ((day - 8.5) / 2.2) ** 2) + 0.025 * np.exp(-0.5 * ((day - 19.0) / 2.0) ** 2)
    elif shape == "evening":
        base = 0.05 + 0.012 * np.exp(-0.5 * ((day - 8.0) / 2.0) ** 2) + 0.08 * np.exp(-0.5 * ((day - 19.5) / 2.8) ** 2)
    else:
        raise ValueError(f"unknown price shape {shape!r}")
    pi_e = base * (1.0 + 0.08 * rng.standard_normal(T))
    pi_e = np.clip(pi_e, 0.01, None)

    pi_c = 0.045 + 0.01 * np.sin(2 * np.pi * (day - 6.0) / 24.0) + 0.003 * rng.standard_normal(T)
    pi_c = np.clip(pi_c, 0.02, 0.06)

    rho = 0.40 - 0.055 * np.exp(-0.5 * ((day - 13.0) / 3.0) ** 2) + 0.006 * rng.standard_normal(T)
    rho = np.clip(rho, 0.32, 0.40)

    daylight = np.clip(np.cos((day - 13.0) / 6.2 * np.pi / 2), 0.0, None)
    pv = pv_peak_kw * daylight**1.4 * (1.0 + 0.10 * rng.standard_normal(T))
    pv_max = np.clip(pv, 0.0, None)

    return PriceSeries(pi_e=pi_e, pi_c=pi_c, rho=rho, pv_max=pv_max)


def sample_fleet(
    n: int,
    grid: TimeGrid,
    seed: int,
    *,
    arrive_mean_h: float = 9.0,
    depart_mean_h: float = 18.0,
    sigma_h: float = 1.2,
    eta_c: float = 1.0,
    ceiling_fit: float | None = None,
) -> list[ChargingTask]:
    """Draw n charging tasks.

    Arrival and departure clock times are Gaussian (9:00 and 18:00, sigma 1.2 h by
    default). The arrival is rounded half-up to a slot; the dwell is rounded to
    whole hours so tasks group by parking duration. Battery capacity/rated power
    pairs are drawn uniformly from BATTERY_TYPES; the initial level is uniform in
    [0.3, 0.5] of capacity, the target is 0.5 and the ceiling 0.9 of capacity.
    Draws violating the task invariants (window inside the horizon, target
    reachable) are resampled, up to MAX_RESAMPLE attempts per task.

    ``ceiling_fit``, if given, additionally requires the *ceiling* energy to be
    deliverable within that fraction of the stay; offline flexibility studies
    need it so the ceiling-side demand also fits the horizon.
    """
    if n < 1:
        raise ValueError("fleet size must be >= 1")
    rng = np.random.default_rng(seed)
    sph = grid.slots_per_hour
    T = grid.n_slots
    tasks: list[ChargingTask] = []
    for ev in range(n):
        for attempt in range(MAX_RESAMPLE):
            t_a_h = rng.normal(arrive_mean_h, sigma_h)
            t_d_h = rng.normal(depart_mean_h, sigma_h)
            cap, p_max = BATTERY_TYPES[rng.integers(0, len(BATTERY_TYPES))]
            e_init = cap * rng.uniform(0.3, 0.5)

            t_a = min(max(_round_half_up(t_a_h / grid.dt_hours), 1), T - 1)
            dwell_h = max(_round_half_up(t_d_h - t_a_h), 1)
            t_d = min(t_a + dwell_h * sph, T)
            if t_d <= t_a:
                t_d = t_a + 1

            task = ChargingTask(
                id=ev,
                t_arrive=t_a,
                t_depart=t_d,
                e_init=e_init,
                e_target=0.5 * cap,
                e_min=0.0,
                e_max=0.9 * cap,
                p_max=p_max,
                eta_c=eta_c,
            )
            try:
                task.validate(grid)
            except ValueError:
                continue
            if ceiling_fit is not None:
                window = (t_d - t_a) * grid.dt_hours * eta_c * p_max
                if task.ceiling_energy() > ceiling_fit * window:
                    continue
            tasks.append(task)
            break
        else:
            raise RuntimeError(f"could not sample a valid task after {MAX_RESAMPLE} attempts (ev {ev})")
    return tasks


def default_scenario(seed: int = 1, *, n_ev: int = 100, n_slots: int = 144, dt_hours: float = 1.0 / 6.0) -> Scenario:
    """Operating-scale default: 144 ten-minute slots, 100 EVs, trading every hour."""
    grid = TimeGrid(n_slots=n_slots, dt_hours=dt_hours, carbon_every=6 if n_slots >= 6 else 1)
    prices = synth_prices(grid, seed)
    fleet = sample_fleet(n_ev, grid, seed + 1)
    return Scenario(grid=grid, prices=prices, fleet=fleet, seed=seed)


def desk_scenario(
    seed: int,
    *,
    n_ev: int = 5,
    n_slots: int = 24,
    dt_hours: float = 1.0,
    v1: float = 20.0,
    v2: float | None = None,
    quota: float = 60.0,
    c_init: float = 20.0,
    m_b_max: float = 8.0,
    carbon_every: int = 3,
    price_shape: str = "evening",
    pv_peak_kw: float | None = None,
) -> Scenario:
    """Small, fully satisfiable instance for tests and offline benchmarks.

    Fleet draws are constrained so the battery ceiling is also reachable within
    90% of the stay (``ceiling_fit=0.9``), which keeps the offline flexibility
    LP feasible on short horizons.
    """
    grid = TimeGrid(n_slots=n_slots, dt_hours=dt_hours, carbon_every=carbon_every)
    if pv_peak_kw is None:
        pv_peak_kw = 4.0 * n_ev
    prices = synth_prices(grid, seed, pv_peak_kw=pv_peak_kw, shape=price_shape)
    fleet = sample_fleet(
        n_ev,
        grid,
        seed + 1,
        arrive_mean_h=max(2.0, 6.0 * dt_hours * n_slots / 24.0),
        depart_mean_h=max(4.0, 18.0 * dt_hours * n_slots / 24.0),
        sigma_h=1.2,
        ceiling_fit=0.9,
    )
    return Scenario(
        grid=grid,
        prices=prices,
        fleet=fleet,
        v1=v1,
        v2=v2,
        quota=quota,
        c_init=c_init,
        m_b_max=m_b_max,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# file formats


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def save_series(prices: PriceSeries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRICE_COLUMNS)
        for t in range(len(prices)):
            writer.writerow([t + 1, _fmt(prices.pi_e[t]), _fmt(prices.pi_c[t]), _fmt(prices.rho[t]), _fmt(prices.pv_max[t])])


def load_series(path: str) -> PriceSeries:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PRICE_COLUMNS:
            raise ValueError(f"{path}: expected columns {PRICE_COLUMNS}, got {reader.fieldnames}")
        rows = sorted(reader, key=lambda r: int(r["t"]))
    if not rows:
        raise ValueError(f"{path}: empty price series")
    ts = [int(r["t"]) for r in rows]
    if ts != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: slot labels must be 1..T without gaps")
    return PriceSeries(
        pi_e=np.array([float(r["pi_e"]) for r in rows]),
        pi_c=np.array([float(r["pi_c"]) for r in rows]),
        rho=np.array([float(r["rho"]) for r in rows]),
        pv_max=np.array([float(r["pv_max"]) for r in rows]),
    )


def save_fleet(fleet: list[ChargingTask], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLEET_COLUMNS)
        for task in fleet:
            writer.writerow(
                [
                    task.id,
                    task.t_arrive,
                    task.t_depart,
                    _fmt(task.e_init),
                    _fmt(task.e_target),
                    _fmt(task.e_min),
                    _fmt(task.e_max),
                    _fmt(task.p_max),
                    _fmt(task.eta_c),
                ]
            )


def load_fleet(path: str) -> list[ChargingTask]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FLEET_COLUMNS:
            raise ValueError(f"{path}: expected columns {FLEET_COLUMNS}, got {reader.fieldnames}")
        fleet = [
            ChargingTask(
                id=int(r["id"]),
                t_arrive=int(r["t_arrive"]),
                t_depart=int(r["t_depart"]),
                e_init=float(r["e_init"]),
                e_target=float(r["e_target"]),
                e_min=float(r["e_min"]),
                e_max=float(r["e_max"]),
                p_max=float(r["p_max"]),
                eta_c=float(r["eta_c"]),
            )
            for r in reader
        ]
    if not fleet:
        raise ValueError(f"{path}: empty fleet")
    return fleet


_SCALAR_KEYS = {
    "n_slots": int,
    "dt_hours": float,
    "carbon_every": int,
    "v1": float,
    "v2": float,
    "alpha": float,
    "quota": float,
    "c_init": float,
    "m_b_max": float,
    "penalty_lambda": float,
    "h_update": str,
    "seed": int,
}


def save_scenario(sc: Scenario, out_dir: str, *, stem: str = "scenario") -> str:
    """Write <stem>.cfg plus the two CSVs into out_dir; returns the cfg path."""
    os.makedirs(out_dir, exist_ok=True)
    prices_csv = os.path.join(out_dir, f"{stem}_prices.csv")
    fleet_csv = os.path.join(out_dir, f"{stem}_fleet.csv")
    save_series(sc.prices, prices_csv)
    save_fleet(sc.fleet, fleet_csv)
    cfg_path = os.path.join(out_dir, f"{stem}.cfg")
    with open(cfg_path, "w") as fh:
        fh.write(f"n_slots = {sc.grid.n_slots}\n")
        fh.write(f"dt_hours = {_fmt(sc.grid.dt_hours)}\n")
        fh.write(f"carbon_every = {sc.grid.carbon_every}\n")
        fh.write(f"v1 = {_fmt(sc.v1)}\n")
        if sc.v2 is not None:
            fh.write(f"v2 = {_fmt(sc.v2)}\n")
        fh.write(f"alpha = {_fmt(sc.alpha)}\n")
        fh.write(f"quota = {_fmt(sc.quota)}\n")
        fh.write(f"c_init = {_fmt(sc.c_init)}\n")
        fh.write(f"m_b_max = {_fmt(sc.m_b_max)}\n")
        if sc.penalty_lambda is not None:
            fh.write(f"penalty_lambda = {_fmt(sc.penalty_lambda)}\n")
        fh.write(f"h_update = {sc.h_update}\n")
        fh.write(f"seed = {sc.seed}\n")
        fh.write(f"prices_csv = {os.path.basename(prices_csv)}\n")
        fh.write(f"fleet_csv = {os.path.basename(fleet_csv)}\n")
    return cfg_path


def load_scenario(cfg_path: str) -> Scenario:
    raw: dict[str, str] = {}
    with open(cfg_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{cfg_path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    for required in ("n_slots", "dt_hours", "carbon_every", "prices_csv", "fleet_csv"):
        if required not in raw:
            raise ValueError(f"{cfg_path}: missing required key {required!r}")
    base = os.path.dirname(os.path.abspath(cfg_path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    grid = TimeGrid(n_slots=int(raw["n_slots"]), dt_hours=float(raw["dt_hours"]), carbon_every=int(raw["carbon_every"]))
    prices = load_series(resolve(raw["prices_csv"]))
    fleet = load_fleet(resolve(raw["fleet_csv"]))
    kwargs = {}
    for key, cast in _SCALAR_KEYS.items():
        if key in ("n_slots", "dt_hours", "carbon_every"):
            continue
        if key in raw:
            kwargs[key] = cast(raw[key])
    unknown = set(raw) - set(_SCALAR_KEYS) - {"prices_csv", "fleet_csv"}
    if unknown:
        raise ValueError(f"{cfg_path}: unknown keys {sorted(unknown)}")
    return Scenario(grid=grid, prices=prices, fleet=fleet, **kwargs)


def with_overrides(sc: Scenario, **kwargs) -> Scenario:
    """Scenario copy with scalar overrides (grid changes rebuild the calendar)."""
    grid_keys = {k: kwargs.pop(k) for k in ("carbon_every",) if k in kwargs}
    sc2 = replace(sc, **kwargs) if kwargs else replace(sc)
    if grid_keys:
        sc2.grid = TimeGrid(n_slots=sc.grid.n_slots, dt_hours=sc.grid.dt_hours, **grid_keys)
        sc2.validate()
    return sc2
