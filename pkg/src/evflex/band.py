"""Per-slot flexibility band: closed-form minimizer of the drift-plus-penalty
objective for the aggregation stage.

Each slot minimizes, over 0 <= x <= x_max per group,

    sum_g [ -(v1 * pi + q_hat_g) * x_hat_g + (v1 * pi - q_check_g) * x_check_g ]

where pi is the carbon-adjusted energy price. The objective is separable and
linear, so each bound sits at a box corner decided by its coefficient sign.
The slot's flexibility value is F_t = pi * (p_hat - p_check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fleet import ArrivalDemand, GroupState

BAND_TOL = 1e-9


@dataclass
class FlexibilityBand:
    """Group bounds (kW), their aggregates, and the slot flexibility value."""

    x_hat: np.ndarray
    x_check: np.ndarray
    p_hat: float
    p_check: float
    f_value: float

    def check(self, caps: np.ndarray, price: float) -> None:
        if np.any(self.x_check < -BAND_TOL) or np.any(self.x_hat - self.x_check < -BAND_TOL):
            raise AssertionError("band ordering violated")
        if np.any(self.x_hat - caps > BAND_TOL):
            raise AssertionError("band exceeds group capacity")
        if abs(self.p_hat - self.x_hat.sum()) > 1e-6 or abs(self.p_check - self.x_check.sum()) > 1e-6:
            raise AssertionError("aggregate/band mismatch")
        if abs(self.f_value - price * (self.p_hat - self.p_check)) > 1e-6:
            raise AssertionError("flexibility value mismatch")


@dataclass(frozen=True)
class DriftConstants:
    a1: float
    v1: float

    @property
    def bound(self) -> float:
        return self.a1 / self.v1


def solve_stage1(state: GroupState, price: float, v1: float, caps: np.ndarray) -> FlexibilityBand:
    """Exact per-group corner solution for the slot's band.

    x_hat goes to the cap whenever v1 * price + q_hat > 0 (zero coefficient
    ties break to 0, claiming no flexibility when it is worthless); x_check
    goes to the cap whenever v1 * price - q_check < 0. The x_hat >= x_check
    repair only ever fires in the degenerate corner price = 0, q_hat = 0,
    q_check > 0.
    """
    caps = np.asarray(caps, dtype=float)
    if np.any(caps < 0):
        raise ValueError("negative group capacity")
    x_hat = np.where(v1 * price + state.q_hat > 0, caps, 0.0)
    x_check = np.where(v1 * price - state.q_check < 0, caps, 0.0)
    x_hat = np.maximum(x_hat, x_check)
    p_hat = float(x_hat.sum())
    p_check = float(x_check.sum())
    band = FlexibilityBand(
        x_hat=x_hat,
        x_check=x_check,
        p_hat=p_hat,
        p_check=p_check,
        f_value=price * (p_hat - p_check),
    )
    band.check(caps, price)
    return band


def flexibility_value(f_values: np.ndarray) -> tuple[float, float]:
    """Total and time-average flexibility value over a horizon."""
    f = np.asarray(f_values, dtype=float)
    if f.size == 0:
        raise ValueError("empty horizon")
    return float(f.sum()), float(f.mean())


def drift_constants(caps_matrix: np.ndarray, arrivals: ArrivalDemand, v1: float) -> DriftConstants:
    """Slot-drift constant from the realized capacity and arrival maxima.

    Both bounds share the box [0, x_{g,max}], so the service maxima coincide;
    the arrival maxima are taken over the realized horizon.
    """
    x_max = caps_matrix.max(axis=1)
    a1 = 0.5 * float(np.sum(x_max**2 + arrivals.a_hat_max**2)) + 0.5 * float(
        np.sum(x_max**2 + arrivals.a_check_max**2)
    )
    return DriftConstants(a1=a1, v1=v1)


def prop2_gap(
    online_value: float,
    offline_value: float,
    constants: DriftConstants,
    tol: float = 1e-6,
) -> tuple[float, float, bool]:
    """Optimality-gap check for time-average flexibility values.

    Returns (offline - online, a1 / v1, within-bounds?). The gap of the exact
    offline optimum lies in [0, a1 / v1]; tol absorbs solver noise and the
    finite-horizon residual.
    """
    gap = offline_value - online_value
    bound = constants.bound
    return gap, bound, (-tol <= gap <= bound + tol)
