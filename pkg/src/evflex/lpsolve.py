"""Dense linear-program solver: two-phase simplex with Bland's rule.

Solves   min c'x   s.t.   A x (<= | = | >=) b,   lb <= x <= ub

with bounded variables handled inside the ratio test (no bound rows), which keeps
the offline benchmark LPs at a few hundred rows even when every variable is boxed.
Bland's smallest-index rule is always on, so the method cannot cycle; the price is
more pivots, which is acceptable at desk scale (up to ~2000 columns / ~500 rows).
No sparsity, no warm starts, no presolve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-7


@dataclass
class LinearProgram:
    """min c'x s.t. a x (sense) b, lb <= x <= ub. Senses are '<', '=', '>'."""

    c: np.ndarray
    a: np.ndarray
    senses: list[str]
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        n = self.c.size
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.a.shape != (self.b.size, n):
            raise ValueError(f"matrix shape {self.a.shape} does not match c ({n}) and b ({self.b.size})")
        if len(self.senses) != self.b.size:
            raise ValueError("one sense per row required")
        for s in self.senses:
            if s not in ("<", "=", ">"):
                raise ValueError(f"unknown row sense {s!r}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("c, a, b must be finite")
        if np.any(self.lb > self.ub + 1e-12):
            raise ValueError("lb > ub")


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float = np.nan
    iterations: int = 0
    extra: dict = field(default_factory=dict)


class _Simplex:
    """Bounded-variable tableau simplex on equality form A y = b, 0 <= y <= u."""

    def __init__(self, a: np.ndarray, b: np.ndarray, u: np.ndarray, tol: float):
        self.a = a
        self.b = b
        self.u = u
        self.tol = tol
        self.m, self.n = a.shape
        self.binv = np.eye(self.m)
        self.basis = np.arange(self.n - self.m, self.n)  # caller places identity columns last
        self.at_upper = np.zeros(self.n, dtype=bool)  # nonbasic-at-upper flags
        self.iterations = 0

    def _xb(self) -> np.ndarray:
        rhs = self.b.copy()
        up = np.flatnonzero(self.at_upper)
        if up.size:
            rhs = rhs - self.a[:, up] @ self.u[up]
        return self.binv @ rhs

    def solve(self, c: np.ndarray, max_iter: int) -> str:
        """Minimize c'y from the current basis. Returns 'optimal' or 'unbounded'."""
        for _ in range(max_iter):
            self.iterations += 1
            xb = self._xb()
            y = c[self.basis] @ self.binv  # simplex multipliers
            rc = c - y @ self.a
            rc[self.basis] = 0.0
            in_basis = np.zeros(self.n, dtype=bool)
            in_basis[self.basis] = True
            fixed = self.u < self.tol  # zero-range variables never enter
            # Improving directions: increase a var at lower bound with rc < 0,
            # or decrease a var at upper bound with rc > 0. Bland: lowest index.
            cand_lo = ~in_basis & ~self.at_upper & ~fixed & (rc < -self.tol)
            cand_up = ~in_basis & self.at_upper & (rc > self.tol)
            cand = np.flatnonzero(cand_lo | cand_up)
            if cand.size == 0:
                return "optimal"
            e = int(cand[0])
            decrease = self.at_upper[e]
            d = self.binv @ self.a[:, e]
            if decrease:
                d = -d
            # Ratio test: the entering variable moves by t >= 0 in its own direction.
            # Blockers: a basic var hits 0 (d > 0), a basic var hits its upper bound
            # (d < 0), or the entering variable reaches its own opposite bound.
            # blockers: (ratio, leaving var index, row or -1 for bound flip, to_upper)
            blockers: list[tuple[float, int, int, bool]] = []
            if np.isfinite(self.u[e]):
                blockers.append((self.u[e], e, -1, False))
            for i in range(self.m):
                if d[i] > self.tol:
                    blockers.append((max(xb[i], 0.0) / d[i], int(self.basis[i]), i, False))
                elif d[i] < -self.tol and np.isfinite(self.u[self.basis[i]]):
                    gap = max(self.u[self.basis[i]] - xb[i], 0.0)
                    blockers.append((gap / (-d[i]), int(self.basis[i]), i, True))
            if not blockers:
                return "unbounded"
            tmin = min(t for t, _, _, _ in blockers)
            # Bland tie-break: smallest leaving-variable index among minimal ratios.
            _, _, leave, leave_to_upper = min(
                (blk for blk in blockers if blk[0] <= tmin + self.tol), key=lambda blk: blk[1]
            )
            if leave == -1:
                # Bound flip: entering runs to its other bound, basis unchanged.
                self.at_upper[e] = not self.at_upper[e]
                continue
            lv = self.basis[leave]
            col = self.binv @ self.a[:, e]
            piv = col[leave]
            self.binv[leave] /= piv
            for i in range(self.m):
                if i != leave and abs(col[i]) > 0.0:
                    self.binv[i] -= col[i] * self.binv[leave]
            self.basis[leave] = e
            self.at_upper[e] = False
            self.at_upper[lv] = leave_to_upper and np.isfinite(self.u[lv])
        raise RuntimeError("simplex iteration limit exceeded")

    def values(self) -> np.ndarray:
        x = np.where(self.at_upper, np.where(np.isfinite(self.u), self.u, 0.0), 0.0)
        x[self.basis] = self._xb()
        return x


def solve_lp(lp: LinearProgram, tol: float = DEFAULT_TOL, max_iter: int = 50_000) -> LpResult:
    """Two-phase simplex. Returns status optimal/infeasible/unbounded."""
    n = lp.c.size
    m = lp.b.size
    # Shift lower bounds to zero: x = lb + y.
    lb = np.where(np.isfinite(lp.lb), lp.lb, 0.0)
    if np.any(~np.isfinite(lp.lb)):
        raise ValueError("free (unbounded-below) variables are not supported")
    u = lp.ub - lb
    b = lp.b - lp.a @ lb

    # Equality form: append one slack per inequality row.
    n_slack = sum(1 for s in lp.senses if s != "=")
    a_eq = np.zeros((m, n + n_slack))
    a_eq[:, :n] = lp.a
    u_eq = np.concatenate([u, np.full(n_slack, np.inf)])
    k = n
    slack_sign = {}
    for i, s in enumerate(lp.senses):
        if s == "<":
            a_eq[i, k] = 1.0
            slack_sign[i] = 1.0
            k += 1
        elif s == ">":
            a_eq[i, k] = -1.0
            slack_sign[i] = -1.0
            k += 1

    # Normalize rhs >= 0, then add one artificial per row (identity start basis).
    neg = b < 0
    a_eq[neg] *= -1.0
    b = np.where(neg, -b, b)
    a_full = np.hstack([a_eq, np.eye(m)])
    u_full = np.concatenate([u_eq, np.full(m, np.inf)])
    art = np.arange(n + n_slack, n + n_slack + m)

    sx = _Simplex(a_full, b, u_full, tol)
    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)

    # Phase 1: minimize the artificial mass.
    c1 = np.zeros(n + n_slack + m)
    c1[art] = 1.0
    status = sx.solve(c1, max_iter)
    if status != "optimal":  # phase 1 is always bounded below by 0
        raise RuntimeError("phase-1 simplex did not terminate at an optimum")
    if float(c1 @ sx.values()) > tol * scale:
        return LpResult(status="infeasible", iterations=sx.iterations)

    # Drive leftover artificials out of the basis (or drop redundant rows implicitly
    # by leaving the zero-valued artificial basic and pinning its bound to zero).
    xb = sx._xb()
    for i in range(m):
        bi = sx.basis[i]
        if bi >= art[0] and abs(xb[i]) <= tol * scale:
            row = sx.binv[i] @ sx.a
            for j in range(n + n_slack):
                if j not in sx.basis and abs(row[j]) > 1e3 * tol:
                    col = sx.binv @ sx.a[:, j]
                    piv = col[i]
                    sx.binv[i] /= piv
                    for r in range(sx.m):
                        if r != i and abs(col[r]) > 0.0:
                            sx.binv[r] -= col[r] * sx.binv[i]
                    sx.at_upper[j] = False
                    sx.basis[i] = j
                    break
    sx.u[art] = 0.0  # any artificial still basic sits at value 0 on a redundant row

    # Phase 2.
    c2 = np.zeros(n + n_slack + m)
    c2[:n] = lp.c
    status = sx.solve(c2, max_iter)
    if status == "unbounded":
        return LpResult(status="unbounded", iterations=sx.iterations)
    y = sx.values()
    if np.any(y[art] > tol * scale):
        return LpResult(status="infeasible", iterations=sx.iterations)
    x = lb + y[:n]
    return LpResult(status="optimal", x=x, objective=float(lp.c @ x), iterations=sx.iterations)
