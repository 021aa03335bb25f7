"""Dense-simplex checks against an independent vertex-enumeration oracle.

The oracle walks every choice of n active constraints (rows and box faces),
solves the square system, filters feasible points, and takes the best
objective. On a compact feasible region this is exact, which makes it a
fair second route for small instances.
"""

import itertools

import numpy as np
import pytest

from evflex.lpsolve import LinearProgram, solve_lp

TOL = 1e-7


def vertex_oracle(lp: LinearProgram, tol: float = 1e-9):
    """(status, objective) by brute force; needs finite bounds."""
    n = lp.c.size
    planes = []  # (normal, rhs) candidates for active sets
    for i in range(lp.a.shape[0]):
        planes.append((lp.a[i], lp.b[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        planes.append((e, lp.lb[j]))
        planes.append((e, lp.ub[j]))

    def feasible(x):
        if np.any(x < lp.lb - tol) or np.any(x > lp.ub + tol):
            return False
        r = lp.a @ x
        for i, s in enumerate(lp.senses):
            if s == "<" and r[i] > lp.b[i] + tol:
                return False
            if s == ">" and r[i] < lp.b[i] - tol:
                return False
            if s == "=" and abs(r[i] - lp.b[i]) > tol:
                return False
        return True

    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        g = np.array([planes[k][0] for k in combo])
        h = np.array([planes[k][1] for k in combo])
        if abs(np.linalg.det(g)) < 1e-10:
            continue
        x = np.linalg.solve(g, h)
        if feasible(x):
            val = float(lp.c @ x)
            if best is None or val < best:
                best = val
    if best is None:
        return "infeasible", None
    return "optimal", best


def random_lp(rng):
    n = int(rng.integers(2, 4))
    m = int(rng.integers(1, 4))
    a = rng.normal(size=(m, n))
    b = rng.normal(loc=0.5, size=m)
    senses = [rng.choice(["<", ">"]) for _ in range(m)]
    ub = rng.uniform(0.5, 3.0, size=n)
    c = rng.normal(size=n)
    return LinearProgram(c=c, a=a, senses=list(senses), b=b, lb=np.zeros(n), ub=ub)


def test_matches_vertex_enumeration_on_random_boxes():
    rng = np.random.default_rng(42)
    solved = 0
    for k in range(20):
        lp = random_lp(rng)
        status, best = vertex_oracle(lp)
        res = solve_lp(lp)
        assert res.status == status, f"instance {k}: {res.status} vs oracle {status}"
        if status == "optimal":
            assert abs(res.objective - best) <= TOL, f"instance {k}: {res.objective} vs {best}"
            solved += 1
    assert solved >= 10  # the draw should not degenerate into all-infeasible


def test_equality_rows():
    # min x + y  s.t.  x + y = 1, x - y <= 0.4, 0 <= x,y <= 1
    lp = LinearProgram(
        c=[1.0, 1.0],
        a=[[1.0, 1.0], [1.0, -1.0]],
        senses=["=", "<"],
        b=[1.0, 0.4],
        ub=[1.0, 1.0],
    )
    res = solve_lp(lp)
    status, best = vertex_oracle(lp)
    assert res.status == "optimal" == status
    assert abs(res.objective - 1.0) <= TOL
    assert abs(best - 1.0) <= TOL
    assert abs(res.x.sum() - 1.0) <= TOL


def test_infeasible_rows_detected():
    lp = LinearProgram(
        c=[1.0],
        a=[[1.0], [1.0]],
        senses=[">", "<"],
        b=[2.0, 1.0],
        ub=[5.0],
    )
    res = solve_lp(lp)
    assert res.status == "infeasible"
    assert vertex_oracle(lp)[0] == "infeasible"


def test_unbounded_direction():
    lp = LinearProgram(c=[-1.0, 0.0], a=[[0.0, 1.0]], senses=["<"], b=[1.0])
    res = solve_lp(lp)
    assert res.status == "unbounded"


def test_degenerate_vertex_terminates():
    # three redundant constraints through the optimum; Bland's rule must not cycle
    lp = LinearProgram(
        c=[-1.0, -1.0],
        a=[[1.0, 1.0], [2.0, 2.0], [1.0, 0.0]],
        senses=["<", "<", "<"],
        b=[1.0, 2.0, 1.0],
        ub=[2.0, 2.0],
    )
    res = solve_lp(lp)
    assert res.status == "optimal"
    assert abs(res.objective - (-1.0)) <= TOL


def test_bounds_only_problem():
    lp = LinearProgram(c=[2.0, -3.0], a=np.zeros((1, 2)), senses=["<"], b=[1.0], lb=[0.5, 0.0], ub=[1.0, 2.0])
    res = solve_lp(lp)
    assert res.status == "optimal"
    assert abs(res.objective - (2.0 * 0.5 - 3.0 * 2.0)) <= TOL


def test_shape_validation():
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0, 2.0], a=[[1.0]], senses=["<"], b=[1.0])
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0], a=[[1.0]], senses=["?"], b=[1.0])
