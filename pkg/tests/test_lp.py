import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from wsbackhaul.lp.problem import (EQ, GE, LE, DeadlineReached, LpError, LpProblem,
                                   NumericalInstability)
from wsbackhaul.lp.simplex import Simplex, dual_bound, row_bounds, solve_lp


def textbook() -> LpProblem:
    lp = LpProblem("textbook")
    x = lp.add_var("x", obj=1.0)
    y = lp.add_var("y", obj=1.0)
    lp.add_row("cx", {x: 1.0}, LE, 1.0)
    lp.add_row("cy", {y: 1.0}, LE, 2.0)
    return lp


def random_lp(seed: int, m: int, n: int) -> LpProblem:
    """Bounded LP with a known interior point, mixing all three row senses."""
    rng = np.random.default_rng(seed)
    lp = LpProblem(f"rand{seed}")
    x0 = rng.uniform(0.5, 2.0, n)
    for j in range(n):
        lp.add_var(f"x{j}", lb=float(rng.choice([0.0, -1.0])), ub=float(rng.uniform(3, 10)),
                   obj=float(rng.normal()))
    for k in range(m):
        a = rng.normal(size=n) * (rng.random(n) < 0.6)
        act = float(a @ x0)
        sense = [LE, GE, EQ][k % 3] if k % 5 else LE
        rhs = act + (rng.uniform(0, 2) if sense == LE else -rng.uniform(0, 2) if sense == GE else 0)
        lp.add_row(f"r{k}", {j: float(a[j]) for j in range(n)}, sense, rhs)
    return lp


def scipy_optimum(lp: LpProblem) -> float:
    c, A, sense, rhs, lb, ub, _ = lp.arrays()
    A = A.toarray()
    res = linprog(-c, A_ub=np.vstack([A[sense == LE], -A[sense == GE]]),
                  b_ub=np.concatenate([rhs[sense == LE], -rhs[sense == GE]]),
                  A_eq=A[sense == EQ] if (sense == EQ).any() else None,
                  b_eq=rhs[sense == EQ] if (sense == EQ).any() else None,
                  bounds=list(zip(lb, ub)), method="highs")
    assert res.status == 0
    return -res.fun


def test_textbook_lp():
    sol = solve_lp(textbook())
    assert sol.optimal
    assert sol.objective == pytest.approx(3.0)
    np.testing.assert_allclose(sol.x, [1.0, 2.0])


def test_infeasible_lp():
    lp = LpProblem()
    x = lp.add_var("x", obj=1.0, lb=-10)
    lp.add_row("lo", {x: 1.0}, GE, 1.0)
    lp.add_row("hi", {x: 1.0}, LE, 0.0)
    assert solve_lp(lp).status == "infeasible"


def test_unbounded_lp():
    lp = LpProblem()
    x = lp.add_var("x", obj=1.0)
    y = lp.add_var("y")
    lp.add_row("r", {x: 1.0, y: -1.0}, LE, 1.0)
    assert solve_lp(lp).status == "unbounded"


def test_model_errors():
    lp = LpProblem()
    lp.add_var("x")
    with pytest.raises(LpError):
        lp.add_var("x")
    with pytest.raises(LpError):
        lp.add_var("y", lb=2, ub=1)
    with pytest.raises(LpError):
        lp.add_row("r", {5: 1.0}, LE, 0)
    with pytest.raises(LpError):
        lp.add_row("r", {0: 1.0}, "<", 0)


@pytest.mark.parametrize("seed", range(12))
def test_random_lps_match_reference(seed):
    lp = random_lp(seed, m=8 + seed, n=10)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(scipy_optimum(lp), rel=1e-7, abs=1e-7)
    assert lp.max_violation(sol.x) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(2, 12))
def test_weak_duality(seed, m, n):
    lp = random_lp(seed, m, n)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective <= dual_bound(lp, sol.duals) + 1e-6
    # optimal duals close the gap
    assert dual_bound(lp, sol.duals) == pytest.approx(sol.objective, rel=1e-6, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_deterministic(seed):
    lp = random_lp(seed, 10, 10)
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.iterations == b.iterations
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.basis.head, b.basis.head)


def test_warm_start_after_bound_change():
    lp = random_lp(3, 12, 10)
    c, A, sense, rhs, lb, ub, _ = lp.arrays()
    lo, hi = row_bounds(sense, rhs)
    s = Simplex(c, A, lo, hi, lb, ub)
    first = s.solve()
    ub2 = ub.copy()
    ub2[int(np.argmax(first.x))] = 0.5 * max(first.x.max(), 0.1)
    s.set_bounds(lb, ub2)
    warm = s.solve(first.basis)
    lp.ub = list(ub2)
    cold = solve_lp(lp)
    assert warm.status == cold.status
    if cold.optimal:
        assert warm.objective == pytest.approx(cold.objective, rel=1e-7, abs=1e-7)


def test_deadline_interrupts_solve():
    lp = random_lp(5, 60, 60)
    c, A, sense, rhs, lb, ub, _ = lp.arrays()
    lo, hi = row_bounds(sense, rhs)
    s = Simplex(c, A, lo, hi, lb, ub)
    s.deadline = time.monotonic() - 1.0
    with pytest.raises(DeadlineReached):
        s.solve()


def test_iteration_cap():
    lp = random_lp(5, 60, 60)
    with pytest.raises(NumericalInstability):
        solve_lp(lp, max_iter=1)
