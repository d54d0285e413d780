"""Bounded-variable revised simplex (primal and dual) with product-form updates.

Every row gets a logical variable ``s = a.x`` so the working system is
``[A  -I] z = 0`` with bounds on all of ``z``.  The basis inverse is a sparse
LU of the basis matrix followed by a file of eta columns, refactored every
``refactor_every`` pivots.  Rows and columns are scaled before solving and
solutions are reported in the original units.
"""

from __future__ import annotations

import logging
import math
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import (FEAS_TOL, OPT_TOL, EQ, GE, LE, DeadlineReached, LpProblem, LpSolution,
                      NumericalInstability)

logger = logging.getLogger(__name__)

AT_LO, AT_HI, FREE, BASIC = 0, 1, 2, 3
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12


def row_bounds(sense, rhs):
    sense = np.asarray(sense)
    rhs = np.asarray(rhs, dtype=float)
    lo = np.where(sense == LE, -np.inf, rhs)
    hi = np.where(sense == GE, np.inf, rhs)
    return lo, hi


def scale_factors(A: sp.spmatrix, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean row/column scaling followed by row equilibration."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    m, n = A.shape
    R = np.ones(m)
    S = np.ones(n)
    keep = A.data != 0
    if not keep.any():
        return R, S
    rows = np.repeat(np.arange(m), np.diff(A.indptr))[keep]
    cols = A.indices[keep]
    absv = np.abs(A.data[keep])
    # entries are already in row order; a stable sort gives column order
    by_col = np.argsort(cols, kind="stable")
    r_starts, r_ids = _segments(rows)
    c_starts, c_ids = _segments(cols[by_col])
    for _ in range(passes):
        v = absv * R[rows] * S[cols]
        R[r_ids] /= np.sqrt(np.maximum.reduceat(v, r_starts) * np.minimum.reduceat(v, r_starts))
        v = (absv * R[rows] * S[cols])[by_col]
        S[c_ids] /= np.sqrt(np.maximum.reduceat(v, c_starts) * np.minimum.reduceat(v, c_starts))
    v = absv * R[rows] * S[cols]
    R[r_ids] /= np.maximum.reduceat(v, r_starts)
    # powers of two keep the scaling exact in floating point
    R = np.exp2(np.round(np.log2(R)))
    S = np.exp2(np.round(np.log2(S)))
    return R, S


def _segments(sorted_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and ids of the runs in an already sorted id array."""
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    return starts, sorted_ids[starts]


class Basis:
    """Snapshot of a simplex basis usable as a warm start."""

    __slots__ = ("head", "status")

    def __init__(self, head: np.ndarray, status: np.ndarray):
        self.head = head
        self.status = status


class Simplex:
    """Revised simplex on ``max c.x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub``.

    Internally the problem is ``min cost.z`` over structurals and logicals.
    The same instance can be re-solved with new structural bounds, starting
    from any previously returned :class:`Basis`.
    """

    def __init__(self, c, A, row_lo, row_hi, lb, ub, scale: bool = True,
                 refactor_every: int = 64, bland_after: int = 60, max_iter: int | None = None):
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        if scale:
            self.R, self.S = scale_factors(A)
        else:
            self.R, self.S = np.ones(m), np.ones(n)
        As = A.multiply(self.R[:, None]).multiply(self.S[None, :]).tocsc()
        self.K = sp.hstack([As, -sp.identity(m, format="csc")], format="csc")
        self.KT = self.K.T.tocsr()
        self.c = np.asarray(c, dtype=float)
        self.cost = np.concatenate([-self.c * self.S, np.zeros(m)])
        self.row_lo = np.asarray(row_lo, dtype=float) * self.R
        self.row_hi = np.asarray(row_hi, dtype=float) * self.R
        self.lo = np.empty(n + m)
        self.hi = np.empty(n + m)
        self.lo[n:] = self.row_lo
        self.hi[n:] = self.row_hi
        self.set_bounds(lb, ub)
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n)
        self.iterations = 0
        self._solve_start = 0
        self.deadline = math.inf  # time.monotonic() value after which solves abort
        self.x = np.zeros(n + m)
        self.head = np.arange(n, n + m)
        self.status = np.full(n + m, AT_LO, dtype=np.int8)
        self._lu = None
        self._etas: list[tuple[int, np.ndarray]] = []
        self._slack_basis()

    # -- bounds and basis state ------------------------------------------

    def set_bounds(self, lb, ub) -> None:
        n = self.n
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        with np.errstate(invalid="ignore"):
            self.lo[:n] = lb / self.S
            self.hi[:n] = ub / self.S

    def _nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == AT_LO:
            return self.lo[j]
        if s == AT_HI:
            return self.hi[j]
        return 0.0

    def _default_status(self, j: int) -> int:
        if math.isfinite(self.lo[j]):
            return AT_LO
        if math.isfinite(self.hi[j]):
            return AT_HI
        return FREE

    def _slack_basis(self) -> None:
        n, m = self.n, self.m
        self.head = np.arange(n, n + m)
        self.status = np.empty(n + m, dtype=np.int8)
        for j in range(n):
            self.status[j] = self._default_status(j)
        self.status[n:] = BASIC
        self._factor()

    def basis(self) -> Basis:
        return Basis(self.head.copy(), self.status.copy())

    def load_basis(self, basis: Basis) -> None:
        self.head = basis.head.copy()
        self.status = basis.status.copy()
        self._factor()

    def _sync_nonbasic(self) -> None:
        """Put nonbasic variables on valid bounds after a bound change."""
        nb = np.flatnonzero(self.status != BASIC)
        lo, hi = self.lo[nb], self.hi[nb]
        st = self.status[nb]
        st = np.where((st == AT_LO) & ~np.isfinite(lo), np.where(np.isfinite(hi), AT_HI, FREE), st)
        st = np.where((st == AT_HI) & ~np.isfinite(hi), np.where(np.isfinite(lo), AT_LO, FREE), st)
        st = np.where((st == FREE) & np.isfinite(lo), AT_LO, st)
        st = np.where((st == FREE) & np.isfinite(hi), AT_HI, st)
        self.status[nb] = st
        vals = np.where(st == AT_LO, lo, np.where(st == AT_HI, hi, 0.0))
        self.x[nb] = vals

    # -- factorization ----------------------------------------------------

    def _factor(self) -> None:
        B = self.K[:, self.head]
        try:
            self._lu = spla.splu(B.tocsc(), permc_spec="COLAMD",
                                 options=dict(SymmetricMode=False))
        except RuntimeError:
            self._repair_basis()
            B = self.K[:, self.head]
            self._lu = spla.splu(B.tocsc(), permc_spec="COLAMD")
        self._etas = []
        self._sync_nonbasic()
        self._recompute_xb()

    def _repair_basis(self) -> None:
        """Swap dependent basic columns for logicals (dense, rare)."""
        n, m = self.n, self.m
        B = self.K[:, self.head].toarray()
        _, Rq, piv = sla.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(Rq))
        rank = int(np.sum(diag > 1e-9 * max(diag.max(initial=0.0), 1.0)))
        keep = np.sort(piv[:rank])
        Q, _ = np.linalg.qr(B[:, keep]) if rank else (np.zeros((m, 0)), None)
        resid = np.eye(m) - Q @ Q.T
        _, _, rpiv = sla.qr(resid, pivoting=True, mode="economic")
        new_rows = rpiv[: m - rank]
        dropped = [self.head[k] for k in range(m) if k not in set(keep.tolist())]
        for j in dropped:
            self.status[j] = self._default_status(j)
        head = [self.head[k] for k in keep] + [n + i for i in new_rows]
        for j in head:
            self.status[j] = BASIC
        self.head = np.array(head, dtype=np.int64)
        logger.debug("basis repair replaced %d columns", len(dropped))

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        w = self._lu.solve(v)
        for r, a in self._etas:
            wr = w[r] / a[r]
            if wr != 0.0:
                w -= a * wr
            w[r] = wr
        return w

    def _btran(self, v: np.ndarray) -> np.ndarray:
        v = v.astype(float, copy=True)
        for r, a in reversed(self._etas):
            v[r] = (v[r] - (a @ v - a[r] * v[r])) / a[r]
        return self._lu.solve(v, trans="T")

    def _recompute_xb(self) -> None:
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = self._ftran(-(self.K @ xn))

    def _column(self, q: int) -> np.ndarray:
        col = np.zeros(self.m)
        s, e = self.K.indptr[q], self.K.indptr[q + 1]
        col[self.K.indices[s:e]] = self.K.data[s:e]
        return col

    def _pivot(self, r: int, q: int, alpha: np.ndarray) -> None:
        self.head[r] = q
        self.status[q] = BASIC
        self._etas.append((r, alpha))
        if len(self._etas) >= self.refactor_every:
            self._factor()

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations % 16 == 0 and time.monotonic() > self.deadline:
            raise DeadlineReached("time limit reached inside the simplex")
        if self.iterations - self._solve_start > self.max_iter:
            raise NumericalInstability(
                f"simplex exceeded {self.max_iter} iterations (pivoting stalled)")

    def _reduced_costs(self, cb=None, cost=None) -> np.ndarray:
        if cb is None:
            cb = self.cost[self.head]
        if cost is None:
            cost = self.cost
        y = self._btran(cb)
        d = cost - self.KT @ y
        d[self.head] = 0.0
        return d

    # -- primal simplex ---------------------------------------------------

    def _primal(self) -> str:
        tol = FEAS_TOL
        degenerate = 0
        bland = False
        zero = np.zeros(self.n + self.m)
        while True:
            self._tick()
            head = self.head
            xb = self.x[head]
            lob, hib = self.lo[head], self.hi[head]
            below = xb < lob - tol
            above = xb > hib + tol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                d = self._reduced_costs(cb, zero)
            else:
                d = self._reduced_costs()
            st = self.status
            fixed = self.lo == self.hi
            inc = ((st == AT_LO) & (d < -OPT_TOL) & ~fixed) | ((st == FREE) & (d < -OPT_TOL))
            dec = ((st == AT_HI) & (d > OPT_TOL) & ~fixed) | ((st == FREE) & (d > OPT_TOL))
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return "infeasible" if phase1 else "optimal"
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if inc[q] else -1.0
            alpha = self._ftran(self._column(q))
            g = -direction * alpha  # rate of change of basics per unit step
            lim_lo = np.where(below, -np.inf, lob)
            lim_hi = np.where(above, np.inf, np.where(below, lob, hib))
            lim_lo = np.where(above, hib, lim_lo)
            r, theta, hit_up = self._primal_ratio(xb, g, lim_lo, lim_hi, bland)
            span = self.hi[q] - self.lo[q]
            if r < 0 or span <= theta:
                if not math.isfinite(span):
                    if phase1:
                        raise NumericalInstability("phase 1 ray without a blocking row")
                    return "unbounded"
                # bound flip, no basis change
                theta = span
                self.x[head] += g * theta
                self.status[q] = AT_HI if direction > 0 else AT_LO
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                degenerate = 0
                bland = False
                continue
            self.x[head] += g * theta
            self.x[q] += direction * theta
            leaving = int(head[r])
            hit = lim_hi[r] if hit_up else lim_lo[r]
            self.status[leaving] = AT_LO if hit == self.lo[leaving] else AT_HI
            self.x[leaving] = hit
            if theta < DEGENERATE_STEP:
                degenerate += 1
                if degenerate > self.bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self._pivot(r, q, alpha)

    def _primal_ratio(self, xb, g, lim_lo, lim_hi, bland):
        tol = FEAS_TOL
        down = g < -PIVOT_TOL
        up = g > PIVOT_TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(down, xb - lim_lo, np.where(up, lim_hi - xb, np.inf))
            rate = np.abs(g)
            ok = (down | up) & np.isfinite(dist)
            if not ok.any():
                return -1, math.inf, False
            dist = np.maximum(dist, 0.0)
            ratio = np.where(ok, dist / rate, np.inf)
            if bland:
                tmin = ratio.min()
                ties = np.flatnonzero(ratio <= tmin + 1e-12)
                r = int(ties[np.argmin(self.head[ties])])
            else:
                harris = np.where(ok, (dist + tol) / rate, np.inf)
                tmax = harris.min()
                elig = np.flatnonzero(ratio <= tmax)
                r = int(elig[np.argmax(rate[elig])])
        return r, float(ratio[r]), bool(up[r])

    # -- dual simplex ------------------------------------------------------

    def _make_dual_feasible(self, d: np.ndarray) -> bool:
        """Flip boxed nonbasics to the bound matching their reduced cost."""
        st = self.status
        flip_up = (st == AT_LO) & (d < -OPT_TOL)
        flip_dn = (st == AT_HI) & (d > OPT_TOL)
        bad = (st == FREE) & (np.abs(d) > OPT_TOL)
        if (flip_up & ~np.isfinite(self.hi)).any() or (flip_dn & ~np.isfinite(self.lo)).any() \
                or bad.any():
            return False
        if flip_up.any() or flip_dn.any():
            self.status[flip_up] = AT_HI
            self.status[flip_dn] = AT_LO
            self.x[flip_up] = self.hi[flip_up]
            self.x[flip_dn] = self.lo[flip_dn]
            self._recompute_xb()
        return True

    def _dual(self, d: np.ndarray) -> str:
        tol = FEAS_TOL
        degenerate = 0
        bland = False
        since_refresh = 0
        while True:
            self._tick()
            head = self.head
            xb = self.x[head]
            lob, hib = self.lo[head], self.hi[head]
            below = lob - xb
            above = xb - hib
            infeas = np.maximum(below, above)
            bad = np.flatnonzero(infeas > tol)
            if bad.size == 0:
                return "optimal"
            if bland:
                r = int(bad[np.argmin(head[bad])])
            else:
                r = int(bad[np.argmax(infeas[bad])])
            p = int(head[r])
            going_up = below[r] > tol
            target = self.lo[p] if going_up else self.hi[p]
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self._btran(e)
            arow = self.KT @ rho
            st = self.status
            nonbasic = st != BASIC
            fixed = self.lo == self.hi
            if going_up:
                elig = nonbasic & ~fixed & (((st == AT_LO) & (arow < -PIVOT_TOL))
                                            | ((st == AT_HI) & (arow > PIVOT_TOL))
                                            | ((st == FREE) & (np.abs(arow) > PIVOT_TOL)))
            else:
                elig = nonbasic & ~fixed & (((st == AT_LO) & (arow > PIVOT_TOL))
                                            | ((st == AT_HI) & (arow < -PIVOT_TOL))
                                            | ((st == FREE) & (np.abs(arow) > PIVOT_TOL)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "infeasible"
            dj = d[cand]
            aj = np.abs(arow[cand])
            slack = np.where(st[cand] == AT_HI, -dj, np.where(st[cand] == FREE, np.abs(dj), dj))
            slack = np.maximum(slack, 0.0)
            ratio = slack / aj
            if bland:
                tmin = ratio.min()
                ties = cand[ratio <= tmin + 1e-12]
                q = int(ties.min())
            else:
                tmax = ((slack + OPT_TOL) / aj).min()
                pick = np.flatnonzero(ratio <= tmax)
                q = int(cand[pick[np.argmax(aj[pick])]])
            alpha = self._ftran(self._column(q))
            if abs(alpha[r]) < PIVOT_TOL:
                # row and column disagree: refresh the factorization and retry
                self._factor()
                d = self._reduced_costs()
                since_refresh = 0
                continue
            theta_d = d[q] / arow[q]
            t = (self.x[p] - target) / alpha[r]
            self.x[head] -= alpha * t
            self.x[q] += t
            self.x[p] = target
            self.status[p] = AT_LO if going_up else AT_HI
            if self.lo[p] == self.hi[p]:
                self.status[p] = AT_LO
            d -= theta_d * arow
            d[q] = 0.0
            if abs(theta_d) < DEGENERATE_STEP:
                degenerate += 1
                if degenerate > self.bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False
            n_etas = len(self._etas)
            self._pivot(r, q, alpha)
            since_refresh += 1
            if len(self._etas) < n_etas or since_refresh >= self.refactor_every:
                d = self._reduced_costs()
                since_refresh = 0

    # -- driver -----------------------------------------------------------

    def solve(self, basis: Basis | None = None) -> LpSolution:
        """Optimize from ``basis``, or from the current basis when ``None``."""
        start_iter = self._solve_start = self.iterations
        if basis is not None:
            self.head = basis.head.copy()
            self.status = basis.status.copy()
            self._factor()
        else:
            self._sync_nonbasic()
            self._recompute_xb()
        d = self._reduced_costs()
        if self._make_dual_feasible(d):
            status = self._dual(d)
            if status == "infeasible":
                return self._result("infeasible", start_iter)
        status = self._primal()
        if status != "optimal":
            return self._result(status, start_iter)
        # clean up drift from the product-form updates
        self._factor()
        status = self._primal()
        return self._result(status, start_iter)

    def _result(self, status: str, start_iter: int) -> LpSolution:
        its = self.iterations - start_iter
        if status != "optimal":
            return LpSolution(status=status, iterations=its, basis=self.basis())
        n = self.n
        x = self.x[:n] * self.S
        ys = self._btran(self.cost[self.head])
        y = -(ys * self.R)  # duals of the maximization
        return LpSolution(status="optimal", objective=float(self.c @ x), x=x, duals=y,
                          reduced_costs=None, iterations=its, basis=self.basis())


def solve_lp(problem: LpProblem, basis: Basis | None = None, **kwargs) -> LpSolution:
    """Solve the continuous relaxation of ``problem`` (integrality ignored)."""
    c, A, sense, rhs, lb, ub, _ = problem.arrays()
    lo, hi = row_bounds(sense, rhs)
    solver = Simplex(c, A, lo, hi, lb, ub, **kwargs)
    sol = solver.solve(basis)
    if sol.optimal:
        sol.reduced_costs = c - A.T @ sol.duals
    return sol


def dual_bound(problem: LpProblem, y: np.ndarray, tol: float = 1e-12) -> float:
    """Upper bound on the maximum implied by row multipliers ``y`` (weak duality).

    Multipliers and reduced costs below ``tol`` in magnitude count as zero, so
    roundoff of the wrong sign does not turn the bound infinite.
    """
    c, A, sense, rhs, lb, ub, _ = problem.arrays()
    lo, hi = row_bounds(sense, rhs)
    y = np.where(np.abs(y) <= tol, 0.0, y)
    d = c - A.T @ y
    d = np.where(np.abs(d) <= tol, 0.0, d)
    total = 0.0
    for yi, l, h in zip(y, lo, hi):
        if yi > 0:
            total += yi * h if math.isfinite(h) else math.inf
        elif yi < 0:
            total += yi * l if math.isfinite(l) else math.inf
    for dj, l, u in zip(d, lb, ub):
        if dj > 0:
            total += dj * u if math.isfinite(u) else math.inf
        elif dj < 0:
            total += dj * l if math.isfinite(l) else math.inf
    return float(total)
