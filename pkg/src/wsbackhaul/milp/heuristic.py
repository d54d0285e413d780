"""Schedule local search that seeds branch-and-bound with a strong incumbent.

With the binary schedule fixed, the program collapses to a small LP over the
powers and rates of the scheduled links.  The search moves between
half-duplex-feasible schedules (add, drop, move a link to another channel or
receiver) and scores each by that LP.  Max-min objectives are flat, so moves
can optionally be ranked by ``t + eps * sum(r_i)``; by default they are
scored on ``t`` alone, which tends to avoid schedules padded with
near-zero-power links.
"""

from __future__ import annotations

import logging
import math
import random
import time
from typing import Iterable, Optional

import numpy as np

from ..lp.problem import FEAS_TOL, NumericalInstability
from ..lp.simplex import Simplex, row_bounds
from .build import MilpProblem

logger = logging.getLogger(__name__)

Key = tuple[int, int, int]
TIE_WEIGHT = 0.0


class ScheduleEvaluator:
    """Solve the program restricted to a fixed schedule."""

    def __init__(self, prob: MilpProblem):
        self.prob = prob
        c, A, sense, rhs, lb, ub, _ = prob.lp.arrays()
        self.c, self.lb, self.ub = c, lb, ub
        self.A = A.tocsc()
        self.row_lo, self.row_hi = row_bounds(sense, rhs)
        self.base_cols = sorted(prob.ri.values()) + [prob.t]
        self.cache: dict[tuple[frozenset, float], tuple[float, Optional[np.ndarray]]] = {}
        self.evaluations = 0
        self.calls = 0

    def solve(self, schedule: Iterable[Key], tie_weight: float = TIE_WEIGHT):
        """(score, full solution vector) for the schedule; score is -inf if infeasible."""
        self.calls += 1
        S = frozenset(schedule)
        hit = self.cache.get((S, tie_weight))
        if hit is not None:
            return hit
        if not self.routes_all(S):
            res = (0.0, None)  # some tower is cut off from fiber, so t = 0
        else:
            res = self._solve(S, tie_weight)
        self.cache[(S, tie_weight)] = res
        return res

    def routes_all(self, S: frozenset) -> bool:
        """Whether every non-fiber tower reaches fiber over the scheduled links."""
        into: dict[int, list[int]] = {}
        for i, j, _ in S:
            into.setdefault(j, []).append(i)
        seen = set(self.prob.fiber)
        stack = list(seen)
        while stack:
            for i in into.get(stack.pop(), ()):
                if i not in seen:
                    seen.add(i)
                    stack.append(i)
        return all(i in seen for i in self.prob.non_fiber)

    def _solve(self, S: frozenset, tie_weight: float):
        prob = self.prob
        self.evaluations += 1
        keys = sorted(S)
        xcols = [prob.x[k] for k in keys]
        cols = [v for k in keys for v in (prob.p[k], prob.r[k])] + self.base_cols
        shift = np.asarray(self.A[:, xcols].sum(axis=1)).ravel() if xcols else 0.0
        lo = self.row_lo - shift
        hi = self.row_hi - shift
        sub = self.A[:, cols].tocsr()
        nnz = np.diff(sub.indptr)
        empty = nnz == 0
        if np.any(lo[empty] > FEAS_TOL) or np.any(hi[empty] < -FEAS_TOL):
            return -math.inf, None
        # rows that hold for every point within the variable bounds are dropped
        lbs, ubs = self.lb[cols], self.ub[cols]
        coo = sub.tocoo()
        a = coo.data
        with np.errstate(invalid="ignore"):
            top = np.where(a > 0, a * ubs[coo.col], a * lbs[coo.col])
            bot = np.where(a > 0, a * lbs[coo.col], a * ubs[coo.col])
        top = np.nan_to_num(top, nan=np.inf, posinf=np.inf, neginf=-np.inf)
        bot = np.nan_to_num(bot, nan=-np.inf, posinf=np.inf, neginf=-np.inf)
        act_hi = np.zeros(len(lo))
        act_lo = np.zeros(len(lo))
        np.add.at(act_hi, coo.row, top)
        np.add.at(act_lo, coo.row, bot)
        implied = (act_hi <= hi) & (act_lo >= lo)
        keep = ~empty & ~implied
        sub = sub[keep]
        c = self.c[cols].copy()
        n_ri = len(prob.ri)
        c[len(cols) - 1 - n_ri:len(cols) - 1] += tie_weight
        try:
            sol = Simplex(c, sub, lo[keep], hi[keep], self.lb[cols], self.ub[cols]).solve()
        except NumericalInstability:
            return -math.inf, None
        if not sol.optimal:
            return -math.inf, None
        x = np.zeros(prob.lp.n_vars)
        x[cols] = sol.x
        x[xcols] = 1.0
        return float(sol.objective), x


def _feasible_add(S: set, key: Key) -> bool:
    i, j, m = key
    for (a, b, n) in S:
        if n == m and (a in (i, j) or b in (i, j)):
            return False
    return True


def tree_schedule(prob: MilpProblem) -> frozenset:
    """Shortest-hop routing tree toward fiber with greedy channel choice.

    Each non-fiber tower forwards to the neighbour one hop closer to fiber
    with the best full-power capacity; links are then given the strongest
    channel not yet used, so no two tree links share a channel when enough
    channels exist.
    """
    best_v: dict[tuple[int, int], float] = {}
    for (i, j, m), v in prob.V.items():
        best_v[(i, j)] = max(best_v.get((i, j), 0.0), v)
    level = {f: 0 for f in prob.fiber}
    frontier = sorted(prob.fiber)
    while frontier:
        nxt = []
        for (i, j) in sorted(best_v):
            if j in frontier and i not in level:
                level[i] = level[j] + 1
                nxt.append(i)
        frontier = sorted(set(nxt))
    tree = []
    for i in sorted(prob.non_fiber, key=lambda i: (level.get(i, math.inf), i)):
        if i not in level:
            continue
        hops = [(best_v[(i, j)], -j, j) for (a, j) in best_v if a == i and level.get(j) == level[i] - 1]
        tree.append((i, max(hops)[2]))
    S: set = set()
    used: set = set()
    M = len(prob.channels_mhz)
    for i, j in tree:
        options = sorted(((prob.V[(i, j, m)], -m, m) for m in range(M) if (i, j, m) in prob.x),
                         reverse=True)
        fresh = [o for o in options if o[2] not in used and _feasible_add(S, (i, j, o[2]))]
        pick = fresh or [o for o in options if _feasible_add(S, (i, j, o[2]))]
        if pick:
            m = pick[0][2]
            S.add((i, j, m))
            used.add(m)
    return frozenset(S)


def local_search(prob: MilpProblem, max_evaluations: int = 3000, seed: int = 0,
                 restarts: int = 5, time_limit_s: float = math.inf,
                 start: Optional[Iterable[Key]] = None,
                 ) -> tuple[float, Optional[np.ndarray]]:
    """Best schedule found within the budget; returns (t, solution vector).

    First-improvement hill climbing over add / drop / re-channel / re-route /
    channel-swap moves, with random kicks from the best schedule (iterated
    local search).  The budget is split over independent restarts from the
    same start schedule, since single runs occasionally stall in a basin that
    leans on near-zero-power links.  The evaluation budget makes the result
    reproducible for a given seed; the time limit is only a safety cap.
    """
    ev = ScheduleEvaluator(prob)
    t_end = time.monotonic() + time_limit_s
    keys = prob.keys
    M = len(prob.channels_mhz)
    S0 = frozenset(start) if start is not None else tree_schedule(prob)
    per_run = max(max_evaluations // max(restarts, 1), 1)

    def neighbours(S: frozenset):
        cur = set(S)
        for k in keys:
            if k not in cur and _feasible_add(cur, k):
                yield cur | {k}
        for k in sorted(cur):
            rest = cur - {k}
            yield rest
            i, j, m = k
            for m2 in range(M):
                k2 = (i, j, m2)
                if m2 != m and k2 in prob.x and _feasible_add(rest, k2):
                    yield rest | {k2}
            for k2 in keys:
                if k2[2] == m and k2 != k and (k2[0] == i or k2[1] == j) \
                        and _feasible_add(rest, k2):
                    yield rest | {k2}
        # exchange the channels of two scheduled links
        by_ch = sorted(cur)
        for a in range(len(by_ch)):
            for b in range(a + 1, len(by_ch)):
                ka, kb = by_ch[a], by_ch[b]
                if ka[2] == kb[2]:
                    continue
                na, nb = (ka[0], ka[1], kb[2]), (kb[0], kb[1], ka[2])
                if na in prob.x and nb in prob.x:
                    rest = cur - {ka, kb}
                    if _feasible_add(rest, na) and _feasible_add(rest | {na}, nb):
                        yield rest | {na, nb}

    def run(rng: random.Random, limit: int) -> tuple[frozenset, float]:
        # cached lookups are cheap but not free; cap them so tiny instances stop
        call_limit = ev.calls + 20 * per_run

        def spent() -> bool:
            return (ev.evaluations >= limit or ev.calls >= call_limit
                    or time.monotonic() >= t_end)

        def climb(S: frozenset) -> tuple[frozenset, float]:
            best = ev.solve(S)[0]
            improved = True
            while improved and not spent():
                improved = False
                cands = list(neighbours(S))
                rng.shuffle(cands)
                for cand in cands:
                    if spent():
                        break
                    cand = frozenset(cand)
                    v = ev.solve(cand)[0]
                    if v > best + 1e-9:
                        S, best, improved = cand, v, True
                        break
            return S, best

        best_S, best_val = climb(S0)
        while not spent():
            cur = set(best_S)
            for _ in range(rng.randint(1, 3)):
                if cur and rng.random() < 0.5:
                    cur.discard(rng.choice(sorted(cur)))
                else:
                    k = rng.choice(keys)
                    cur = {c for c in cur if c[2] != k[2] or not ({c[0], c[1]} & {k[0], k[1]})}
                    cur.add(k)
            S, val = climb(frozenset(cur))
            if val > best_val + 1e-9:
                best_S, best_val = S, val
        return best_S, best_val

    best_S, best_val = S0, ev.solve(S0)[0]
    for k in range(max(restarts, 1)):
        S, val = run(random.Random(seed * 1000 + k), min(ev.evaluations + per_run, max_evaluations))
        if val > best_val + 1e-9:
            best_S, best_val = S, val
    t_val, x = ev.solve(best_S)
    logger.debug("local search: %d evaluations, t=%.6g", ev.evaluations, t_val)
    return t_val, x
