"""LP-based branch-and-bound for binary programs built on :mod:`wsbackhaul.lp`.

Node selection is best-bound with depth-first plunging: after a node is
branched, the search dives into the child on the rounding side of the
branching variable and parks its sibling in a best-bound heap.

Branching picks the most fractional integer variable (lowest index on ties),
so single-worker runs are reproducible.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..config import SolverConfig
from ..lp.problem import FEAS_TOL, INT_TOL, DeadlineReached, LpProblem, NumericalInstability
from ..lp.simplex import Basis, Simplex, row_bounds

logger = logging.getLogger(__name__)


@dataclass
class MilpSolution:
    status: str  # optimal | feasible | infeasible | unknown
    objective: float = -math.inf
    x: Optional[np.ndarray] = None
    bound: float = math.inf
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    log: list[str] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.bound, self.objective)

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def relative_gap(bound: float, incumbent: float) -> float:
    if incumbent == -math.inf:
        return math.inf
    diff = max(bound - incumbent, 0.0)
    if diff <= 1e-12:
        return 0.0
    return diff / max(abs(incumbent), 1e-9)


@dataclass(order=True)
class _Node:
    sort_key: tuple
    id: int = field(compare=False)
    depth: int = field(compare=False)
    bound: float = field(compare=False)
    changes: tuple = field(compare=False)  # ((var, lb, ub), ...) applied on top of the root
    basis: Optional[Basis] = field(compare=False, default=None)


class _Search:
    """Shared state of one branch-and-bound run."""

    def __init__(self, lp: LpProblem, cfg: SolverConfig, incumbent, heuristic):
        c, A, sense, rhs, lb, ub, integer = lp.arrays()
        self.c, self.A = c, A
        self.row_lo, self.row_hi = row_bounds(sense, rhs)
        self.lb0, self.ub0 = lb, ub
        self.int_idx = np.flatnonzero(integer)
        self.cfg = cfg
        self.lp = lp
        self.heap: list[_Node] = []
        self.lock = threading.Lock()
        self.ids = itertools.count()
        self.nodes = 0
        self.lp_iterations = 0
        self.inc_obj = -math.inf
        self.inc_x: Optional[np.ndarray] = None
        self.active: dict[int, float] = {}  # node id -> bound, for nodes being processed
        self.log: list[str] = []
        self.start = time.monotonic()
        self.stop_reason: Optional[str] = None
        self.root_infeasible = False
        self.heuristic = heuristic
        if incumbent is not None:
            self.offer(np.asarray(incumbent, dtype=float), source="initial")

    # -- incumbent -----------------------------------------------------------

    def offer(self, x: np.ndarray, source: str) -> bool:
        x = x.copy()
        x[self.int_idx] = np.round(x[self.int_idx])
        viol = self.lp.max_violation(x)
        if viol > 1e-6:
            logger.debug("rejected %s solution, violation %.3g", source, viol)
            return False
        obj = float(self.c @ x)
        with self.lock:
            if obj > self.inc_obj + 1e-12:
                self.inc_obj = obj
                self.inc_x = x
                self._log_line(f"incumbent {obj:.9g} from {source}")
                return True
        return False

    # -- bookkeeping -----------------------------------------------------------

    def tolerance(self) -> float:
        return max(self.cfg.gap * abs(self.inc_obj), 1e-9) if self.inc_obj > -math.inf else 0.0

    def global_bound(self) -> float:
        bounds = [n.bound for n in self.heap] + list(self.active.values())
        if not bounds:
            return self.inc_obj if self.inc_obj > -math.inf else -math.inf
        return max(bounds)

    def _log_line(self, msg: str) -> None:
        elapsed = time.monotonic() - self.start
        self.log.append(f"{elapsed:9.2f}s {msg}")
        logger.debug(msg)

    def node_line(self, node: _Node, bound: float) -> None:
        gb = self.global_bound()
        inc = self.inc_obj
        gap = relative_gap(gb, inc)
        self._log_line(f"node {node.id} depth {node.depth} lp {bound:.9g} "
                       f"bound {gb:.9g} incumbent {inc:.9g} gap {gap:.3g}")

    def out_of_budget(self) -> bool:
        if self.stop_reason:
            return True
        if time.monotonic() - self.start > self.cfg.time_limit_s:
            self.stop_reason = "time_limit"
        elif self.cfg.node_limit is not None and self.nodes >= self.cfg.node_limit:
            self.stop_reason = "node_limit"
        return self.stop_reason is not None

    def done(self) -> bool:
        if self.inc_obj == -math.inf:
            return False
        return relative_gap(self.global_bound(), self.inc_obj) <= self.cfg.gap

    # -- node processing ---------------------------------------------------

    def new_solver(self) -> Simplex:
        solver = Simplex(self.c, self.A, self.row_lo, self.row_hi, self.lb0, self.ub0)
        solver.deadline = self.start + self.cfg.time_limit_s
        return solver

    def bounds_for(self, changes) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = self.lb0.copy(), self.ub0.copy()
        for j, lo, hi in changes:
            lb[j], ub[j] = lo, hi
        return lb, ub

    def process(self, solver: Simplex, node: _Node, warm: bool) -> Optional[_Node]:
        """Solve one node; returns the child to plunge into, if any."""
        lb, ub = self.bounds_for(node.changes)
        solver.set_bounds(lb, ub)
        try:
            sol = solver.solve(None if warm else node.basis)
        except NumericalInstability:
            # fall back to a cold start before giving up on the node
            solver._slack_basis()
            sol = solver.solve(None)
        with self.lock:
            self.nodes += 1
            self.lp_iterations += sol.iterations
        if sol.status == "infeasible":
            if node.depth == 0:
                self.root_infeasible = True
            return None
        if sol.status == "unbounded":
            raise NumericalInstability("LP relaxation is unbounded")
        bound = sol.objective
        x = sol.x
        if node.depth == 0 and self.heuristic is not None:
            cand = self.heuristic(x)
            if cand is not None:
                self.offer(cand, "heuristic")
        if self.cfg.log_every and self.nodes % self.cfg.log_every == 0:
            self.node_line(node, bound)
        if bound <= self.inc_obj + self.tolerance():
            return None
        xi = x[self.int_idx]
        frac = np.abs(xi - np.round(xi))
        if frac.max(initial=0.0) <= INT_TOL:
            self._polish(solver, lb, ub, x, node)
            return None
        k = int(np.argmax(frac))  # first index among ties
        j = int(self.int_idx[k])
        v = x[j]
        basis = sol.basis
        down = node.changes + ((j, lb[j], math.floor(v)),)
        up = node.changes + ((j, math.ceil(v), ub[j]),)
        first, second = (up, down) if v - math.floor(v) >= 0.5 else (down, up)
        with self.lock:
            sid = next(self.ids)
            heapq.heappush(self.heap, _Node((-bound, -(node.depth + 1), sid), sid, node.depth + 1,
                                            bound, second, basis))
            cid = next(self.ids)
        return _Node((-bound, -(node.depth + 1), cid), cid, node.depth + 1, bound, first, basis)

    def _polish(self, solver: Simplex, lb, ub, x, node: _Node) -> None:
        """Re-solve with the integers fixed at their rounded values, then offer."""
        fixed = np.round(x[self.int_idx])
        lb, ub = lb.copy(), ub.copy()
        lb[self.int_idx] = fixed
        ub[self.int_idx] = fixed
        solver.set_bounds(lb, ub)
        try:
            sol = solver.solve(None)
        except DeadlineReached:
            self.offer(x, f"node {node.id} (unpolished)")
            raise
        if sol.status == "optimal" and self.offer(sol.x, f"node {node.id}"):
            return
        self.offer(x, f"node {node.id} (unpolished)")

    def pop(self) -> Optional[_Node]:
        with self.lock:
            while self.heap:
                node = heapq.heappop(self.heap)
                if node.bound > self.inc_obj + self.tolerance():
                    self.active[node.id] = node.bound
                    return node
            return None


def branch_and_bound(lp: LpProblem, cfg: SolverConfig | None = None, incumbent=None,
                     heuristic: Callable | None = None) -> MilpSolution:
    """Maximize ``lp`` with its integer variables enforced.

    ``incumbent`` is an optional feasible starting point.  ``heuristic`` is
    called on the root relaxation and may return a candidate solution.
    With ``cfg.workers > 1`` worker threads share the node heap and the
    incumbent; results are reproducible only with a single worker.
    """
    cfg = cfg or SolverConfig()
    search = _Search(lp, cfg, incumbent, heuristic)
    rid = next(search.ids)
    root = _Node((math.inf, 0, rid), rid, 0, math.inf, ())
    search.heap.append(root)
    if cfg.workers <= 1:
        _worker(search)
    else:
        threads = [threading.Thread(target=_worker, args=(search,), daemon=True)
                   for _ in range(cfg.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    return _finish(search)


def _worker(search: _Search) -> None:
    solver = search.new_solver()
    idle_rounds = 0
    while True:
        if search.out_of_budget() or search.done():
            return
        node = search.pop()
        if node is None:
            with search.lock:
                busy = bool(search.active)
            if not busy or idle_rounds > 10_000:
                return
            idle_rounds += 1
            time.sleep(0.001)
            continue
        idle_rounds = 0
        warm = False
        while node is not None:
            nid = node.id
            try:
                child = search.process(solver, node, warm)
            except DeadlineReached:
                # the node is unresolved: park it so its bound still counts
                with search.lock:
                    search.stop_reason = "time_limit"
                    search.active.pop(nid, None)
                    heapq.heappush(search.heap, node)
                return
            with search.lock:
                search.active.pop(nid, None)
                if child is not None:
                    search.active[child.id] = child.bound
            node = child
            warm = True
            if node is not None and (search.out_of_budget() or search.done()):
                with search.lock:
                    search.active.pop(node.id, None)
                    heapq.heappush(search.heap, node)
                return


def _finish(search: _Search) -> MilpSolution:
    elapsed = time.monotonic() - search.start
    bound = search.global_bound()
    if search.inc_x is None:
        if search.stop_reason is None:
            status, bound = "infeasible", -math.inf
        else:
            status = "unknown"
    else:
        bound = max(bound, search.inc_obj)
        if search.stop_reason is None or relative_gap(bound, search.inc_obj) <= search.cfg.gap:
            status = "optimal"
        else:
            status = "feasible"
        if status == "optimal" and not search.heap and not search.active:
            bound = search.inc_obj
    search._log_line(f"finished {status} after {search.nodes} nodes: incumbent "
                     f"{search.inc_obj:.9g} bound {bound:.9g}"
                     + (f" ({search.stop_reason})" if search.stop_reason else ""))
    return MilpSolution(status=status, objective=search.inc_obj, x=search.inc_x, bound=bound,
                        nodes=search.nodes, lp_iterations=search.lp_iterations,
                        wall_time=elapsed, log=search.log)
