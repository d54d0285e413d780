"""End-to-end solves: program, incumbent search, branch-and-bound, repair, verification."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import ScenarioConfig, SolverConfig
from ..lp.simplex import solve_lp
from ..repair import Plan, ValidationReport, cap_supported, plan_from_solution, repair_rates, verify_plan
from .bnb import MilpSolution, branch_and_bound, relative_gap
from .build import RATE_UNIT, MilpProblem, build_milp
from .heuristic import local_search

logger = logging.getLogger(__name__)


@dataclass
class Probe:
    target_bps: float
    status: str  # feasible | infeasible | unknown
    nodes: int
    wall_time: float


@dataclass
class PlanResult:
    mode: str
    status: str              # optimal | feasible | infeasible | unknown
    value_bps: float         # post-repair supported minimum rate
    objective_bps: float     # solver value before repair (t, or the certified target)
    bound_bps: float
    plan: Optional[Plan]
    raw_plan: Optional[Plan]
    report: Optional[ValidationReport]
    nodes: int = 0
    wall_time: float = 0.0
    probes: list[Probe] = field(default_factory=list)
    log: list[str] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.bound_bps, self.objective_bps) if self.plan else math.inf

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "status": self.status,
            "min_rate_bps": self.value_bps,
            "objective_bps": self.objective_bps,
            "bound_bps": self.bound_bps if math.isfinite(self.bound_bps) else None,
            "gap": self.gap if math.isfinite(self.gap) else None,
            "nodes": self.nodes,
            "wall_time_s": self.wall_time,
            "probes": [vars(p) for p in self.probes],
            "plan": self.plan.to_dict() if self.plan else None,
            "pre_repair_plan": self.raw_plan.to_dict() if self.raw_plan else None,
            "validation": self.report.to_dict() if self.report else None,
        }


def _incumbent(prob: MilpProblem, scfg: SolverConfig, time_limit_s: float):
    if scfg.heuristic_evaluations <= 0:
        return None
    val, x = local_search(prob, scfg.heuristic_evaluations, seed=scfg.seed,
                          time_limit_s=time_limit_s)
    if x is None or not math.isfinite(val):
        return None
    return x


def _finish_plan(prob: MilpProblem, x, gains, config: ScenarioConfig,
                 target_bps: Optional[float] = None):
    raw = plan_from_solution(prob, x)
    plan = repair_rates(raw, gains, config)
    if target_bps is not None:
        plan = cap_supported(plan, target_bps)
        plan.objective_bps = target_bps
    report = verify_plan(plan, config, gains)
    return raw, plan, report


def solve_epigraph(net, gains, config: ScenarioConfig) -> PlanResult:
    """Maximize the minimum supported rate directly (``max t, r_i >= t``)."""
    scfg = config.solver
    start = time.monotonic()
    prob = build_milp(net, gains, config, mode="epigraph")
    x0 = _incumbent(prob, scfg, scfg.time_limit_s)
    left = max(scfg.time_limit_s - (time.monotonic() - start), 1e-3)
    sol = branch_and_bound(prob.lp, _with_time(scfg, left), incumbent=x0)
    return _result_from(prob, sol, gains, config, start)


def _with_time(scfg: SolverConfig, seconds: float) -> SolverConfig:
    from dataclasses import replace
    return replace(scfg, time_limit_s=seconds)


def _result_from(prob, sol: MilpSolution, gains, config, start) -> PlanResult:
    if not sol.has_solution:
        return PlanResult("epigraph", sol.status, 0.0, -math.inf, sol.bound * RATE_UNIT,
                          None, None, None, sol.nodes, time.monotonic() - start, log=sol.log)
    raw, plan, report = _finish_plan(prob, sol.x, gains, config)
    return PlanResult("epigraph", sol.status, plan.min_rate_bps, sol.objective * RATE_UNIT,
                      sol.bound * RATE_UNIT, plan, raw, report, sol.nodes,
                      time.monotonic() - start, log=sol.log)


def bisection_feasible_rate(net, gains, config: ScenarioConfig,
                            granularity_bps: Optional[float] = None) -> PlanResult:
    """Largest multiple of the granularity for which every tower can be served.

    Each probe is a fixed-target feasibility program.  The search starts from
    the heuristic's feasible rate (so probes below it are skipped) and never
    probes above the root relaxation bound, which is a proof of infeasibility.
    A probe that runs out of time without a feasible point counts as
    infeasible, so the result is always backed by a feasible plan.
    """
    scfg = config.solver
    gran = granularity_bps if granularity_bps is not None else scfg.granularity_bps
    if not gran > 0:
        raise ValueError("granularity must be > 0")
    start = time.monotonic()
    epi = build_milp(net, gains, config, mode="epigraph")
    max_v = max(epi.V.values(), default=0.0) * RATE_UNIT
    root = solve_lp(epi.lp)
    ub = min(root.objective * RATE_UNIT, max_v) if root.optimal else max_v
    hi = math.floor(ub / gran + 1e-9)
    # the all-zero point is feasible for target 0
    lo = 0
    best_prob, best_x = epi, np.zeros(epi.lp.n_vars)
    x0 = _incumbent(epi, scfg, scfg.time_limit_s)
    if x0 is not None:
        lo = min(math.floor(x0[epi.t] * RATE_UNIT / gran + 1e-9), hi)
        best_prob, best_x = epi, x0
    proven_ub = ub
    probes: list[Probe] = []
    log: list[str] = []
    nodes = 0
    max_probes = max(math.ceil(math.log2(max(max_v / gran, 1.0))), 1)
    while lo < hi and len(probes) < max_probes:
        mid = (lo + hi + 1) // 2
        target = mid * gran
        left = scfg.time_limit_s - (time.monotonic() - start)
        if left <= 0:
            break
        budget = left / max(math.ceil(math.log2(hi - lo + 1)), 1)
        prob = build_milp(net, gains, config, mode="fixed_target", target_bps=target)
        sol = branch_and_bound(prob.lp, _with_time(scfg, budget))
        nodes += sol.nodes
        status = "feasible" if sol.has_solution else sol.status
        probes.append(Probe(target, status, sol.nodes, sol.wall_time))
        log.append(f"probe {target / 1e6:.6g} Mbps: {status} ({sol.nodes} nodes)")
        if sol.has_solution:
            achieved = min(sol.x[v] for v in prob.ri.values()) * RATE_UNIT
            lo = min(max(mid, math.floor(achieved / gran + 1e-9)), hi)
            best_prob, best_x = prob, sol.x
        else:
            if sol.status == "infeasible":
                proven_ub = min(proven_ub, target)
            hi = mid - 1
    elapsed = time.monotonic() - start
    target = lo * gran
    raw, plan, report = _finish_plan(best_prob, best_x, gains, config, target_bps=target)
    exact = lo == hi and all(p.status != "unknown" for p in probes)
    status = "optimal" if exact else "feasible"
    return PlanResult("granularity", status, plan.min_rate_bps, target,
                      target if exact else proven_ub, plan, raw, report, nodes, elapsed,
                      probes, log)


def solve_scenario(net, gains, config: ScenarioConfig) -> PlanResult:
    if config.solver.mode == "epigraph":
        return solve_epigraph(net, gains, config)
    return bisection_feasible_rate(net, gains, config)
