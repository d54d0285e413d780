"""Brute-force reference for small programs: enumerate schedules, solve each LP with HiGHS."""

import itertools

import numpy as np
from scipy.optimize import linprog


def degree_feasible_patterns(prob):
    """Every set of (i, j, m) keys with per-(node, channel) degree at most one."""
    keys = prob.keys
    per_chan = []
    for m in sorted({k[2] for k in keys}):
        ks = [k for k in keys if k[2] == m]
        opts = []
        for r in range(len(ks) + 1):
            for combo in itertools.combinations(ks, r):
                used = [n for k in combo for n in k[:2]]
                if len(used) == len(set(used)):
                    opts.append(combo)
        per_chan.append(opts)
    for choice in itertools.product(*per_chan):
        yield {k for part in choice for k in part}


def brute_force_optimum(prob) -> tuple[float, int]:
    """(best objective, number of LPs solved); -inf when no pattern is feasible."""
    c, A, sense, rhs, lb, ub, _ = prob.lp.arrays()
    A = A.toarray()
    a_ub = np.vstack([A[sense == "L"], -A[sense == "G"]])
    b_ub = np.concatenate([rhs[sense == "L"], -rhs[sense == "G"]])
    eq = sense == "E"
    best, n = -np.inf, 0
    for on in degree_feasible_patterns(prob):
        lo, hi = lb.copy(), ub.copy()
        for k, j in prob.x.items():
            lo[j] = hi[j] = 1.0 if k in on else 0.0
        res = linprog(-c, A_ub=a_ub, b_ub=b_ub, A_eq=A[eq], b_eq=rhs[eq],
                      bounds=[(l, None if not np.isfinite(h) else h) for l, h in zip(lo, hi)],
                      method="highs")
        n += 1
        if res.status == 0:
            best = max(best, -res.fun)
    return best, n


def highs_milp_optimum(lp, time_limit_s: float = 300.0) -> tuple[float, bool]:
    """(objective, proven optimal) from HiGHS branch-and-cut on the same program."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, A, sense, rhs, lb, ub, integer = lp.arrays()
    lo = np.where(sense == "L", -np.inf, rhs)
    hi = np.where(sense == "G", np.inf, rhs)
    res = milp(-c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub),
               integrality=integer.astype(int),
               options={"time_limit": time_limit_s, "mip_rel_gap": 1e-9})
    if res.x is None:
        return -np.inf, False
    return float(-res.fun), res.status == 0
