"""Joint power/schedule/routing program with tangent-line capacity cuts.

Rates inside the program are in Mbps and powers in watts; the plan layer
converts rates back to bps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from ..config import ScenarioConfig
from ..lp.problem import EQ, GE, LE, LpProblem

logger = logging.getLogger(__name__)

RATE_UNIT = 1e6  # bps per program rate unit
LN2 = math.log(2.0)


class DegenerateProblem(ValueError):
    """No non-fiber towers: the max-min objective is undefined."""


@dataclass(frozen=True)
class PwlCut:
    key: tuple[int, int, int]
    s0: float         # tangent SNR (linear)
    slope: float      # bps per watt
    intercept: float  # bps at p = 0

    def rate_bps(self, p_w: float) -> float:
        return self.intercept + self.slope * p_w

    def rate_at_snr(self, s: float, w_hz: float) -> float:
        """Tangent line evaluated as a function of SNR."""
        return w_hz * (math.log2(1.0 + self.s0) + (s - self.s0) / ((1.0 + self.s0) * LN2))


def tangent_cuts(g_linear: float, pmax_w: float, noise_w: float, w_hz: float,
                 step_db: float, key=(0, 0, 0)) -> list[PwlCut]:
    """Tangents to ``W*log2(1 + p*g/noise)`` at 0 dB, step, 2*step, ... and at full power."""
    alpha = g_linear / noise_w  # SNR per watt
    s_max = pmax_w * alpha
    points = []
    if s_max >= 1.0:
        s_max_db = 10 * math.log10(s_max)
        k = 0
        while k * step_db < s_max_db - 1e-9:
            points.append(10 ** (k * step_db / 10))
            k += 1
    points.append(s_max)
    cuts = []
    for s0 in points:
        dc_ds = w_hz / ((1.0 + s0) * LN2)
        cuts.append(PwlCut(key=key, s0=s0, slope=dc_ds * alpha,
                           intercept=w_hz * math.log2(1.0 + s0) - dc_ds * s0))
    return cuts


@dataclass
class MilpProblem:
    lp: LpProblem
    links: list[tuple[int, int]]
    channels_mhz: list[float]
    fiber: frozenset
    non_fiber: list[int]
    p: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    x: dict = field(default_factory=dict)
    ri: dict = field(default_factory=dict)
    t: int = -1
    cuts: dict = field(default_factory=dict)
    U: float = 0.0
    V: dict = field(default_factory=dict)
    mode: str = "epigraph"
    target_bps: Optional[float] = None
    pmax_w: float = 0.0

    @property
    def keys(self) -> list[tuple[int, int, int]]:
        return sorted(self.x)

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for name in self.lp.row_names:
            fam = name.split("_", 1)[0]
            counts[fam] = counts.get(fam, 0) + 1
        return counts


def build_milp(net, gains, config: ScenarioConfig, mode: str = "epigraph",
               target_bps: Optional[float] = None) -> MilpProblem:
    """Assemble the max-min program for the candidate links of ``net``.

    ``mode="epigraph"`` maximizes ``t`` with ``r_i >= t``; ``mode="fixed_target"``
    pins ``t`` to ``target_bps`` and maximizes 0.
    """
    if mode not in ("epigraph", "fixed_target"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "fixed_target" and (target_bps is None or target_bps < 0):
        raise ValueError("fixed_target mode needs a nonnegative target_bps")
    non_fiber = net.non_fiber
    if not non_fiber:
        raise DegenerateProblem("every tower has fiber access; nothing to backhaul")
    links = sorted(net.candidate_links)
    if not links:
        logger.warning("no candidate links: program is infeasible for any positive rate")
    M = len(net.channels_mhz)
    fiber = net.fiber
    pmax = config.pmax_w
    noise = config.noise_power_w
    w_hz = config.channel_bw_hz
    w_u = w_hz / RATE_UNIT
    p_int = config.interference_threshold_w

    lp = LpProblem(f"wsbackhaul_{mode}")
    prob = MilpProblem(lp=lp, links=links, channels_mhz=list(net.channels_mhz), fiber=fiber,
                       non_fiber=non_fiber, U=pmax, mode=mode, target_bps=target_bps,
                       pmax_w=pmax)

    for (i, j) in links:
        for m in range(M):
            key = (i, j, m)
            g = gains.gain(i, j, m)
            v = w_u * math.log2(1.0 + pmax * g / noise)
            prob.V[key] = v
            prob.p[key] = lp.add_var(f"p_{i}_{j}_{m}", 0.0, pmax)
            prob.r[key] = lp.add_var(f"r_{i}_{j}_{m}", 0.0, v)
            prob.x[key] = lp.add_var(f"x_{i}_{j}_{m}", 0.0, 1.0, integer=True)
    for i in non_fiber:
        prob.ri[i] = lp.add_var(f"ri_{i}", 0.0)
    if mode == "epigraph":
        prob.t = lp.add_var("t", 0.0, obj=1.0)
    else:
        t0 = target_bps / RATE_UNIT
        prob.t = lp.add_var("t", t0, t0)

    out_keys: dict[int, list] = {i: [] for i in net.ids}
    in_keys: dict[int, list] = {i: [] for i in net.ids}
    for key in prob.x:
        out_keys[key[0]].append(key)
        in_keys[key[1]].append(key)

    # per-node power budget
    for i in net.ids:
        if out_keys[i]:
            lp.add_row(f"power_{i}", {prob.p[k]: 1.0 for k in out_keys[i]}, LE, pmax)
    # fiber towers never transmit
    for i in sorted(fiber):
        for k in out_keys[i]:
            lp.add_row(f"fibertx_{k[0]}_{k[1]}_{k[2]}", {prob.p[k]: 1.0}, EQ, 0.0)
    # half duplex: one transmission or reception per node and channel
    for i in net.ids:
        for m in range(M):
            coeffs = {prob.x[k]: 1.0 for k in out_keys[i] + in_keys[i] if k[2] == m}
            lp.add_row(f"degree_{i}_{m}", coeffs, LE, 1.0)
    # piecewise-linear capacity and big-M activation
    for key in sorted(prob.x):
        i, j, m = key
        cuts = tangent_cuts(gains.gain(i, j, m), pmax, noise, w_hz, config.pwl_step_db, key)
        prob.cuts[key] = cuts
        for n, c in enumerate(cuts):
            lp.add_row(f"cut_{i}_{j}_{m}_{n}",
                       {prob.r[key]: 1.0, prob.p[key]: -c.slope / RATE_UNIT}, LE,
                       c.intercept / RATE_UNIT)
        lp.add_row(f"actp_{i}_{j}_{m}", {prob.p[key]: 1.0, prob.x[key]: -prob.U}, LE, 0.0)
        lp.add_row(f"actr_{i}_{j}_{m}", {prob.r[key]: 1.0, prob.x[key]: -prob.V[key]}, LE, 0.0)
    # flow conservation at non-fiber towers
    for i in non_fiber:
        coeffs: dict[int, float] = {prob.r[k]: 1.0 for k in out_keys[i]}
        for k in in_keys[i]:
            coeffs[prob.r[k]] = coeffs.get(prob.r[k], 0.0) - 1.0
        coeffs[prob.ri[i]] = -1.0
        lp.add_row(f"flow_{i}", coeffs, EQ, 0.0)
    # everything generated ends at fiber
    coeffs = {prob.ri[i]: 1.0 for i in non_fiber}
    for key in prob.x:
        if key[1] in fiber:
            coeffs[prob.r[key]] = coeffs.get(prob.r[key], 0.0) - 1.0
    lp.add_row("balance", coeffs, EQ, 0.0)
    # protocol interference
    _interference_rows(prob, net, gains, config, out_keys, p_int)
    # max-min epigraph (or fixed target)
    for i in non_fiber:
        lp.add_row(f"minrate_{i}", {prob.ri[i]: 1.0, prob.t: -1.0}, GE, 0.0)
    return prob


def _interference_rows(prob, net, gains, config, out_keys, p_int):
    lp = prob.lp
    pmax = config.pmax_w
    all_pairs = config.interference_all_pairs
    for key in sorted(prob.x):
        i, j, m = key
        for k in net.ids:
            if k == j or (k == i and not all_pairs):
                continue
            k_out = [kk for kk in out_keys[k] if kk[2] == m and (k != i or kk[1] != j)]
            if not k_out:
                continue
            cap = p_int / gains.gain(k, j, m)
            if cap >= pmax:
                continue
            coef = pmax - cap
            if all_pairs:
                for kk in k_out:
                    lp.add_row(f"intf_{i}_{j}_{m}_{k}_{kk[1]}",
                               {prob.p[kk]: 1.0, prob.x[key]: coef}, LE, pmax)
            else:
                row = {prob.p[kk]: 1.0 for kk in k_out}
                row[prob.x[key]] = coef
                lp.add_row(f"intf_{i}_{j}_{m}_{k}", row, LE, pmax)
