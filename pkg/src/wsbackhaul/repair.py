"""Turn a linearized schedule into a plan that holds under the exact capacity formula."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .config import ScenarioConfig
from .milp.build import RATE_UNIT, MilpProblem

# verification tolerances
POWER_TOL_W = 1e-9
RATE_TOL_BPS = 1.0
INTERFERENCE_TOL_W = 1e-15
ZERO_POWER_W = 1e-12


class StructuralInfeasibility(RuntimeError):
    """A rate reduction could not be absorbed upstream."""


@dataclass
class ActiveLink:
    i: int
    j: int
    channel: int
    f_mhz: float
    power_w: float
    rate_bps: float

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.channel)


@dataclass
class Plan:
    links: list[ActiveLink]
    supported_bps: dict[int, float]
    fiber: list[int]
    objective_bps: float = math.nan  # value reported by the solver
    pre_repair_min_bps: float = math.nan
    repaired: bool = False
    absorbed_bps: float = 0.0

    @property
    def non_fiber(self) -> list[int]:
        return sorted(self.supported_bps)

    @property
    def min_rate_bps(self) -> float:
        if not self.supported_bps:
            return 0.0
        return min(self.supported_bps.values())

    @property
    def total_bps(self) -> float:
        return sum(self.supported_bps.values())

    def copy(self) -> "Plan":
        return Plan([ActiveLink(**asdict(lk)) for lk in self.links], dict(self.supported_bps),
                    list(self.fiber), self.objective_bps, self.pre_repair_min_bps,
                    self.repaired, self.absorbed_bps)

    def to_dict(self) -> dict:
        return {
            "links": [asdict(lk) for lk in sorted(self.links, key=lambda lk: lk.key)],
            "supported_bps": {str(i): r for i, r in sorted(self.supported_bps.items())},
            "fiber": sorted(self.fiber),
            "min_rate_bps": self.min_rate_bps,
            "objective_bps": self.objective_bps,
            "pre_repair_min_bps": self.pre_repair_min_bps,
            "repaired": self.repaired,
            "absorbed_bps": self.absorbed_bps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Plan":
        return cls(links=[ActiveLink(**lk) for lk in data["links"]],
                   supported_bps={int(i): float(r) for i, r in data["supported_bps"].items()},
                   fiber=list(data["fiber"]), objective_bps=data.get("objective_bps", math.nan),
                   pre_repair_min_bps=data.get("pre_repair_min_bps", math.nan),
                   repaired=data.get("repaired", False),
                   absorbed_bps=data.get("absorbed_bps", 0.0))


def plan_from_solution(prob: MilpProblem, x) -> Plan:
    """Read links, powers and rates out of a program solution vector."""
    links = []
    for key in prob.keys:
        p = max(float(x[prob.p[key]]), 0.0) + 0.0
        r = max(float(x[prob.r[key]]), 0.0) * RATE_UNIT
        on = x[prob.x[key]] > 0.5
        if on and (p > ZERO_POWER_W or r > 0.0):
            i, j, m = key
            links.append(ActiveLink(i, j, m, prob.channels_mhz[m], p, r))
    supported = {i: max(float(x[v]), 0.0) * RATE_UNIT for i, v in prob.ri.items()}
    plan = Plan(links, supported, sorted(prob.fiber))
    plan.objective_bps = float(x[prob.t]) * RATE_UNIT
    plan.pre_repair_min_bps = plan.min_rate_bps
    return plan


def exact_capacity(link: ActiveLink, gains, config: ScenarioConfig) -> float:
    s = link.power_w * gains.gain(link.i, link.j, link.channel) / config.noise_power_w
    return config.channel_bw_hz * math.log2(1.0 + s)


class _Cascade:
    """Rate reductions on a plan that keep every conservation row balanced."""

    def __init__(self, plan: Plan):
        self.plan = plan
        self.fiber = set(plan.fiber)
        self.inbound: dict[int, list[ActiveLink]] = {}
        self.outbound: dict[int, list[ActiveLink]] = {}
        for lk in plan.links:
            self.inbound.setdefault(lk.j, []).append(lk)
            self.outbound.setdefault(lk.i, []).append(lk)

    @staticmethod
    def take(links: list[ActiveLink], amt: float) -> list[tuple[ActiveLink, float]]:
        cuts = []
        for lk in sorted(links, key=lambda lk: (-lk.rate_bps, lk.key)):
            if amt <= 1e-9:
                break
            cut = min(lk.rate_bps, amt)
            if cut > 0:
                lk.rate_bps -= cut
                amt -= cut
                cuts.append((lk, cut))
        if amt > 1e-6:
            raise StructuralInfeasibility(f"{amt:.3f} bps of excess rate has nowhere to go")
        return cuts

    def upstream(self, node: int, amount: float) -> None:
        """``node`` sends ``amount`` less: its own rate pays first, then its feeders."""
        pending = [(node, amount)]
        rates = self.plan.supported_bps
        while pending:
            n, amt = pending.pop()
            if n in self.fiber:
                raise StructuralInfeasibility(f"fiber tower {n} cannot absorb a rate reduction")
            own = rates.get(n, 0.0)
            paid = min(own, amt)
            rates[n] = own - paid
            if amt - paid > 1e-9:
                for lk, cut in self.take(self.inbound.get(n, []), amt - paid):
                    pending.append((lk.i, cut))

    def downstream(self, node: int, amount: float) -> None:
        """``node`` receives ``amount`` less and forwards that much less."""
        pending = [(node, amount)]
        while pending:
            n, amt = pending.pop()
            if n in self.fiber or amt <= 1e-9:
                continue
            for lk, cut in self.take(self.outbound.get(n, []), amt):
                pending.append((lk.j, cut))


def repair_rates(plan: Plan, gains, config: ScenarioConfig) -> Plan:
    """Cap every link at its exact capacity and remove the excess end to end.

    Upstream, the transmitter's own supported rate absorbs the excess first;
    anything left over is taken from its inbound links (largest rate first),
    which in turn reduces their transmitters, recursively.  Downstream, a
    relay receiving less forwards less: its outbound links shrink by the same
    amount (largest rate first) until the traffic reaches fiber.  No rate
    ever increases, and links left without power are dropped.
    """
    out = plan.copy()
    flow = _Cascade(out)
    absorbed = 0.0
    for lk in sorted(out.links, key=lambda lk: lk.key):
        cap = exact_capacity(lk, gains, config)
        if lk.rate_bps > cap:
            excess = lk.rate_bps - cap
            lk.rate_bps = cap
            absorbed += excess
            flow.upstream(lk.i, excess)
            flow.downstream(lk.j, excess)
    out.links = [lk for lk in out.links if lk.power_w > ZERO_POWER_W]
    out.repaired = True
    out.absorbed_bps = plan.absorbed_bps + absorbed
    return out


def cap_supported(plan: Plan, target_bps: float) -> Plan:
    """Lower every supported rate above ``target_bps`` to it, trimming its route to fiber."""
    out = plan.copy()
    flow = _Cascade(out)
    for i in sorted(out.supported_bps):
        extra = out.supported_bps[i] - target_bps
        if extra > 0:
            out.supported_bps[i] = target_bps
            flow.downstream(i, extra)
    return out


@dataclass
class FamilyCheck:
    passed: bool = True
    worst: float = 0.0
    checked: int = 0
    failures: list[str] = field(default_factory=list)

    def record(self, violation: float, tol: float, what: str) -> None:
        self.checked += 1
        self.worst = max(self.worst, violation)
        if violation > tol:
            self.passed = False
            if len(self.failures) < 20:
                self.failures.append(f"{what}: {violation:.6g}")


FAMILIES = ("power_budget", "half_duplex", "exact_capacity", "flow_conservation", "balance",
            "interference", "fiber_silent", "nonnegativity")


@dataclass
class ValidationReport:
    families: dict[str, FamilyCheck]
    min_rate_bps: float

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.families.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "min_rate_bps": self.min_rate_bps,
                "families": {k: asdict(v) for k, v in self.families.items()}}

    def summary(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'} min rate {self.min_rate_bps / 1e6:.3f} Mbps"]
        for name, fam in self.families.items():
            lines.append(f"  {name:18s} {'ok  ' if fam.passed else 'FAIL'} "
                         f"worst {fam.worst:.3g} over {fam.checked} checks")
        return "\n".join(lines)


def verify_plan(plan: Plan, config: ScenarioConfig, gains,
                towers: Optional[list[int]] = None) -> ValidationReport:
    """Check a plan against the exact (non-linearized) constraints."""
    fams = {name: FamilyCheck() for name in FAMILIES}
    fiber = set(plan.fiber)
    if towers is None:
        towers = list(range(1, config.n_towers + 1))
    links = [lk for lk in plan.links if lk.power_w > 0.0 or lk.rate_bps > 0.0]
    p_int = config.interference_threshold_w

    for lk in links:
        fams["nonnegativity"].record(max(-lk.power_w, -lk.rate_bps, 0.0), 0.0, f"link {lk.key}")
    for i, r in plan.supported_bps.items():
        fams["nonnegativity"].record(max(-r, 0.0), 0.0, f"r_{i}")

    for i in towers:
        used = sum(lk.power_w for lk in links if lk.i == i)
        fams["power_budget"].record(max(used - config.pmax_w, 0.0), POWER_TOL_W, f"tower {i}")
    for i in towers:
        for m in range(len(config.channels_mhz)):
            deg = sum(1 for lk in links if lk.channel == m and i in (lk.i, lk.j))
            fams["half_duplex"].record(max(deg - 1, 0), 0, f"tower {i} channel {m}")
    for lk in links:
        cap = exact_capacity(lk, gains, config)
        fams["exact_capacity"].record(max(lk.rate_bps - cap, 0.0), RATE_TOL_BPS, f"link {lk.key}")
    for i in sorted(plan.supported_bps):
        out_r = sum(lk.rate_bps for lk in links if lk.i == i)
        in_r = sum(lk.rate_bps for lk in links if lk.j == i)
        fams["flow_conservation"].record(abs(out_r - in_r - plan.supported_bps[i]), RATE_TOL_BPS,
                                         f"tower {i}")
    into_fiber = sum(lk.rate_bps for lk in links if lk.j in fiber)
    fams["balance"].record(abs(plan.total_bps - into_fiber), RATE_TOL_BPS, "network")
    for lk in links:
        fams["fiber_silent"].record(1.0 if lk.i in fiber and lk.power_w > 0 else 0.0, 0.0,
                                    f"link {lk.key}")
    tx_power: dict[tuple[int, int], float] = {}
    for lk in links:
        tx_power[(lk.i, lk.channel)] = tx_power.get((lk.i, lk.channel), 0.0) + lk.power_w
    for lk in links:
        if lk.power_w <= 0.0:
            continue
        for (k, m), pk in sorted(tx_power.items()):
            if m != lk.channel or k in (lk.i, lk.j) or pk <= 0.0:
                continue
            received = pk * gains.gain(k, lk.j, m)
            fams["interference"].record(max(received - p_int, 0.0), INTERFERENCE_TOL_W,
                                        f"tx {k} into link {lk.key}")
    return ValidationReport(fams, plan.min_rate_bps)
