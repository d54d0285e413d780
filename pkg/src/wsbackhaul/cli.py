"""Command-line entry points: plan, sweep, gains, demand, export-mps.

Every verb writes its artifacts (JSON, CSV, DOT, MPS and PNG figures) into
an output directory, ``./out`` unless ``WSBACKHAUL_OUTPUT_DIR`` says
otherwise, and prints the delimited output on stdout as well.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, ScenarioConfig, load_scenario, scenario_from_dict
from .lp.mps import mangling_table, write_mps
from .lp.problem import LpError
from .milp.build import DegenerateProblem, build_milp
from .milp.solve import PlanResult, solve_scenario
from .model import Network, build_grid, candidate_links
from .propagation import LinkGainTable, PropagationError, build_gain_table
from .repair import Plan, StructuralInfeasibility
from .traffic import demand_csv, density_for_demand, device_table, per_cell_demand

logger = logging.getLogger(__name__)

OUTPUT_ENV = "WSBACKHAUL_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2       # argparse's own code for bad command lines
EXIT_CONFIG = 3      # unreadable or invalid config / sweep spec
EXIT_DEGENERATE = 4  # nothing to plan (every tower on fiber)
EXIT_SOLVE = 5       # solver failure, or no plan within the limits
EXIT_VERIFY = 6      # a plan was produced but failed verification


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or "out")


def prepare(config: ScenarioConfig) -> tuple[Network, LinkGainTable]:
    """Grid, gain table and (optionally pruned) candidate links."""
    config.validate()
    net = build_grid(config)
    gains = build_gain_table(net, config)
    return candidate_links(net, gains, config, config.min_snr_db), gains


# -- plan ---------------------------------------------------------------------

def export_topology_dot(plan: Optional[Plan], towers: Sequence[int],
                        fiber: Optional[Sequence[int]] = None) -> str:
    """Routing digraph of a plan: fiber towers double-circled, edges labelled MHz / Mbps."""
    fiber_set = set(plan.fiber if plan is not None else (fiber or ()))
    lines = ["digraph backhaul {", "  rankdir=LR;"]
    for t in sorted(towers):
        shape = "doublecircle" if t in fiber_set else "circle"
        lines.append(f"  {t} [shape={shape}];")
    links = sorted(plan.links, key=lambda lk: lk.key) if plan is not None else []
    for lk in links:
        lines.append(f'  {lk.i} -> {lk.j} [label="{lk.f_mhz:g} MHz / '
                     f'{lk.rate_bps / 1e6:.3f} Mbps"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def reaches_fiber(plan: Plan) -> dict[int, bool]:
    """For each non-fiber tower: does it have a directed path to fiber?"""
    into: dict[int, list[int]] = {}
    for lk in plan.links:
        if lk.rate_bps > 0:
            into.setdefault(lk.j, []).append(lk.i)
    seen = set(plan.fiber)
    stack = list(seen)
    while stack:
        for i in into.get(stack.pop(), ()):
            if i not in seen:
                seen.add(i)
                stack.append(i)
    return {i: i in seen for i in plan.non_fiber}


def run_scenario(config: ScenarioConfig, out: Optional[Path] = None,
                 figures: bool = True) -> tuple[dict, PlanResult]:
    """gains -> program -> solve -> repair -> verify; optionally write artifacts."""
    net, gains = prepare(config)
    result = solve_scenario(net, gains, config)
    doc = result.to_dict()
    doc["config"] = config.to_dict()
    if result.plan is not None:
        doc["reaches_fiber"] = {str(i): ok for i, ok in reaches_fiber(result.plan).items()}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(json.dumps(doc, indent=2, default=_json_default))
        (out / "topology.dot").write_text(export_topology_dot(result.plan, net.ids, net.fiber))
        if figures:
            from . import plotting
            plotting.plot_topology(net, result.plan, out / "topology.png")
            key = _strongest_link(result, gains)
            if key is not None:
                from .milp.build import tangent_cuts
                g = gains.gain(*key)
                cuts = tangent_cuts(g, config.pmax_w, config.noise_power_w,
                                    config.channel_bw_hz, config.pwl_step_db, key)
                plotting.plot_capacity_cuts(cuts, g, config, out / "capacity_cuts.png")
    return doc, result


def _strongest_link(result: PlanResult, gains: LinkGainTable):
    if result.plan is not None and result.plan.links:
        lk = max(result.plan.links, key=lambda lk: (lk.rate_bps, lk.key))
        return lk.key
    keys = sorted(gains)
    return keys[0] if keys else None


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


# -- sweep --------------------------------------------------------------------

@dataclass
class SweepSpec:
    spacings_km: list[float]
    fiber_sets: list[tuple[str, list[int]]]
    base: ScenarioConfig
    csv_name: str = "sweep.csv"
    figure_name: str = "sweep.png"

    def validate(self) -> None:
        if not self.spacings_km:
            raise ConfigError("sweep: spacings_km must be nonempty")
        if not self.fiber_sets:
            raise ConfigError("sweep: fiber_sets must be nonempty")
        if any(not l > 0 for l in self.spacings_km):
            raise ConfigError("sweep: spacings must be > 0")
        labels = [lab for lab, _ in self.fiber_sets]
        if len(set(labels)) != len(labels):
            raise ConfigError("sweep: fiber set labels must be unique")
        for lab, ids in self.fiber_sets:
            self.cell_config(self.spacings_km[0], ids).validate()

    def cell_config(self, l_km: float, ids: Sequence[int]) -> ScenarioConfig:
        return self.base.replace(spacing_km=float(l_km), fiber_ids=list(ids))

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        if not isinstance(data, dict):
            raise ConfigError("sweep spec must be a JSON object")
        known = {"spacings_km", "fiber_sets", "base", "calibration", "output"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"sweep: unknown field(s) {', '.join(unknown)}")
        try:
            sets = [(str(fs["label"]), [int(i) for i in fs["ids"]]) for fs in data["fiber_sets"]]
            spacings = [float(l) for l in data["spacings_km"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"sweep: malformed spacings or fiber sets ({exc})") from exc
        base_data = dict(data.get("base", {}))
        if sets:
            # every cell overrides the fiber set; keep the base valid on small grids
            base_data.setdefault("fiber_ids", sets[0][1])
        base = scenario_from_dict(base_data)
        cal = data.get("calibration")
        if cal is not None:
            # density chosen so a cell of side l_km demands demand_mbps
            density = density_for_demand(base.traffic, float(cal["l_km"]),
                                         float(cal["demand_mbps"]) * 1e6)
            base.traffic.density_per_km2 = density
        outp = data.get("output", {})
        spec = cls(spacings, sets, base, outp.get("csv", "sweep.csv"),
                   outp.get("figure", "sweep.png"))
        spec.validate()
        return spec


@dataclass
class SweepRow:
    l_km: float
    fiber_set: str
    fiber_ids: list[int]
    supported_bps: float
    demand_bps: float
    feasible: bool
    wall_time_s: float
    gap: float
    status: str
    error: str = ""
    extra: dict = field(default_factory=dict, repr=False)


SWEEP_COLUMNS = ["l_km", "fiber_set", "fiber_ids", "supported_bps", "demand_bps", "feasible",
                 "wall_time_s", "gap", "status", "error"]


def sweep_cell(spec: SweepSpec, l_km: float, label: str, ids: list[int],
               keep_result: bool = False) -> SweepRow:
    """Solve one (l, fiber set) cell; failures are recorded in the row.

    With ``keep_result`` the full :class:`PlanResult` rides along in ``row.extra``.
    """
    cfg = spec.cell_config(l_km, ids)
    demand = per_cell_demand(cfg.traffic, l_km).demand_bps
    start = time.monotonic()
    try:
        _, res = run_scenario(cfg, None, figures=False)
    except (ConfigError, DegenerateProblem, LpError, PropagationError,
            StructuralInfeasibility) as exc:
        return SweepRow(l_km, label, list(ids), math.nan, demand, False,
                        time.monotonic() - start, math.inf, "error", f"{type(exc).__name__}: {exc}")
    supported = res.value_bps if res.plan is not None else math.nan
    ok = res.report is not None and res.report.passed
    return SweepRow(l_km, label, list(ids), supported, demand,
                    bool(ok and supported >= demand), res.wall_time, res.gap, res.status,
                    "" if ok or res.report is None else "plan failed verification",
                    {"result": res} if keep_result else {})


def _cell_job(args):
    return sweep_cell(*args)


def sweep(spec: SweepSpec, workers: int = 1, keep_results: bool = False) -> list[SweepRow]:
    """One row per (l, fiber set), in spec order whatever the completion order."""
    jobs = [(spec, l, lab, ids, keep_results)
            for l in spec.spacings_km for lab, ids in spec.fiber_sets]
    if workers <= 1:
        return [_cell_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell_job, jobs))


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([repr(float(r.l_km)), r.fiber_set, " ".join(map(str, r.fiber_ids)),
                    repr(float(r.supported_bps)), repr(float(r.demand_bps)),
                    "true" if r.feasible else "false", f"{r.wall_time_s:.3f}",
                    repr(float(r.gap)), r.status, r.error])
    return buf.getvalue()


def load_sweep_spec(path) -> SweepSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return SweepSpec.from_dict(data)


# -- argument handling --------------------------------------------------------

def _apply_flags(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        cfg.solver.seed = args.seed
    if args.workers is not None:
        cfg.solver.workers = args.workers
    if args.time_limit is not None:
        cfg.solver.time_limit_s = args.time_limit
    if getattr(args, "epigraph", False):
        cfg.solver.mode = "epigraph"
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="heuristic seed")
    common.add_argument("--workers", type=int, default=None,
                        help="branch-and-bound threads (plan) or concurrent cells (sweep)")
    common.add_argument("--time-limit", type=float, default=None, dest="time_limit",
                        help="seconds per solve (per cell in a sweep)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="wsbackhaul",
                                description="TV white space backhaul planning")
    sub = p.add_subparsers(dest="verb", required=True)
    sp = sub.add_parser("plan", parents=[common], help="plan one scenario")
    sp.add_argument("config")
    sp.add_argument("--epigraph", action="store_true",
                    help="maximize the minimum rate directly instead of the 1 Mbps rate search")
    sp = sub.add_parser("sweep", parents=[common], help="run a spacing x fiber-set sweep")
    sp.add_argument("spec")
    sp = sub.add_parser("gains", parents=[common], help="gain table CSV")
    sp.add_argument("config")
    sp = sub.add_parser("demand", parents=[common], help="per-cell demand CSV")
    sp.add_argument("config")
    sp.add_argument("--sizes", default="1,2,3,4,5",
                    help="comma-separated cell sides in km (default 1,2,3,4,5)")
    sp = sub.add_parser("export-mps", parents=[common], help="write the program as MPS")
    sp.add_argument("config")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = output_dir()
    try:
        if args.verb == "sweep":
            return _cmd_sweep(args, out)
        cfg = _apply_flags(load_scenario(args.config), args)
        return {"plan": _cmd_plan, "gains": _cmd_gains, "demand": _cmd_demand,
                "export-mps": _cmd_mps}[args.verb](args, cfg, out)
    except (ConfigError, PropagationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (LpError, StructuralInfeasibility) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVE


def _cmd_plan(args, cfg: ScenarioConfig, out: Path) -> int:
    doc, res = run_scenario(cfg, out)
    if res.plan is None:
        print(f"status {res.status}: no plan found", file=sys.stderr)
        return EXIT_SOLVE
    print(res.report.summary())
    print(f"status {res.status}, min rate {res.value_bps / 1e6:.6f} Mbps, "
          f"gap {res.gap:.3g}, {res.wall_time:.1f} s; wrote {out / 'result.json'}")
    return EXIT_OK if res.report.passed else EXIT_VERIFY


def _cmd_sweep(args, out: Path) -> int:
    spec = load_sweep_spec(args.spec)
    if args.seed is not None:
        spec.base.solver.seed = args.seed
    if args.time_limit is not None:
        spec.base.solver.time_limit_s = args.time_limit
    spec.base.validate()
    rows = sweep(spec, workers=args.workers or 1)
    text = sweep_csv(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / spec.csv_name).write_text(text)
    from . import plotting
    plotting.plot_sweep(rows, out / spec.figure_name)
    sys.stdout.write(text)
    bad = [r for r in rows if r.status == "error" or r.error]
    return EXIT_SOLVE if bad else EXIT_OK


def _cmd_gains(args, cfg: ScenarioConfig, out: Path) -> int:
    net, gains = prepare(cfg)
    text = gains.to_csv()
    out.mkdir(parents=True, exist_ok=True)
    (out / "gains.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_demand(args, cfg: ScenarioConfig, out: Path) -> int:
    try:
        sizes = [float(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sizes: {exc}") from exc
    if not sizes or any(not s > 0 for s in sizes):
        raise ConfigError("--sizes needs positive cell sides")
    text = demand_csv(cfg.traffic, sizes)
    out.mkdir(parents=True, exist_ok=True)
    (out / "demand.csv").write_text(text)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["device", "base_per_household", "projected_per_household"])
    for name, base, proj in device_table(cfg.traffic):
        w.writerow([name, repr(base), f"{proj:.6f}"])
    (out / "devices.csv").write_text(buf.getvalue())
    from . import plotting
    plotting.plot_demand(cfg.traffic, sizes, out / "demand.png")
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_mps(args, cfg: ScenarioConfig, out: Path) -> int:
    net, gains = prepare(cfg)
    prob = build_milp(net, gains, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.mps").write_bytes(write_mps(prob.lp))
    (out / "names.csv").write_text(mangling_table(prob.lp))
    counts = prob.family_counts()
    print(f"wrote {out / 'model.mps'} ({prob.lp.n_vars} columns, {prob.lp.n_rows} rows)")
    for fam, n in sorted(counts.items()):
        print(f"  {fam}: {n}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
