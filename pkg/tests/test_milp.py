import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsbackhaul.config import ScenarioConfig, SolverConfig
from wsbackhaul.lp.problem import LE, LpProblem
from wsbackhaul.lp.simplex import solve_lp
from wsbackhaul.milp.bnb import branch_and_bound, relative_gap
from wsbackhaul.milp.build import RATE_UNIT, DegenerateProblem, build_milp, tangent_cuts
from wsbackhaul.milp.solve import bisection_feasible_rate, solve_epigraph
from wsbackhaul.model import build_grid
from wsbackhaul.propagation import build_gain_table, capacity_bps

from conftest import instance, line_config, toy_config
from oracle import brute_force_optimum

NOISE_6MHZ = 10 ** ((-174.0 - 30) / 10) * 6e6
TOY_CAPACITY_MBPS = 96.54


def test_tangent_at_zero_db():
    cut = tangent_cuts(1e-12, 4.0, NOISE_6MHZ, 6e6, 10.0)[0]
    assert cut.s0 == 1.0
    assert cut.rate_at_snr(1.0, 6e6) == pytest.approx(6e6)
    alpha = 1e-12 / NOISE_6MHZ
    assert cut.slope / alpha == pytest.approx(4.328e6, rel=1e-4)
    assert cut.slope / alpha == pytest.approx(6e6 / (2 * math.log(2)))


def test_tangent_points_follow_the_step():
    g = 10 ** (-93.80 / 10)
    cuts = tangent_cuts(g, 4.0, NOISE_6MHZ, 6e6, 10.0)
    s_db = [10 * math.log10(c.s0) for c in cuts]
    assert s_db[:5] == pytest.approx([0, 10, 20, 30, 40])
    assert s_db[5] == pytest.approx(48.44, abs=0.01)
    assert len(cuts) == 6
    # a link that never reaches 0 dB keeps only the full-power tangent
    weak = tangent_cuts(1e-20, 4.0, NOISE_6MHZ, 6e6, 10.0)
    assert len(weak) == 1


@settings(max_examples=60, deadline=None)
@given(st.floats(-140, -60), st.floats(0.1, 10), st.sampled_from([3.0, 5.0, 10.0]))
def test_cuts_dominate_capacity(g_db, pmax, step):
    g = 10 ** (g_db / 10)
    cuts = tangent_cuts(g, pmax, NOISE_6MHZ, 6e6, step)
    p = np.linspace(0, pmax, 2000)
    exact = 6e6 * np.log2(1 + p * g / NOISE_6MHZ)
    for c in cuts:
        assert np.all(c.intercept + c.slope * p >= exact - 1.0)
    # and the envelope touches the curve at full power
    assert min(c.rate_bps(pmax) for c in cuts) == pytest.approx(exact[-1], rel=1e-9)


def test_family_counts_full_grid():
    cfg = ScenarioConfig(fiber_ids=[1, 5, 9])
    net, gains = instance(cfg)
    prob = build_milp(net, gains, cfg)
    lp = prob.lp
    assert sum(lp.integer) == 336
    assert len(prob.p) == len(prob.r) == len(prob.x) == 336
    assert len(prob.ri) == 6 and prob.t >= 0
    fam = prob.family_counts()
    assert fam["degree"] == 63
    assert fam["power"] == 6
    assert fam["balance"] == 1
    assert fam["flow"] == 6
    assert fam["minrate"] == 6
    assert fam["actp"] + fam["actr"] == 672
    assert fam["cut"] == sum(len(c) for c in prob.cuts.values())
    assert fam.get("intf", 0) <= 336 * 7
    assert "fibertx" not in fam
    assert prob.U == cfg.pmax_w
    for key, v in prob.V.items():
        cap = capacity_bps(cfg.pmax_w, gains.gain(*key), cfg.noise_power_w, cfg.channel_bw_hz)
        assert v * RATE_UNIT >= cap * (1 - 1e-12)


def test_fiber_sources_are_silenced_when_allowed_to_transmit():
    cfg = ScenarioConfig(rows=1, cols=3, fiber_ids=[3], channels_mhz=[491.0],
                         fiber_can_transmit=True)
    net, gains = instance(cfg)
    assert build_milp(net, gains, cfg).family_counts()["fibertx"] == 2


def test_degenerate_all_fiber():
    cfg = ScenarioConfig(rows=1, cols=2, fiber_ids=[1, 2])
    net, gains = instance(cfg)
    with pytest.raises(DegenerateProblem):
        build_milp(net, gains, cfg)


def test_fixed_target_zero_is_feasible():
    cfg = line_config()
    net, gains = instance(cfg)
    prob = build_milp(net, gains, cfg, mode="fixed_target", target_bps=0.0)
    assert prob.lp.max_violation(np.zeros(prob.lp.n_vars)) == 0.0
    sol = branch_and_bound(prob.lp, SolverConfig(time_limit_s=30))
    assert sol.has_solution


def test_single_link_optimum_is_full_power_capacity(toy):
    cfg, net, gains = toy
    res = solve_epigraph(net, gains, cfg.replace(solver=SolverConfig(mode="epigraph")))
    assert res.status == "optimal"
    assert res.objective_bps / 1e6 == pytest.approx(TOY_CAPACITY_MBPS, abs=0.01)
    assert res.value_bps == pytest.approx(res.objective_bps, rel=1e-9)
    assert res.plan.links[0].power_w == pytest.approx(cfg.pmax_w)
    assert res.report.passed


def test_bisection_on_toy(toy):
    cfg, net, gains = toy
    res = bisection_feasible_rate(net, gains, cfg)
    assert res.value_bps == 96e6
    assert res.status == "optimal"
    assert res.report.passed


def test_probe_count_is_logarithmic(toy):
    cfg, net, gains = toy
    cfg = cfg.replace(solver=SolverConfig(heuristic_evaluations=0, time_limit_s=60))
    gran = TOY_CAPACITY_MBPS * 1e6 / 1024
    res = bisection_feasible_rate(net, gains, cfg, granularity_bps=gran)
    assert len(res.probes) <= 10
    assert res.value_bps <= TOY_CAPACITY_MBPS * 1e6
    assert res.value_bps >= TOY_CAPACITY_MBPS * 1e6 - gran - 1e3


def test_root_integral_instance_solves_in_one_node():
    lp = LpProblem()
    x = lp.add_var("x", 0, 1, obj=1.0, integer=True)
    y = lp.add_var("y", 0, 3, obj=0.5)
    lp.add_row("r", {x: 1.0, y: 1.0}, LE, 4.0)
    sol = branch_and_bound(lp)
    assert sol.status == "optimal" and sol.nodes == 1
    assert sol.objective == pytest.approx(2.5)


def test_infeasible_root():
    lp = LpProblem()
    x = lp.add_var("x", 0, 1, obj=1.0, integer=True)
    lp.add_row("r", {x: 1.0}, "G", 2.0)
    assert branch_and_bound(lp).status == "infeasible"


def test_relative_gap():
    assert relative_gap(10.0, 10.0) == 0.0
    assert relative_gap(11.0, 10.0) == pytest.approx(0.1)
    assert relative_gap(5.0, -math.inf) == math.inf


@pytest.mark.parametrize("channels,spacing", [((491.0, 527.0), 3.0), ((57.0, 671.0), 5.0),
                                              ((85.0, 491.0), 1.0)])
def test_branch_and_bound_matches_enumeration(channels, spacing):
    cfg = line_config(3, channels, spacing)
    net, gains = instance(cfg)
    prob = build_milp(net, gains, cfg)
    sol = branch_and_bound(prob.lp, SolverConfig(time_limit_s=60))
    ref, _ = brute_force_optimum(prob)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-9)
    assert sol.bound >= sol.objective - 1e-9
    root = solve_lp(prob.lp)
    assert root.objective >= sol.objective - 1e-9


def test_solution_vectors_satisfy_every_row():
    cfg = ScenarioConfig(rows=2, cols=2, fiber_ids=[4], channels_mhz=[491.0, 527.0],
                         geometry="clearance")
    net, gains = instance(cfg)
    prob = build_milp(net, gains, cfg)
    sol = branch_and_bound(prob.lp, SolverConfig(time_limit_s=60))
    x = sol.x
    assert prob.lp.max_violation(x) <= 1e-7
    for i in net.ids:
        for m in range(2):
            deg = sum(round(x[v]) for k, v in prob.x.items() if k[2] == m and i in k[:2])
            assert deg <= 1
    p_int = cfg.interference_threshold_w
    for (i, j, m), v in prob.x.items():
        if x[v] < 0.5:
            continue
        for (k, l, n), pv in prob.p.items():
            if n == m and k not in (i, j):
                assert x[pv] * gains.gain(k, j, m) <= p_int * (1 + 1e-6) + 1e-18


def test_time_limit_returns_incumbent_with_gap():
    cfg = ScenarioConfig(channels_mhz=[57.0, 79.0],
                         solver=SolverConfig(time_limit_s=3.0, heuristic_evaluations=200))
    net, gains = instance(cfg)
    res = solve_epigraph(net, gains, cfg)
    assert res.status == "feasible"
    assert res.plan is not None and res.report.passed
    assert math.isfinite(res.gap) and res.gap > 0
    assert res.wall_time < 20


@settings(max_examples=6, deadline=None)
@given(st.sampled_from([-120.0, -116.2, -100.0, -90.0]), st.floats(5.0, 40.0))
def test_weaker_interference_protection_never_hurts(p_int_dbm, delta):
    base = ScenarioConfig(rows=2, cols=2, spacing_km=1.0, fiber_ids=[4],
                          channels_mhz=[491.0, 527.0], geometry="clearance",
                          interference_threshold_dbm=p_int_dbm)
    looser = base.replace(interference_threshold_dbm=p_int_dbm + delta)
    vals = []
    for cfg in (base, looser):
        net, gains = instance(cfg)
        sol = branch_and_bound(build_milp(net, gains, cfg).lp, SolverConfig(time_limit_s=60))
        assert sol.status == "optimal"
        vals.append(sol.objective)
    assert vals[1] >= vals[0] - 1e-6 * max(1.0, abs(vals[0]))
