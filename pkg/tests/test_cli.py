import csv
import io
import json

import pytest

from wsbackhaul import cli
from wsbackhaul.cli import (EXIT_CONFIG, EXIT_DEGENERATE, EXIT_OK, SweepSpec, export_topology_dot,
                            reaches_fiber, sweep, sweep_cell, sweep_csv)
from wsbackhaul.repair import ActiveLink, Plan

from conftest import toy_config


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(d))
    return d


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg.to_dict()))
    return p


def test_plan_toy(tmp_path, outdir, capsys):
    path = write_config(tmp_path, toy_config())
    assert cli.main(["plan", str(path)]) == EXIT_OK
    assert "min rate 96.000000 Mbps" in capsys.readouterr().out
    doc = json.loads((outdir / "result.json").read_text())
    assert doc["min_rate_bps"] == 96e6
    assert doc["validation"]["passed"]
    assert doc["reaches_fiber"] == {"1": True}
    for name in ("topology.dot", "topology.png", "capacity_cuts.png"):
        assert (outdir / name).stat().st_size > 0


def test_plan_epigraph_flag(tmp_path, outdir):
    path = write_config(tmp_path, toy_config())
    assert cli.main(["plan", str(path), "--epigraph", "--time-limit", "30", "--seed", "1"]) == 0
    doc = json.loads((outdir / "result.json").read_text())
    assert doc["mode"] == "epigraph"
    assert doc["min_rate_bps"] / 1e6 == pytest.approx(96.54, abs=0.01)


def test_all_fiber_is_degenerate(tmp_path, outdir):
    path = write_config(tmp_path, toy_config().replace(fiber_ids=[1, 2]))
    assert cli.main(["plan", str(path)]) == EXIT_DEGENERATE


@pytest.mark.parametrize("body", ['{"fiber_ids": [12]}', '{"rows": ', '{"bogus": 1}'])
def test_bad_config(tmp_path, outdir, body):
    p = tmp_path / "bad.json"
    p.write_text(body)
    assert cli.main(["plan", str(p)]) == EXIT_CONFIG


def test_missing_config(tmp_path, outdir):
    assert cli.main(["gains", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == cli.EXIT_USAGE


def test_gains_and_demand(tmp_path, outdir, capsys):
    path = write_config(tmp_path, toy_config())
    assert cli.main(["gains", str(path)]) == EXIT_OK
    rows = list(csv.reader(io.StringIO((outdir / "gains.csv").read_text())))
    assert len(rows) == 1 + 2
    assert float(rows[1][5]) == pytest.approx(-93.80, abs=0.01)
    cfg = toy_config()
    cfg.traffic.density_per_km2 = 60
    path = write_config(tmp_path, cfg, "dem.json")
    assert cli.main(["demand", str(path), "--sizes", "1,3"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((outdir / "demand.csv").read_text())))
    assert [float(r["l_km"]) for r in rows] == [1.0, 3.0]
    assert float(rows[1]["demand_mbps"]) == pytest.approx(56.3, abs=0.05)
    assert (outdir / "devices.csv").exists() and (outdir / "demand.png").exists()
    assert cli.main(["demand", str(path), "--sizes", "0,x"]) == EXIT_CONFIG


def test_export_mps(tmp_path, outdir, capsys):
    path = write_config(tmp_path, toy_config())
    assert cli.main(["export-mps", str(path)]) == EXIT_OK
    from wsbackhaul.lp.mps import read_mps
    lp = read_mps((outdir / "model.mps").read_bytes())
    assert lp.has_var("x_1_2_0") and sum(lp.integer) == 1
    assert "degree: 2" in capsys.readouterr().out


def test_dot_all_zero_plan():
    text = export_topology_dot(Plan([], {i: 0.0 for i in range(2, 10)}, [1]), range(1, 10))
    assert text.count("[shape=") == 9
    assert "->" not in text
    assert "1 [shape=doublecircle]" in text


def test_dot_two_towers_and_ordering():
    links = [ActiveLink(3, 2, 1, 79.0, 1.0, 5e6), ActiveLink(2, 1, 0, 491.0, 4.0, 96e6)]
    plan = Plan(links, {2: 91e6, 3: 5e6}, [1])
    text = export_topology_dot(plan, [1, 2, 3])
    edges = [ln.strip() for ln in text.splitlines() if "->" in ln]
    assert edges == ['2 -> 1 [label="491 MHz / 96.000 Mbps"];',
                     '3 -> 2 [label="79 MHz / 5.000 Mbps"];']
    assert text == export_topology_dot(Plan(links[::-1], plan.supported_bps, [1]), [3, 2, 1])
    assert reaches_fiber(plan) == {2: True, 3: True}
    assert reaches_fiber(Plan(links[:1], plan.supported_bps, [1])) == {2: False, 3: False}


def small_spec() -> SweepSpec:
    return SweepSpec.from_dict({
        "spacings_km": [2, 3],
        "fiber_sets": [{"label": "end", "ids": [3]}, {"label": "both", "ids": [1, 3]}],
        "calibration": {"l_km": 3, "demand_mbps": 50},
        "base": {"rows": 1, "cols": 3, "channels_mhz": [491.0, 527.0], "geometry": "clearance",
                 "solver": {"time_limit_s": 30, "heuristic_evaluations": 100}},
    })


def test_sweep_rows_and_independence():
    spec = small_spec()
    rows = sweep(spec)
    assert [(r.l_km, r.fiber_set) for r in rows] == [(2, "end"), (2, "both"), (3, "end"),
                                                      (3, "both")]
    assert all(r.status != "error" for r in rows)
    for r in rows:
        assert r.feasible == (r.supported_bps >= r.demand_bps)
    for l in (2, 3):
        by = {r.fiber_set: r for r in rows if r.l_km == l}
        assert by["both"].supported_bps >= by["end"].supported_bps
    assert rows[2].demand_bps == pytest.approx(50e6)
    again = sweep_cell(spec, 3, "both", [1, 3])
    for a, b in ((rows[3], again),):
        assert (a.supported_bps, a.demand_bps, a.feasible, a.gap, a.status) == \
            (b.supported_bps, b.demand_bps, b.feasible, b.gap, b.status)
    text = sweep_csv(rows)
    assert text.splitlines()[0].split(",") == cli.SWEEP_COLUMNS
    assert len(text.splitlines()) == 5


def test_sweep_spec_validation():
    with pytest.raises(cli.ConfigError):
        SweepSpec.from_dict({"spacings_km": [], "fiber_sets": [{"label": "a", "ids": [1]}]})
    with pytest.raises(cli.ConfigError):
        SweepSpec.from_dict({"spacings_km": [2], "fiber_sets": [{"label": "a", "ids": [10]}]})
    with pytest.raises(cli.ConfigError):
        SweepSpec.from_dict({"spacings_km": [2], "fiber_sets": [{"ids": [1]}]})


def test_sweep_cell_records_errors():
    spec = small_spec()
    row = sweep_cell(spec, 2, "all", [1, 2, 3])
    assert row.status == "error" and "DegenerateProblem" in row.error
    assert not row.feasible


def test_sweep_verb(tmp_path, outdir):
    spec = {"spacings_km": [2], "fiber_sets": [{"label": "end", "ids": [2]}],
            "base": {"rows": 1, "cols": 2, "channels_mhz": [491.0],
                     "solver": {"time_limit_s": 30}}}
    p = tmp_path / "sweep.json"
    p.write_text(json.dumps(spec))
    assert cli.main(["sweep", str(p)]) == EXIT_OK
    assert len((outdir / "sweep.csv").read_text().splitlines()) == 2
    assert (outdir / "sweep.png").exists()
