import pytest
from hypothesis import given, strategies as st

from wsbackhaul.config import ConfigError, TrafficParams
from wsbackhaul.traffic import (average_rate_bps, daily_volume_gb, demand_csv, density_for_demand,
                                device_table, per_cell_demand, project_devices)

R_AVG_130GB_KBPS = 401.2
SMARTPHONES_2017 = 2.986
TABLETS_2017 = 2.689


def test_average_rate():
    assert average_rate_bps(130) / 1e3 == pytest.approx(R_AVG_130GB_KBPS, abs=0.1)
    assert daily_volume_gb(130) == pytest.approx(4.33, abs=0.01)


def test_device_projection():
    assert project_devices(1.2, 0.20, 5) == pytest.approx(SMARTPHONES_2017, abs=1e-3)
    assert project_devices(0.5, 0.40, 5) == pytest.approx(TABLETS_2017, abs=1e-3)
    assert project_devices(0.7, 0.0, 11) == 0.7
    with pytest.raises(ConfigError):
        project_devices(1.0, 0.1, -1)
    names = [row[0] for row in device_table(TrafficParams())]
    assert "smartphones" in names and len(names) == 5


def test_cell_demand_example():
    d = per_cell_demand(TrafficParams(density_per_km2=60), 3.0)
    assert d.subscriptions == pytest.approx(140.4, abs=1e-9)
    assert d.demand_mbps == pytest.approx(56.3, abs=0.05)
    assert d.busy_rate_bps == pytest.approx(4 * d.avg_rate_bps)
    assert per_cell_demand(TrafficParams(density_per_km2=0), 3.0).demand_bps == 0.0
    with pytest.raises(ConfigError):
        per_cell_demand(TrafficParams(density_per_km2=60), 0.0)


def test_density_inverts_demand():
    p = TrafficParams()
    rho = density_for_demand(p, 3.0, 75e6)
    assert per_cell_demand(TrafficParams(density_per_km2=rho), 3.0).demand_bps == pytest.approx(75e6)


def test_demand_csv_rows():
    lines = demand_csv(TrafficParams(density_per_km2=60), [1, 2, 3]).splitlines()
    assert lines[0] == "l_km,population,subscriptions,demand_mbps"
    assert len(lines) == 4


@given(st.floats(0.0, 1e4), st.floats(0.1, 20.0))
def test_demand_quadratic_in_side(rho, l):
    p = TrafficParams(density_per_km2=rho)
    a = per_cell_demand(p, l).demand_bps
    assert per_cell_demand(p, 2 * l).demand_bps == pytest.approx(4 * a, rel=1e-12, abs=1e-9)


@given(st.floats(0.0, 1e4), st.floats(0.0, 10.0), st.floats(0.1, 10.0))
def test_demand_linear_in_density(rho, k, l):
    a = per_cell_demand(TrafficParams(density_per_km2=rho), l).demand_bps
    b = per_cell_demand(TrafficParams(density_per_km2=k * rho), l).demand_bps
    assert b == pytest.approx(k * a, rel=1e-12, abs=1e-9)


@given(st.floats(0.0, 1e3), st.floats(0.0, 10.0))
def test_demand_linear_in_volume(gb, k):
    a = per_cell_demand(TrafficParams(density_per_km2=50, monthly_gb_per_connection=gb), 2).demand_bps
    b = per_cell_demand(TrafficParams(density_per_km2=50, monthly_gb_per_connection=k * gb),
                        2).demand_bps
    assert b == pytest.approx(k * a, rel=1e-12, abs=1e-9)


@given(st.floats(0.0, 1e4))
def test_daily_volume_is_a_thirtieth(gb):
    assert daily_volume_gb(gb) == pytest.approx(gb / 30)
