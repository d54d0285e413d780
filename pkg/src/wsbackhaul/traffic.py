"""Per-cell backhaul demand from subscriber counts and monthly usage."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

from .config import ConfigError, TrafficParams

SECONDS_PER_MONTH = 30 * 86400
DAYS_PER_MONTH = 30


def project_devices(base: float, cagr: float, years: float) -> float:
    """Devices per household after compounding ``cagr`` for ``years``."""
    if years < 0:
        raise ConfigError("years must be >= 0")
    return base * (1.0 + cagr) ** years


def average_rate_bps(monthly_gb: float) -> float:
    """Average rate of one connection that moves ``monthly_gb`` per 30-day month."""
    return monthly_gb * 1e9 * 8 / SECONDS_PER_MONTH


def daily_volume_gb(monthly_gb: float) -> float:
    return monthly_gb / DAYS_PER_MONTH


@dataclass(frozen=True)
class CellDemand:
    l_km: float
    population: float
    subscriptions: float
    avg_rate_bps: float      # per subscription
    demand_bps: float        # aggregate over the cell
    active_users: float
    busy_rate_bps: float     # per active subscriber

    @property
    def demand_mbps(self) -> float:
        return self.demand_bps / 1e6


def per_cell_demand(params: TrafficParams, l_km: float) -> CellDemand:
    """Aggregate demand of a square cell of side ``l_km``.

    A quarter of subscribers being active at once (by default) only changes
    how the same volume is spread: the busy rate per active subscriber rises
    by 1/active_fraction while the aggregate stays subscriptions * R_avg.
    """
    if not l_km > 0:
        raise ConfigError("l_km must be > 0")
    population = params.density_per_km2 * l_km * l_km
    subs = population * params.penetration / params.household_size
    r_avg = average_rate_bps(params.monthly_gb_per_connection)
    active = subs * params.active_fraction
    busy = r_avg / params.active_fraction if params.active_fraction > 0 else 0.0
    return CellDemand(l_km, population, subs, r_avg, subs * r_avg, active, busy)


def device_table(params: TrafficParams) -> list[tuple[str, float, float]]:
    """(name, base, projected) devices per household."""
    return [(d.name, d.base_per_household, project_devices(d.base_per_household, d.cagr, d.years))
            for d in params.devices]


def density_for_demand(params: TrafficParams, l_km: float, demand_bps: float) -> float:
    """Population density that makes a cell of side ``l_km`` demand ``demand_bps``."""
    per_person = params.penetration / params.household_size * average_rate_bps(
        params.monthly_gb_per_connection)
    if per_person <= 0:
        raise ConfigError("demand does not depend on density with these parameters")
    return demand_bps / (per_person * l_km * l_km)


def demand_csv(params: TrafficParams, sizes_km: Iterable[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l_km", "population", "subscriptions", "demand_mbps"])
    for l in sizes_km:
        d = per_cell_demand(params, l)
        w.writerow([repr(float(l)), f"{d.population:.6f}", f"{d.subscriptions:.6f}",
                    f"{d.demand_mbps:.6f}"])
    return buf.getvalue()
