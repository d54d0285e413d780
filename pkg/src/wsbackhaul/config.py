"""Declarative scenario description and JSON ingestion."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

WICHITA_CHANNELS_MHZ = (57.0, 79.0, 85.0, 491.0, 527.0, 533.0, 671.0)


class ConfigError(ValueError):
    """Raised for scenario inputs that violate their invariants."""


@dataclass
class DeviceClass:
    name: str
    base_per_household: float
    cagr: float
    years: int = 5


def default_devices() -> list[DeviceClass]:
    # 2012 devices per household and 2012-2017 CAGR
    return [
        DeviceClass("personal_computers", 1.2, -0.10),
        DeviceClass("smartphones", 1.2, 0.20),
        DeviceClass("tablets", 0.5, 0.40),
        DeviceClass("web_enabled_tv", 0.5, 0.30),
        DeviceClass("set_top_boxes", 1.0, 0.10),
    ]


@dataclass
class TrafficParams:
    density_per_km2: float = 0.0
    penetration: float = 0.78
    household_size: float = 3.0
    active_fraction: float = 0.25
    monthly_gb_per_connection: float = 130.0
    devices: list[DeviceClass] = field(default_factory=default_devices)

    def validate(self) -> None:
        if self.density_per_km2 < 0:
            raise ConfigError("traffic.density_per_km2 must be >= 0")
        if not 0.0 <= self.penetration <= 1.0:
            raise ConfigError("traffic.penetration must lie in [0, 1]")
        if not 0.0 < self.active_fraction <= 1.0:
            raise ConfigError("traffic.active_fraction must lie in (0, 1]")
        if self.household_size < 1:
            raise ConfigError("traffic.household_size must be >= 1")
        if self.monthly_gb_per_connection < 0:
            raise ConfigError("traffic.monthly_gb_per_connection must be >= 0")
        for dev in self.devices:
            if dev.years < 0:
                raise ConfigError(f"device {dev.name!r}: years must be >= 0")


@dataclass
class SolverConfig:
    """Knobs for the branch-and-bound search and the outer rate search."""

    mode: str = "granularity"  # or "epigraph"
    granularity_bps: float = 1e6
    gap: float = 1e-6
    time_limit_s: float = 1800.0
    node_limit: Optional[int] = None
    workers: int = 1
    seed: int = 0
    log_every: int = 0
    # schedule local search run before branch-and-bound; 0 disables it
    heuristic_evaluations: int = 3000

    def validate(self) -> None:
        if self.mode not in ("granularity", "epigraph"):
            raise ConfigError(f"solver.mode must be 'granularity' or 'epigraph', got {self.mode!r}")
        if self.granularity_bps <= 0:
            raise ConfigError("solver.granularity_bps must be > 0")
        if self.gap < 0:
            raise ConfigError("solver.gap must be >= 0")
        if self.time_limit_s <= 0:
            raise ConfigError("solver.time_limit_s must be > 0")
        if self.workers < 1:
            raise ConfigError("solver.workers must be >= 1")
        if self.heuristic_evaluations < 0:
            raise ConfigError("solver.heuristic_evaluations must be >= 0")


@dataclass
class ObstructionOverride:
    """Per-link obstruction geometry; distances in km from the transmitter."""

    i: int
    j: int
    d1_km: float
    obstruction_height_m: float


GEOMETRIES = ("blockage", "clearance")


@dataclass
class ScenarioConfig:
    rows: int = 3
    cols: int = 3
    spacing_km: float = 3.0
    fiber_ids: list[int] = field(default_factory=lambda: [1, 3, 7, 9])
    channels_mhz: list[float] = field(default_factory=lambda: list(WICHITA_CHANNELS_MHZ))
    pmax_w: float = 4.0
    noise_figure_db: float = 10.0
    gtx_db: float = 6.0
    grx_db: float = 6.0
    link_height_m: float = 30.0
    obstruction_height_m: float = 15.0
    # "blockage": the obstruction top sits obstruction_height_m above the path (h < 0);
    # "clearance": the path clears it by link_height_m - obstruction_height_m (h > 0)
    geometry: str = "blockage"
    channel_bw_hz: float = 6e6
    noise_psd_dbm_hz: float = -174.0
    # None -> 10 dB below the per-channel noise floor
    interference_threshold_dbm: Optional[float] = None
    pwl_step_db: float = 10.0
    clamp_diffraction: bool = True
    min_snr_db: Optional[float] = None
    fiber_can_transmit: bool = False
    interference_all_pairs: bool = False
    positions_km: Optional[list[list[float]]] = None
    obstructions: list[ObstructionOverride] = field(default_factory=list)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def n_towers(self) -> int:
        return self.rows * self.cols

    @property
    def noise_power_w(self) -> float:
        return 10 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.channel_bw_hz

    @property
    def noise_floor_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.channel_bw_hz)

    @property
    def interference_threshold_w(self) -> float:
        dbm = self.interference_threshold_dbm
        if dbm is None:
            dbm = self.noise_floor_dbm - 10.0
        return 10 ** ((dbm - 30.0) / 10.0)

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            raise ConfigError("grid must contain at least two towers (rows*cols >= 2)")
        if not self.fiber_ids:
            raise ConfigError("fiber_ids must be nonempty")
        for fid in self.fiber_ids:
            if not isinstance(fid, int) or not 1 <= fid <= self.n_towers:
                raise ConfigError(f"fiber id {fid!r} is outside 1..{self.n_towers}")
        if len(set(self.fiber_ids)) != len(self.fiber_ids):
            raise ConfigError("fiber_ids contains duplicates")
        if not self.spacing_km > 0:
            raise ConfigError("spacing_km must be > 0")
        if not self.pmax_w > 0:
            raise ConfigError("pmax_w must be > 0")
        if not self.channel_bw_hz > 0:
            raise ConfigError("channel_bw_hz must be > 0")
        if not self.channels_mhz:
            raise ConfigError("channels_mhz must be nonempty")
        if any(not f > 0 for f in self.channels_mhz):
            raise ConfigError("all channel frequencies must be > 0")
        if len(set(self.channels_mhz)) != len(self.channels_mhz):
            raise ConfigError("channels_mhz contains duplicates")
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry must be one of {', '.join(GEOMETRIES)}")
        if not self.pwl_step_db > 0:
            raise ConfigError("pwl_step_db must be > 0")
        if self.positions_km is not None:
            if len(self.positions_km) != self.n_towers:
                raise ConfigError(
                    f"positions_km lists {len(self.positions_km)} towers, grid has {self.n_towers}")
            if any(len(p) != 2 for p in self.positions_km):
                raise ConfigError("positions_km entries must be [x_km, y_km] pairs")
        for ob in self.obstructions:
            for tid in (ob.i, ob.j):
                if not 1 <= tid <= self.n_towers:
                    raise ConfigError(f"obstruction override references unknown tower {tid}")
        self.traffic.validate()
        self.solver.validate()

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    kwargs = dict(data)
    if cls is ScenarioConfig:
        if "traffic" in kwargs:
            kwargs["traffic"] = _build(TrafficParams, kwargs["traffic"], "traffic")
        if "solver" in kwargs:
            kwargs["solver"] = _build(SolverConfig, kwargs["solver"], "solver")
        if "obstructions" in kwargs:
            kwargs["obstructions"] = [
                _build(ObstructionOverride, o, f"obstructions[{k}]")
                for k, o in enumerate(kwargs["obstructions"])]
    elif cls is TrafficParams and "devices" in kwargs:
        kwargs["devices"] = [
            _build(DeviceClass, d, f"traffic.devices[{k}]") for k, d in enumerate(kwargs["devices"])]
    return cls(**kwargs)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "scenario")
    cfg.validate()
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data)
