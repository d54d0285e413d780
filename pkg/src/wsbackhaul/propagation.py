"""ITU terrain link-gain model and SNR helpers.

Distances are in km, frequencies in GHz unless a name says otherwise,
heights and Fresnel radii in meters.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .config import ScenarioConfig


class PropagationError(ValueError):
    pass


def free_space_loss(d_km: float, f_ghz: float) -> float:
    if not d_km > 0 or not f_ghz > 0:
        raise PropagationError(f"free_space_loss needs positive inputs, got d={d_km}, f={f_ghz}")
    return 20.0 * math.log10(d_km) + 20.0 * math.log10(1000.0 * f_ghz) + 32.44


def fresnel_radius(d1_km: float, d2_km: float, f_ghz: float, d_km: float) -> float:
    """Radius of the first Fresnel zone at the obstruction, in meters."""
    if d1_km < 0 or d2_km < 0 or not f_ghz > 0 or not d_km > 0:
        raise PropagationError("fresnel_radius needs nonnegative d1, d2 and positive f, d")
    if abs(d1_km + d2_km - d_km) > 1e-9 * d_km:
        raise PropagationError(f"d1 + d2 = {d1_km + d2_km} does not match d = {d_km}")
    return 17.3 * math.sqrt(d1_km * d2_km / (f_ghz * d_km))


def diffraction_loss(h_m: float, f1_m: float, clamp: bool = True) -> float:
    """Excess loss from the dominant obstruction.

    ``h_m > 0`` means the line of sight clears the obstruction by ``h_m``.
    """
    if not f1_m > 0:
        raise PropagationError("Fresnel radius must be positive")
    raw = -20.0 * h_m / f1_m + 10.0
    return max(raw, 0.0) if clamp else raw


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class LinkGainEntry:
    d_km: float
    d1_km: float
    d2_km: float
    h_m: float
    f1_m: float
    fsl_db: float
    ad_db: float
    pl_db: float
    gain_db: float

    @property
    def gain_linear(self) -> float:
        return db_to_linear(self.gain_db)


def link_gain(d_km: float, f_ghz: float, noise_figure_db: float, gtx_db: float, grx_db: float,
              h_m: float, d1_km: Optional[float] = None, clamp: bool = True) -> LinkGainEntry:
    if d_km < 1e-3:
        raise PropagationError(f"link distance {d_km} km is below 1 m")
    if d1_km is None:
        d1_km = d_km / 2.0
    d2_km = d_km - d1_km
    f1 = fresnel_radius(d1_km, d2_km, f_ghz, d_km)
    if f1 > 0:
        ad = diffraction_loss(h_m, f1, clamp)
    else:
        # obstruction at an endpoint: no Fresnel zone left to block
        ad = 0.0
    fsl = free_space_loss(d_km, f_ghz)
    pl = fsl + ad
    gain = -pl - noise_figure_db + gtx_db + grx_db
    return LinkGainEntry(d_km=d_km, d1_km=d1_km, d2_km=d2_km, h_m=h_m, f1_m=f1,
                         fsl_db=fsl, ad_db=ad, pl_db=pl, gain_db=gain)


def snr(p_w: float, gain_linear: float, noise_w: float) -> float:
    """Linear SNR ``p*g/(N0*W)``; ``noise_w`` is the in-band noise power."""
    if p_w < 0:
        raise PropagationError("transmit power must be >= 0")
    return p_w * gain_linear / noise_w


def snr_db(p_w: float, gain_db: float, n0_dbm_hz: float, w_hz: float) -> float:
    return watts_to_dbm(p_w) + gain_db - (n0_dbm_hz + 10.0 * math.log10(w_hz))


def capacity_bps(p_w: float, gain_linear: float, noise_w: float, w_hz: float) -> float:
    return w_hz * math.log2(1.0 + snr(p_w, gain_linear, noise_w))


class LinkGainTable:
    """Gains for every ordered tower pair on every channel."""

    def __init__(self, entries: dict[tuple[int, int, int], LinkGainEntry],
                 channels_mhz: list[float]):
        self.entries = entries
        self.channels_mhz = list(channels_mhz)

    def __getitem__(self, key: tuple[int, int, int]) -> LinkGainEntry:
        return self.entries[key]

    def __iter__(self) -> Iterator[tuple[int, int, int]]:
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def gain(self, i: int, j: int, m: int) -> float:
        return self.entries[(i, j, m)].gain_linear

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "f_mhz", "fsl_db", "ad_db", "gain_db"])
        for (i, j, m) in self:
            e = self.entries[(i, j, m)]
            w.writerow([i, j, f"{self.channels_mhz[m]:g}", f"{e.fsl_db:.6f}",
                        f"{e.ad_db:.6f}", f"{e.gain_db:.6f}"])
        return buf.getvalue()


def signed_clearance(link_height_m: float, obstruction_height_m: float,
                     geometry: str = "blockage") -> float:
    """Signed clearance h fed to :func:`diffraction_loss`.

    "clearance" treats both heights as above a common ground, so the path
    clears the obstruction by their difference.  "blockage" reads the
    obstruction height as how far the obstruction rises above the path.
    """
    if geometry == "clearance":
        return link_height_m - obstruction_height_m
    if geometry == "blockage":
        return -obstruction_height_m
    raise PropagationError(f"unknown geometry {geometry!r}")


def build_gain_table(net, config: ScenarioConfig) -> LinkGainTable:
    overrides = {(o.i, o.j): o for o in config.obstructions}
    entries = {}
    for i in net.ids:
        for j in net.ids:
            if i == j:
                continue
            d = net.distance(i, j)
            ob = overrides.get((i, j))
            if ob is None and (j, i) in overrides:
                # mirror a one-way override so the pair stays reciprocal
                o = overrides[(j, i)]
                ob = type(o)(i=i, j=j, d1_km=d - o.d1_km, obstruction_height_m=o.obstruction_height_m)
            obs_h = config.obstruction_height_m if ob is None else ob.obstruction_height_m
            d1 = None if ob is None else ob.d1_km
            h = signed_clearance(config.link_height_m, obs_h, config.geometry)
            for m, f_mhz in enumerate(config.channels_mhz):
                entries[(i, j, m)] = link_gain(
                    d, f_mhz / 1000.0, config.noise_figure_db, config.gtx_db, config.grx_db,
                    h, d1, config.clamp_diffraction)
    return LinkGainTable(entries, config.channels_mhz)
