"""Static figures for planning reports (written to files, Agg backend)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .traffic import per_cell_demand  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_demand(params, sizes_km: Sequence[float], path) -> Path:
    """Per-cell demand against cell side length."""
    ls = np.linspace(min(sizes_km), max(sizes_km), 200)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ls, [per_cell_demand(params, l).demand_mbps for l in ls], color="C0")
        ax.plot(sizes_km, [per_cell_demand(params, l).demand_mbps for l in sizes_km], "o",
                color="C0")
        ax.set_xlabel("cell side l (km)")
        ax.set_ylabel("demand per cell (Mbps)")
        ax.set_title(f"density {params.density_per_km2:g} /km$^2$")
        return _save(fig, path)


def plot_capacity_cuts(cuts, gain_linear: float, config, path) -> Path:
    """Exact link capacity against transmit power, with its tangent cuts."""
    noise, w = config.noise_power_w, config.channel_bw_hz
    p = np.linspace(0.0, config.pmax_w, 400)
    exact = w * np.log2(1.0 + p * gain_linear / noise) / 1e6
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c in cuts:
            ax.plot(p, (c.intercept + c.slope * p) / 1e6, color="0.6", lw=0.8)
        ax.plot(p, exact, color="C3", lw=1.8, label="W log2(1+s)")
        ax.set_ylim(0, exact[-1] * 1.15 if exact[-1] > 0 else 1)
        ax.set_xlabel("transmit power (W)")
        ax.set_ylabel("rate (Mbps)")
        ax.legend(loc="lower right", title=f"{len(cuts)} tangent cuts")
        return _save(fig, path)


def plot_topology(net, plan, path) -> Path:
    """Towers, fiber access points and the scheduled links of a plan."""
    fiber = set(plan.fiber) if plan is not None else set(net.fiber)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        for lk in sorted(plan.links if plan else [], key=lambda lk: lk.key):
            (x0, y0), (x1, y1) = net.position(lk.i), net.position(lk.j)
            ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                        arrowprops=dict(arrowstyle="-|>", color=f"C{lk.channel % 10}", lw=1.2,
                                        shrinkA=9, shrinkB=9))
            ax.text((x0 + x1) / 2, (y0 + y1) / 2,
                    f"{lk.f_mhz:g} MHz\n{lk.rate_bps / 1e6:.1f} Mbps",
                    fontsize=6, ha="center", va="center",
                    bbox=dict(fc="white", ec="none", alpha=0.7, pad=0.5))
        for t in net.towers:
            on_fiber = t.id in fiber
            ax.plot(t.x_km, t.y_km, "s" if on_fiber else "o", ms=13,
                    color="k" if on_fiber else "white", mec="k")
            ax.text(t.x_km, t.y_km, str(t.id), ha="center", va="center", fontsize=7,
                    color="white" if on_fiber else "k")
        ax.set_aspect("equal")
        ax.margins(0.15)
        ax.set_xlabel("x (km)")
        ax.set_ylabel("y (km)")
        if plan is not None:
            ax.set_title(f"min supported rate {plan.min_rate_bps / 1e6:.2f} Mbps")
        return _save(fig, path)


def plot_sweep(rows, path) -> Path:
    """Supported rate per (l, fiber set) as grouped bars, demand as markers."""
    sizes = sorted({r.l_km for r in rows})
    labels = list(dict.fromkeys(r.fiber_set for r in rows))
    width = 0.8 / max(len(labels), 1)
    by_key = {(r.l_km, r.fiber_set): r for r in rows}
    xs = np.arange(len(sizes))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, lab in enumerate(labels):
            vals = [by_key[(l, lab)].supported_bps / 1e6 if (l, lab) in by_key
                    and math.isfinite(by_key[(l, lab)].supported_bps) else 0.0 for l in sizes]
            ax.bar(xs + (k - (len(labels) - 1) / 2) * width, vals, width, label=lab)
        dem = [next((r.demand_bps for r in rows if r.l_km == l), math.nan) / 1e6 for l in sizes]
        ax.plot(xs, dem, "k_", ms=28, mew=2, label="demand")
        ax.set_xticks(xs, [f"{l:g}" for l in sizes])
        ax.set_xlabel("cell side l (km)")
        ax.set_ylabel("rate per cell (Mbps)")
        ax.legend()
        return _save(fig, path)
