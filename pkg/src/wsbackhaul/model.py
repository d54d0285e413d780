"""Tower grid geometry and candidate links."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import ConfigError, ScenarioConfig


@dataclass(frozen=True)
class Tower:
    id: int
    x_km: float
    y_km: float


@dataclass(frozen=True)
class Network:
    towers: tuple[Tower, ...]
    fiber: frozenset[int]
    channels_mhz: tuple[float, ...]
    candidate_links: tuple[tuple[int, int], ...] = field(default=())

    @property
    def ids(self) -> list[int]:
        return [t.id for t in self.towers]

    @property
    def non_fiber(self) -> list[int]:
        return [t.id for t in self.towers if t.id not in self.fiber]

    @property
    def n(self) -> int:
        return len(self.towers)

    def position(self, i: int) -> tuple[float, float]:
        t = self.towers[i - 1]
        return t.x_km, t.y_km

    def distance(self, i: int, j: int) -> float:
        xi, yi = self.position(i)
        xj, yj = self.position(j)
        return math.hypot(xi - xj, yi - yj)

    def with_links(self, links) -> "Network":
        return Network(self.towers, self.fiber, self.channels_mhz,
                       tuple(sorted(set(links))))


def build_grid(config: ScenarioConfig, fiber_can_transmit: bool | None = None) -> Network:
    """Towers at cell centers, numbered row-major from 1.

    All ordered pairs with a non-fiber source become candidate links
    (fiber sources too when ``fiber_can_transmit``).
    """
    config.validate()
    n = config.n_towers
    towers = []
    for k in range(n):
        row, col = divmod(k, config.cols)
        if config.positions_km is not None:
            x, y = config.positions_km[k]
        else:
            x = (col + 0.5) * config.spacing_km
            y = (row + 0.5) * config.spacing_km
        towers.append(Tower(k + 1, float(x), float(y)))
    fiber = frozenset(config.fiber_ids)
    for fid in fiber:
        if not 1 <= fid <= n:
            raise ConfigError(f"fiber id {fid} is outside 1..{n}")
    if fiber_can_transmit is None:
        fiber_can_transmit = config.fiber_can_transmit
    links = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)
             if i != j and (fiber_can_transmit or i not in fiber)]
    return Network(tuple(towers), fiber, tuple(config.channels_mhz), tuple(links))


def candidate_links(net: Network, gains, config: ScenarioConfig,
                    min_snr_db: float | None = None) -> Network:
    """Drop links whose best full-power SNR over all channels is below ``min_snr_db``.

    ``None`` or ``-inf`` keeps every link.
    """
    if min_snr_db is None or min_snr_db == -math.inf:
        return net
    noise_dbm = config.noise_floor_dbm
    p_dbm = 10 * math.log10(config.pmax_w) + 30
    keep = []
    for (i, j) in net.candidate_links:
        if i in net.fiber and not config.fiber_can_transmit:
            continue
        best = max(p_dbm + gains[(i, j, m)].gain_db - noise_dbm
                   for m in range(len(net.channels_mhz)))
        if best >= min_snr_db:
            keep.append((i, j))
    return net.with_links(keep)


def grid_symmetries(rows: int, cols: int) -> list[tuple[int, ...]]:
    """Rotations and reflections of a ``rows x cols`` grid as id permutations.

    Each permutation maps a 1-based tower id (row-major) to the id of the cell
    it lands on; square grids have 8, rectangular ones 4.
    """
    maps = [lambda r, c: (r, c),
            lambda r, c: (rows - 1 - r, c),
            lambda r, c: (r, cols - 1 - c),
            lambda r, c: (rows - 1 - r, cols - 1 - c)]
    if rows == cols:
        maps += [lambda r, c: (c, r),
                 lambda r, c: (cols - 1 - c, r),
                 lambda r, c: (c, rows - 1 - r),
                 lambda r, c: (cols - 1 - c, rows - 1 - r)]
    perms = []
    for f in maps:
        perm = []
        for k in range(rows * cols):
            r, c = f(*divmod(k, cols))
            perm.append(r * cols + c + 1)
        perms.append(tuple(perm))
    return perms


def relabel_config(config: ScenarioConfig, perm) -> ScenarioConfig:
    """Same physical layout with tower ``k`` renamed ``perm[k - 1]``."""
    from dataclasses import replace
    n = config.n_towers
    if sorted(perm) != list(range(1, n + 1)):
        raise ConfigError("relabeling must be a permutation of the tower ids")
    base = build_grid(config)
    positions: list = [None] * n
    for t in base.towers:
        positions[perm[t.id - 1] - 1] = [t.x_km, t.y_km]
    fiber = sorted(perm[f - 1] for f in config.fiber_ids)
    obstructions = [replace(ob, i=perm[ob.i - 1], j=perm[ob.j - 1]) for ob in config.obstructions]
    return replace(config, positions_km=positions, fiber_ids=fiber, obstructions=obstructions)
