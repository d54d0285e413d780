import pytest

from wsbackhaul.config import ScenarioConfig, SolverConfig
from wsbackhaul.model import build_grid
from wsbackhaul.propagation import build_gain_table


def toy_config(**solver) -> ScenarioConfig:
    """Two towers 3 km apart, tower 2 on fiber, one 491 MHz channel, clear path."""
    scfg = SolverConfig(time_limit_s=60, **solver)
    return ScenarioConfig(rows=1, cols=2, spacing_km=3.0, fiber_ids=[2], channels_mhz=[491.0],
                          geometry="clearance", solver=scfg)


def line_config(n: int = 3, channels=(491.0, 527.0), spacing: float = 3.0, **kw) -> ScenarioConfig:
    kw.setdefault("geometry", "clearance")
    return ScenarioConfig(rows=1, cols=n, spacing_km=spacing, fiber_ids=[n],
                          channels_mhz=list(channels), **kw)


def instance(cfg: ScenarioConfig):
    net = build_grid(cfg)
    return net, build_gain_table(net, cfg)


@pytest.fixture
def toy():
    cfg = toy_config()
    net, gains = instance(cfg)
    return cfg, net, gains


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
