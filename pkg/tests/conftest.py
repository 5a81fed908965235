"""Shared, session-cached PDE runs.

The expensive scenarios are simulated once and reused by the module tests
and the acceptance suite.
"""

from dataclasses import replace

import numpy as np
import pytest

from rdspike import harness
from rdspike.integrator import IntegratorConfig

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fig1s_long():
    """Reference spike run to t = 30 with diagnostics every 0.25."""
    cfg = harness.preset_config("Fig1s")
    times = tuple(np.round(np.arange(0.25, 30.0, 0.25), 10))
    cfg = replace(cfg, integrator=IntegratorConfig(dt=2.5e-4, t_end=30.0, snapshot_times=times))
    snaps, diag = harness.run_scenario(cfg)
    return cfg, snaps, diag


@pytest.fixture(scope="session")
def spike_position_runs():
    out = []
    for cfg in harness.spike_position_configs():
        snaps, diag = harness.run_scenario(cfg, keep_snapshots=False)
        out.append((cfg, snaps[-1], diag))
    return out


@pytest.fixture(scope="session")
def spike_count_runs():
    out = []
    for cfg in harness.spike_count_configs():
        snaps, diag = harness.run_scenario(cfg, keep_snapshots=False)
        out.append((cfg, snaps[-1], diag))
    return out


@pytest.fixture(scope="session")
def cosxx_run():
    cfg = harness.preset_config("CosXX")
    cfg = replace(cfg, integrator=replace(cfg.integrator, t_end=10.0, snapshot_times=tuple(0.5 * i for i in range(1, 20))))
    snaps, diag = harness.run_scenario(cfg)
    return cfg, snaps, diag


@pytest.fixture(scope="session")
def convergence_preset_study():
    return harness.convergence_study(harness.preset_config("ConvergenceSisp"))
