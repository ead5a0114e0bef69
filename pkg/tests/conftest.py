"""Shared fixtures: the bundled benchmark configuration and its closed-loop runs.

The benchmark scenario (3 mm step, catalog plant constants) is expensive at
dt = 1 us, so the suite shares two session-scoped runs: the standard 0.5 s
run (timed) and a 1.5 s run that reaches steady state.
"""

from __future__ import annotations

import time
from dataclasses import replace

import pytest

from emasim import certify_gains, run
from emasim.config import find_config, load_config


@pytest.fixture(scope="session")
def benchmark_config():
    return load_config(find_config("step3mm"))


@pytest.fixture(scope="session")
def benchmark_plant(benchmark_config):
    return benchmark_config.plant


@pytest.fixture(scope="session")
def benchmark_gains(benchmark_config):
    return benchmark_config.gains


@pytest.fixture(scope="session")
def benchmark_cert(benchmark_config):
    return certify_gains(
        benchmark_config.gains,
        benchmark_config.plant,
        benchmark_config.scenario.reference.max_abs(),
    )


@pytest.fixture(scope="session")
def benchmark_run(benchmark_config, benchmark_cert):
    """(trajectory, wall_seconds) for the standard 0.5 s benchmark run."""
    started = time.perf_counter()
    traj = run(benchmark_config.scenario, benchmark_cert)
    return traj, time.perf_counter() - started


@pytest.fixture(scope="session")
def benchmark_run_long(benchmark_config, benchmark_cert):
    """The benchmark scenario held for 1.5 s, deep into steady state."""
    scenario = replace(benchmark_config.scenario, duration=1.5)
    return run(scenario, benchmark_cert)
