import functools

import pytest

from cirfpt.cir import CASES
from cirfpt.expansion import expansion_from_params


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")


@functools.lru_cache(maxsize=None)
def _expansion(case, n):
    return expansion_from_params(CASES[case], n_fixed=n)


@pytest.fixture(scope="session")
def expansion():
    """Factory ``expansion(case, n=None)`` with caching across the session."""
    return _expansion


@functools.lru_cache(maxsize=None)
def _mc(case, method="milstein", n_paths=10_000, dt=1e-3, seed=2024):
    from cirfpt.montecarlo import SimulationConfig, simulate

    return simulate(CASES[case], SimulationConfig(dt=dt, n_paths=n_paths, seed=seed, method=method))


@pytest.fixture(scope="session")
def mc_sample():
    """Factory ``mc_sample(case, method, n_paths, dt, seed)`` cached across the session."""
    return _mc


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
