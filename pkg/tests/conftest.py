import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from realized_laplace import CIRSpec, PathGrid, RngStream, StableSpec, simulate_model

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DN = 1.0 / 78


@pytest.fixture(scope="session")
def const_scale_path():
    """Pure stable Levy path, sigma = 1, beta = 1.7, T = 1000 days, 78 per day."""
    cir = CIRSpec(sigma_vol=0.0, v0=1.0)
    return simulate_model(StableSpec(1.7), cir, 1000, 78, RngStream(20240601, 0))


@pytest.fixture(scope="session")
def model_path():
    """One path of the simulation design (stable driver), T = 300 days."""
    return simulate_model(StableSpec(1.7), CIRSpec(), 300, 78, RngStream(99, 3))


def random_path(seed: int, n: int = 400, delta_n: float = DN, scale: float = 1.0) -> PathGrid:
    gen = np.random.default_rng(seed)
    return PathGrid.from_increments(scale * gen.standard_t(3, size=n) * delta_n**0.6, delta_n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
