import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from awbounds.measures import random_tree

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_pair(seed: int, T: int | None = None, d: int = 1, max_children: int = 3):
    """Two random trees sharing (T, d); half the draws use a coarse state grid
    so that supports overlap and kernel minima are non-trivial."""
    rng = np.random.default_rng(seed)
    T = T or int(rng.integers(1, 4))
    grid = int(rng.choice([0, 2, 4]))
    mu = random_tree(rng, T, d, max_children, grid=grid or None)
    nu = random_tree(rng, T, d, max_children, grid=grid or None)
    return mu, nu


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# criterion number -> status line, filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (one test per criterion)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
