import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracsemi.grid import TorusGrid
from fracsemi.potentials import _smooth_bump

settings.register_profile(
    "fracsemi", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("fracsemi")


@pytest.fixture(scope="session")
def grid1d():
    return TorusGrid(1, 16.0, 256)


@pytest.fixture(scope="session")
def grid2d():
    return TorusGrid(2, 16.0, 64)


def smooth_random(grid, seed, amplitude=1.0, count=3):
    """Nonnegative sum of smooth compact bumps: resolved, so positivity holds to roundoff."""
    rng = np.random.default_rng(seed)
    v = np.zeros(grid.shape)
    for _ in range(count):
        center = rng.uniform(-grid.length / 2, grid.length / 2, size=grid.dim)
        v += rng.uniform(0.1, amplitude) * _smooth_bump(grid.periodic_distance(center), rng.uniform(1.0, 3.0))
    return v
