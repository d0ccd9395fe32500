import numpy as np
import pytest

from gcph.kan import GcphModel
from gcph.spline import Activation, KnotGrid


def random_activation(rng, G=5, K=3, lo=-1.5, hi=1.5, basis="silu"):
    grid = KnotGrid(lo, hi, G, K)
    return Activation(rng.normal(), rng.normal(), rng.normal(size=grid.num_basis), grid, basis)


def random_model(rng, V=2, G=5, K=3, centering=0.0):
    acts = tuple(random_activation(rng, G, K, lo=-1.5 - v * 0.1, hi=1.5 + v * 0.2) for v in range(V))
    return GcphModel(acts, tuple(f"x{v + 1}" for v in range(V)), centering)


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
