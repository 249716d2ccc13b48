import numpy as np
import pytest

from wate_tmle.model import Dataset, NuisanceValues

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def two_point():
    """The two-point ATO instance used throughout the hand-computed examples."""
    return NuisanceValues(np.array([0.8, 0.6]), np.array([0.4, 0.3]), np.array([0.5, 0.25]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_values(rng, m, lo=0.1, hi=0.9):
    return NuisanceValues(*(rng.uniform(lo, hi, m) for _ in range(3)))


def random_fold(rng, values: NuisanceValues, d=1):
    m = values.m
    X = rng.random((m, d))
    a = (rng.random(m) < values.e).astype(int)
    q = np.where(a == 1, values.q1, values.q0)
    y = (rng.random(m) < q).astype(int)
    return Dataset(X, a, y)
