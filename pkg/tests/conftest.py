import pytest

from wolffpot import PotentialParams, make_counterexample, make_powerlaw_example


@pytest.fixture(scope="session")
def powerlaw():
    return make_powerlaw_example(3, 1.0, 0.5, 1.5)


@pytest.fixture(scope="session")
def counterexample():
    return make_counterexample(3, 1.0, 0.5, 2.0)


@pytest.fixture(scope="session")
def frac_params():
    """n=3, 2 alpha = 1, p=2, q=1/2."""
    return PotentialParams(3, 0.5, 2.0, 0.5)
