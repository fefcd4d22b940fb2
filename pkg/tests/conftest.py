import math

import pytest

from leotopo.constellation import ShellConfig
from leotopo.demand import load_stations


@pytest.fixture(scope="session")
def phase1():
    return ShellConfig.phase1()


@pytest.fixture(scope="session")
def small_shell():
    # 12×10 shell high enough that most neighbours are in range
    return ShellConfig(altitude=1_200_000.0, num_orbits=12, sats_per_orbit=10)


@pytest.fixture(scope="session")
def stations():
    return load_stations()


@pytest.fixture(scope="session")
def deg():
    return math.radians
