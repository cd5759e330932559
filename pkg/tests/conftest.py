import numpy as np
import pytest

from tsgsim.dynamics import GravityModel, OrbitalElements, ReferenceOrbit

# Reference ISS-like LEO and Molniya elements used across the suite.
LEO_ELEMENTS = OrbitalElements(
    sma=6798.281637, ecc=0.000551, inc=0.900516, raan=5.909781, argp=1.872335
)
MOLNIYA_ELEMENTS = OrbitalElements(
    sma=26646.680769, ecc=0.74, inc=1.096067, raan=0.0, argp=4.88692
)


@pytest.fixture(scope="session")
def gravity():
    return GravityModel()


@pytest.fixture(scope="session")
def leo_orbit(gravity):
    return ReferenceOrbit(LEO_ELEMENTS, gravity)


@pytest.fixture(scope="session")
def molniya_orbit(gravity):
    return ReferenceOrbit(MOLNIYA_ELEMENTS, gravity)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
