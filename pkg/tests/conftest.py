import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def normal_1d(rng):
    return rng.normal(3.0, 2.0, size=(10_000, 1))


def ulps_apart(a: float, b: float) -> int:
    """Distance in units in the last place between two finite doubles."""
    ia = int(np.array(a, dtype=np.float64).view(np.int64))
    ib = int(np.array(b, dtype=np.float64).view(np.int64))
    # map the sign-magnitude encoding onto a monotone integer line
    if ia < 0:
        ia = -(ia & 0x7FFFFFFFFFFFFFFF)
    if ib < 0:
        ib = -(ib & 0x7FFFFFFFFFFFFFFF)
    return abs(ia - ib)
