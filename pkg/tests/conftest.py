import numpy as np
import pytest

from tullock_brd import ContestConfig, CostSpec


def grid_argmax(cost, n, s_minus, lo=0.0, hi=2.0, spacing=1e-6):
    """Brute-force maximiser of the contest utility on an evenly spaced grid."""
    z = np.arange(lo, hi + spacing / 2, spacing)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(z + s_minus > 0, z / (z + s_minus), 1.0 / n) - cost.value(z)
    return float(z[int(np.argmax(u))])


@pytest.fixture
def linear2():
    return ContestConfig.normalized_homogeneous(2, CostSpec.linear())


@pytest.fixture
def linear3():
    return ContestConfig.normalized_homogeneous(3, CostSpec.linear())
