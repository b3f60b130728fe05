import math

import numpy as np
import pytest

from smetric import core
from smetric import sequences as sq

SQRT8 = 2.0 * math.sqrt(2.0)


@pytest.fixture(scope="session")
def spec():
    return core.norm_sum("euclidean")


@pytest.fixture(scope="session")
def ex31():
    return sq.paper_example_3_1()


@pytest.fixture(scope="session")
def ex41():
    return sq.paper_example_4_1()


def isqrt_floor(n):
    return math.isqrt(int(n))


def s_direct(x, y, z):
    """Independent evaluation of ||x - z|| + ||y - z|| with plain Python floats."""
    dx = math.sqrt(sum((a - c) ** 2 for a, c in zip(x, z)))
    dy = math.sqrt(sum((b - c) ** 2 for b, c in zip(y, z)))
    return dx + dy


def as_tuple(p):
    return tuple(float(c) for c in np.asarray(p))
