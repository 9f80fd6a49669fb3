from fractions import Fraction

import pytest

from cesaro import KernelCache
from cesaro.space import GroundSet, Space


@pytest.fixture(scope="session")
def cache():
    return KernelCache(k_max=6, n_max=400)


@pytest.fixture(scope="session")
def line():
    return Space(1)


@pytest.fixture(scope="session")
def lattice1():
    return GroundSet.lattice(1)


def F(num, den=1):
    return Fraction(num, den)
