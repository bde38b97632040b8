import numpy as np
import pytest

from yinyang.geometry import GridSpec, ShellExtents, build_domain


@pytest.fixture
def extents():
    return ShellExtents(1.0, 2.0, 0.1)


@pytest.fixture
def small_domain(extents):
    return build_domain(extents, GridSpec(6, 12, 24))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
