import math
import os

import pytest

from clt_transport import dist_core as dc
from clt_transport.settings import get_settings


@pytest.fixture(autouse=True, scope="session")
def clean_settings():
    """Keep CLT_* variables from the developer's shell out of the tests"""
    for key in list(os.environ):
        if key.startswith("CLT_"):
            os.environ.pop(key)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rademacher():
    return dc.rademacher()


@pytest.fixture
def std_normal():
    return dc.GaussianLaw(0.0, 1.0)


@pytest.fixture
def centered_poisson():
    def build(lam, mass_tolerance=None):
        return dc.center(dc.poisson(lam, mass_tolerance=mass_tolerance))
    return build


@pytest.fixture
def normalized_binomial():
    """Centered binomial(n, 1/2) scaled to unit variance."""
    def build(n):
        return dc.affine(dc.binomial(n, 0.5), 2.0 / math.sqrt(n), -math.sqrt(n))
    return build
