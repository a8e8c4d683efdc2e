"""Shared fixtures: rotation numbers, test maps and numeric settings."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cohomolib.arithmetic import from_partial_quotients, parse_alpha, squaring_quotients
from src.cohomolib.circlemap import make_family
from src.cohomolib.models import NumericsConfig

# a_{n+1} = a_n^2: q = 1, 1, 3, 13, 211, 54029
LIOUVILLE_QUOTIENTS = squaring_quotients(seed=2, depth=6)


@pytest.fixture(scope="session")
def numerics():
    return NumericsConfig(grid_size=1024, max_iter=20_000)


@pytest.fixture(scope="session")
def golden_cf():
    return parse_alpha("golden", depth=24)


@pytest.fixture(scope="session")
def liouville_cf():
    return from_partial_quotients(LIOUVILLE_QUOTIENTS)


@pytest.fixture(scope="session")
def rotation_golden(numerics, golden_cf):
    return make_family("rotation", {"rho": golden_cf}, numerics)


@pytest.fixture(scope="session")
def arnold_golden(numerics, golden_cf):
    return make_family("arnold", {"eps": 0.5, "rho": golden_cf}, numerics)


@pytest.fixture(scope="session")
def arnold_liouville(liouville_cf):
    # orbit comparisons must run past q_5 = 54029 to pin the quotients used at level 4
    config = NumericsConfig(grid_size=1024, max_iter=60_000)
    return make_family("arnold", {"eps": 0.25, "rho": liouville_cf}, config)
