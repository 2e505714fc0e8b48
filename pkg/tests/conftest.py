import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from mildns import GridSpec, random_divfree


@pytest.fixture(scope="session")
def grid8():
    return GridSpec(8)


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16)


@pytest.fixture(scope="session")
def rand16(grid16):
    return random_divfree(1.0, 7, 2.0, grid16)


@pytest.fixture(scope="session")
def rand8(grid8):
    return random_divfree(1.0, 7, 2.0, grid8)
