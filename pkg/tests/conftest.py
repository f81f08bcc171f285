import math
from pathlib import Path

import numpy as np
import pytest

from modspace.grid import make_grid
from modspace.harness.initial import gaussian as gaussian_field
from modspace.settings import get_settings
from modspace.wpt import Window

EXPERIMENTS_DIR = Path(__file__).resolve().parents[1] / "experiments"


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for key in ("MODSPACE_THREADS", "MODSPACE_T_MAX", "MODSPACE_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def grid():
    return make_grid(1, [128], [16.0])


@pytest.fixture
def fine_grid():
    return make_grid(1, [512], [32.0])


@pytest.fixture
def square_grid():
    return make_grid(1, [256], [math.sqrt(256 * math.pi / 2)])


@pytest.fixture
def gaussian(grid):
    return gaussian_field(grid)


@pytest.fixture
def window(grid):
    return Window(gaussian_field(grid))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def experiments_dir():
    return EXPERIMENTS_DIR
