"""Shared fixtures: small worlds, maps and parameter sets"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from exploration_engine.local_map import FREE, LocalMap  # noqa: E402
from exploration_engine.world import load_map  # noqa: E402


def _room_text(width: int, height: int) -> str:
    rows = ['#' * width]
    rows += ['#' + '.' * (width - 2) + '#' for _ in range(height - 2)]
    rows += ['#' * width]
    return f"{width} {height}\n" + '\n'.join(rows) + '\n'


@pytest.fixture
def room_text():
    """Factory: closed empty room in map-file format"""
    return _room_text


@pytest.fixture
def room_grid():
    """Factory: closed empty room as a GroundTruthGrid"""
    def make(width: int = 21, height: int = 21, resolution: float = 0.1):
        return load_map(_room_text(width, height), resolution)
    return make


@pytest.fixture
def free_map():
    """Factory: LocalMap with every cell known free"""
    def make(width: int, height: int, resolution: float = 0.1):
        local = LocalMap(width, height, resolution)
        local.cells[:] = FREE
        return local
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
