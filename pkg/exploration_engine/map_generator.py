"""
map_generator.py - Seeded closed rooms with rectangular obstacles
"""

from typing import Tuple

import numpy as np
from scipy import ndimage

import config
from utils import GridValidator
from utils.logger import setup_logging
from .world import GroundTruthGrid, load_map

logger = setup_logging(__name__)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class MapGenerationError(RuntimeError):
    pass


def free_region_connected(cells: np.ndarray) -> bool:
    """Flood-fill check that all free cells form one 4-connected region"""
    _, count = ndimage.label(~cells, structure=FOUR_CONNECTED)
    return count <= 1


def _try_generate(width: int, height: int, density: float, rng: np.random.Generator) -> Tuple[np.ndarray, bool]:
    cells = np.zeros((height, width), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True

    interior = (width - 2) * (height - 2)
    target = int(round(density * interior))
    if target == 0:
        return cells, True

    max_side = max(1, min(width - 2, height - 2) // 5)
    placed = 0
    for _ in range(20 * target + 100):
        if placed >= target:
            break
        rw, rh = (int(v) for v in rng.integers(1, max_side + 1, size=2))
        x0 = int(rng.integers(1, width - 1 - rw + 1))
        y0 = int(rng.integers(1, height - 1 - rh + 1))
        block = cells[y0:y0 + rh, x0:x0 + rw]
        new = int((~block).sum())
        if new == 0 or new == interior - placed:
            continue
        trial = cells.copy()
        trial[y0:y0 + rh, x0:x0 + rw] = True
        if free_region_connected(trial):
            cells = trial
            placed += new
    return cells, placed >= target and free_region_connected(cells)


def generate_grid(width: int, height: int, density: float, seed: int,
                  resolution: float = config.RESOLUTION) -> GroundTruthGrid:
    """
    Generate a closed room with one connected free region

    Args:
        width: Cells, >= 3
        height: Cells, >= 3
        density: Fraction of interior cells to fill, in [0, 0.4]
        seed: RNG seed
        resolution: Meters per cell

    Returns:
        GroundTruthGrid
    """
    ok, message = GridValidator.validate(width, height, density)
    if not ok:
        raise ValueError(message)

    rng = np.random.default_rng(seed)
    for attempt in range(1, config.MAX_MAP_ATTEMPTS + 1):
        cells, valid = _try_generate(width, height, density, rng)
        if valid:
            if attempt > 1:
                logger.debug(f"map {width}x{height} d={density} seed={seed} took {attempt} attempts")
            return GroundTruthGrid(width, height, resolution, cells)
    raise MapGenerationError(
        f"no connected {width}x{height} map at density {density} after {config.MAX_MAP_ATTEMPTS} attempts"
    )


def generate_map(width: int, height: int, density: float, seed: int) -> str:
    """Map-file text for generate_grid"""
    return generate_grid(width, height, density, seed).to_text()


def parse_generated_spec(spec: str) -> Tuple[int, int, float, int]:
    """
    Parse "WxH:DENSITY:SEED" (the part after "generated:")

    Returns:
        (width, height, density, seed)
    """
    try:
        size, density, seed = spec.split(':')
        width, height = size.lower().split('x')
        return int(width), int(height), float(density), int(seed)
    except ValueError:
        raise ValueError(f"expected 'WxH:DENSITY:SEED', got {spec!r}") from None


def load_generated(spec: str, resolution: float = config.RESOLUTION) -> GroundTruthGrid:
    width, height, density, seed = parse_generated_spec(spec)
    return load_map(generate_map(width, height, density, seed), resolution)
