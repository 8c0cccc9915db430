"""
world.py - Ground-truth environment, map file I/O and range-sensor simulation

Cells are addressed (x, y) with x = column and y = row; the flat index of a
cell is y * width + x.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

import config


class MapParseError(ValueError):
    """Base class for map file errors, carrying the 1-based line/column"""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class MalformedHeaderError(MapParseError):
    pass


class UnknownCharacterError(MapParseError):
    pass


class NonRectangularError(MapParseError):
    pass


class OpenBorderError(MapParseError):
    pass


class InvalidPoseError(ValueError):
    pass


OCCUPIED_CHAR = '#'
FREE_CHAR = '.'


@dataclass(frozen=True)
class GroundTruthGrid:
    """Immutable occupancy world; cells[y, x] is True where occupied"""
    width: int
    height: int
    resolution: float
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Grid must be at least 1x1, got {self.width}x{self.height}")
        if self.resolution <= 0:
            raise ValueError(f"Resolution must be positive, got {self.resolution}")
        if self.cells.shape != (self.height, self.width):
            raise ValueError(f"Cell array shape {self.cells.shape} != ({self.height}, {self.width})")
        frozen = np.array(self.cells, dtype=bool, copy=True)
        frozen.setflags(write=False)
        object.__setattr__(self, 'cells', frozen)

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and not self.cells[y, x]

    def index(self, x: int, y: int) -> int:
        return y * self.width + x

    def cell_of(self, index: int) -> Tuple[int, int]:
        return index % self.width, index // self.width

    @property
    def free_count(self) -> int:
        return int((~self.cells).sum())

    @property
    def size(self) -> int:
        return self.width * self.height

    def to_text(self) -> str:
        """Render in the ASCII map format"""
        rows = [
            ''.join(OCCUPIED_CHAR if occ else FREE_CHAR for occ in row)
            for row in self.cells
        ]
        return f"{self.width} {self.height}\n" + '\n'.join(rows) + '\n'


@dataclass(frozen=True)
class SensorParams:
    """Omnidirectional range sensor"""
    range_m: float = config.SENSOR_RANGE
    ray_count: int = config.RAY_COUNT

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError(f"Sensor range must be positive, got {self.range_m}")
        if self.ray_count < 8:
            raise ValueError(f"ray_count must be >= 8, got {self.ray_count}")


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)"""
    wrapped = (theta + math.pi) % (2 * math.pi) - math.pi
    return wrapped if wrapped < math.pi else -math.pi


@dataclass
class Pose:
    """Robot pose in meters; a robot is active until it stops exploring"""
    x: float
    y: float
    theta: float = 0.0
    active: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or self.x < 0 or self.y < 0:
            raise InvalidPoseError(f"pose ({self.x}, {self.y}) lies outside every grid")
        self.theta = normalize_angle(self.theta)

    def cell(self, resolution: float) -> Tuple[int, int]:
        return int(math.floor(self.x / resolution)), int(math.floor(self.y / resolution))

    @classmethod
    def at_cell(cls, x: int, y: int, resolution: float, theta: float = 0.0) -> 'Pose':
        """Pose centered on a cell"""
        return cls((x + 0.5) * resolution, (y + 0.5) * resolution, theta)


@dataclass(frozen=True)
class ScanResult:
    """Flat cell indices observed free / occupied by one scan"""
    origin: Tuple[int, int]
    free: np.ndarray
    occupied: np.ndarray

    def __len__(self) -> int:
        return len(self.free) + len(self.occupied)


# ════════════════════════════════════════════════════════════════════════════
# MAP FILE I/O
# ════════════════════════════════════════════════════════════════════════════

def load_map(content: str, resolution: float = config.RESOLUTION) -> GroundTruthGrid:
    """
    Parse the ASCII map format: header "W H" then H rows of W chars from {#, .}

    Args:
        content: Map file text
        resolution: Meters per cell

    Returns:
        GroundTruthGrid with a closed border
    """
    lines = content.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MalformedHeaderError("empty map file", 1, 1)

    parts = lines[0].split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise MalformedHeaderError(f"expected 'W H', got {lines[0]!r}", 1, 1)
    width, height = int(parts[0]), int(parts[1])
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"dimensions must be positive, got {width}x{height}", 1, 1)

    rows = lines[1:]
    if len(rows) != height:
        raise NonRectangularError(
            f"header declares {height} rows, found {len(rows)}", min(len(rows), height) + 2, 1
        )

    cells = np.zeros((height, width), dtype=bool)
    for y, row in enumerate(rows):
        line_no = y + 2
        row = row.rstrip('\r')
        for x, ch in enumerate(row):
            if ch == OCCUPIED_CHAR:
                if x < width:
                    cells[y, x] = True
            elif ch != FREE_CHAR:
                raise UnknownCharacterError(f"unknown character {ch!r}", line_no, x + 1)
        if len(row) != width:
            raise NonRectangularError(
                f"row has {len(row)} cells, header width is {width}", line_no, min(len(row), width) + 1
            )

    _check_closed_border(cells)
    return GroundTruthGrid(width, height, resolution, cells)


def load_pgm(path: Union[str, Path], resolution: float = config.RESOLUTION) -> GroundTruthGrid:
    """Read a binary PGM; pixels at or below the threshold are occupied"""
    with Image.open(path) as img:
        pixels = np.asarray(img.convert('L'))
    cells = pixels <= config.PGM_OCCUPIED_THRESHOLD
    _check_closed_border(cells)
    height, width = cells.shape
    return GroundTruthGrid(width, height, resolution, cells)


def load_map_file(path: Union[str, Path], resolution: float = config.RESOLUTION) -> GroundTruthGrid:
    """Load an ASCII or PGM map depending on the file suffix"""
    path = Path(path)
    if path.suffix.lower() == '.pgm':
        return load_pgm(path, resolution)
    return load_map(path.read_text(encoding='utf-8'), resolution)


def _check_closed_border(cells: np.ndarray):
    height, width = cells.shape
    border = np.zeros_like(cells)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    open_cells = np.argwhere(border & ~cells)
    if len(open_cells):
        y, x = open_cells[0]
        raise OpenBorderError("border cell is free; the map must be closed", int(y) + 2, int(x) + 1)


# ════════════════════════════════════════════════════════════════════════════
# RAY CASTING
# ════════════════════════════════════════════════════════════════════════════

@lru_cache(maxsize=32)
def _ray_offsets(range_cells: float, ray_count: int) -> Tuple[np.ndarray, ...]:
    """
    Supercover cell offsets along each ray, shape (rays, steps)

    Returns (dx, dy, within, prev_dx, prev_dy, diagonal, a_within, b_within).
    A diagonal step k also visits the side cells a = (dx, prev_dy) and
    b = (prev_dx, dy); the within arrays are range checks for each cell.
    """
    steps = max(1, int(math.floor(range_cells + 1e-9)))
    angles = 2.0 * math.pi * np.arange(ray_count) / ray_count
    cos, sin = np.cos(angles), np.sin(angles)
    major = np.maximum(np.abs(cos), np.abs(sin))
    k = np.arange(1, steps + 1)
    dx = np.floor(np.outer(cos / major, k) + 0.5).astype(np.int64)
    dy = np.floor(np.outer(sin / major, k) + 0.5).astype(np.int64)
    prev_dx = np.hstack([np.zeros((ray_count, 1), dtype=np.int64), dx[:, :-1]])
    prev_dy = np.hstack([np.zeros((ray_count, 1), dtype=np.int64), dy[:, :-1]])
    diagonal = (dx != prev_dx) & (dy != prev_dy)
    within = np.hypot(dx, dy) <= range_cells + 1e-9
    a_within = diagonal & (np.hypot(dx, prev_dy) <= range_cells + 1e-9)
    b_within = diagonal & (np.hypot(prev_dx, dy) <= range_cells + 1e-9)
    arrays = (dx, dy, within, prev_dx, prev_dy, diagonal, a_within, b_within)
    for arr in arrays:
        arr.setflags(write=False)
    return arrays


def _occupied_at(grid: GroundTruthGrid, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(inside, occupied) per cell; cells off the grid count as occupied"""
    inside = (xs >= 0) & (xs < grid.width) & (ys >= 0) & (ys < grid.height)
    occ = np.ones_like(inside)
    occ[inside] = grid.cells[ys[inside], xs[inside]]
    return inside, occ


def check_pose(grid: GroundTruthGrid, pose: Pose) -> Tuple[int, int]:
    """Pose cell, which must lie inside the grid on a free cell"""
    cx, cy = pose.cell(grid.resolution)
    if not grid.in_bounds(cx, cy):
        raise InvalidPoseError(f"pose cell ({cx}, {cy}) outside the {grid.width}x{grid.height} grid")
    if grid.cells[cy, cx]:
        raise InvalidPoseError(f"pose cell ({cx}, {cy}) is occupied")
    return cx, cy


def raycast_scan(grid: GroundTruthGrid, pose: Pose, params: SensorParams) -> ScanResult:
    """
    Omnidirectional scan from the pose cell

    Each ray walks a supercover line outward until the first occupied cell
    (reported occupied), the range limit, or the grid edge. A diagonal step
    also visits both side cells, so a ray never slips between two occupied
    cells that touch at a corner; an occupied side cell ends the ray and is
    reported instead of the diagonal cell. The pose cell is free.

    Args:
        grid: Ground truth
        pose: Robot pose (must sit on a free cell)
        params: Sensor range and angular resolution

    Returns:
        ScanResult with sorted unique flat indices
    """
    cx, cy = check_pose(grid, pose)
    dx, dy, within, prev_dx, prev_dy, diagonal, a_within, b_within = _ray_offsets(
        params.range_m / grid.resolution, params.ray_count
    )
    xs, ys = cx + dx, cy + dy
    ax, ay = xs, cy + prev_dy
    bx, by = cx + prev_dx, ys
    inside, occ = _occupied_at(grid, xs, ys)
    a_inside, a_occ = _occupied_at(grid, ax, ay)
    b_inside, b_occ = _occupied_at(grid, bx, by)
    a_block = diagonal & a_occ
    b_block = diagonal & b_occ
    side_block = a_block | b_block

    stop = ~inside | occ | ~within | side_block
    has_stop = stop.any(axis=1)
    first_stop = np.where(has_stop, stop.argmax(axis=1), stop.shape[1])

    steps = np.arange(stop.shape[1])
    before = steps[None, :] < first_stop[:, None]
    sides = before & diagonal
    free_idx = np.concatenate([
        ys[before] * grid.width + xs[before],
        ay[sides] * grid.width + ax[sides],
        by[sides] * grid.width + bx[sides],
    ])

    rays = np.nonzero(has_stop)[0]
    k = first_stop[rays]
    blocked = side_block[rays, k]
    main_hit = ~blocked & inside[rays, k] & occ[rays, k] & within[rays, k]
    a_hit = a_block[rays, k] & a_inside[rays, k] & a_within[rays, k]
    b_hit = b_block[rays, k] & b_inside[rays, k] & b_within[rays, k]
    occ_idx = np.concatenate([
        ys[rays[main_hit], k[main_hit]] * grid.width + xs[rays[main_hit], k[main_hit]],
        ay[rays[a_hit], k[a_hit]] * grid.width + ax[rays[a_hit], k[a_hit]],
        by[rays[b_hit], k[b_hit]] * grid.width + bx[rays[b_hit], k[b_hit]],
    ])

    free = np.union1d(free_idx, [cy * grid.width + cx]).astype(np.int64)
    occupied = np.unique(occ_idx).astype(np.int64)
    return ScanResult((cx, cy), free, occupied)
