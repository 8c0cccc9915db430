"""
local_map.py - Per-robot tri-state occupancy map, map merging and map quality
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from .world import GroundTruthGrid, ScanResult

UNKNOWN = -1
FREE = 0
OCCUPIED = 1

# PGM export levels
PGM_LEVELS = {OCCUPIED: 0, UNKNOWN: 128, FREE: 255}

# SSIM raster levels
SSIM_LEVELS = {OCCUPIED: 0.0, UNKNOWN: 0.5, FREE: 1.0}
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class IntegrationError(ValueError):
    pass


class MergeError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class WindowSizeError(ValueError):
    pass


class LocalMap:
    """
    Tri-state grid in the ground-truth frame

    cells[y, x] is one of UNKNOWN, FREE, OCCUPIED. version increases on
    every mutating call.
    """

    def __init__(self, width: int, height: int, resolution: float):
        self.width = width
        self.height = height
        self.resolution = resolution
        self.cells = np.full((height, width), UNKNOWN, dtype=np.int8)
        self.version = 0

    @classmethod
    def for_world(cls, grid: GroundTruthGrid) -> 'LocalMap':
        return cls(grid.width, grid.height, grid.resolution)

    @property
    def size(self) -> int:
        return self.width * self.height

    def state(self, x: int, y: int) -> int:
        return int(self.cells[y, x])

    def is_free(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and self.cells[y, x] == FREE

    def known_mask(self) -> np.ndarray:
        return self.cells != UNKNOWN

    def unknown_count(self) -> int:
        return int((self.cells == UNKNOWN).sum())

    def copy(self) -> 'LocalMap':
        other = LocalMap(self.width, self.height, self.resolution)
        other.cells = self.cells.copy()
        other.version = self.version
        return other

    def to_patch(self, source: int, exclude: Optional[np.ndarray] = None) -> 'MapPatch':
        """
        Sparse patch of known cells

        Args:
            source: Robot id of the sender
            exclude: Flat boolean mask of cells to leave out (cells the
                requester already knows)

        Returns:
            MapPatch with known cells only
        """
        flat = self.cells.ravel()
        mask = flat != UNKNOWN
        if exclude is not None:
            mask &= ~np.asarray(exclude, dtype=bool).ravel()
        indices = np.flatnonzero(mask).astype(np.int64)
        return MapPatch(indices=indices, states=flat[indices].astype(np.int8), source=source)

    def to_pgm_array(self) -> np.ndarray:
        out = np.empty(self.cells.shape, dtype=np.uint8)
        for state, level in PGM_LEVELS.items():
            out[self.cells == state] = level
        return out

    def save_pgm(self, path: Union[str, Path]):
        """Export as binary PGM: 0 occupied, 128 unknown, 255 free"""
        Image.fromarray(self.to_pgm_array()).save(str(path), format='PPM')


@dataclass(frozen=True)
class MapPatch:
    """Known cells shared on request; states are FREE or OCCUPIED only"""
    indices: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    source: int = 0

    BYTES_PER_ENTRY = 5

    def __post_init__(self):
        if len(self.indices) != len(self.states):
            raise ValueError("indices and states must have equal length")
        if np.any(self.states == UNKNOWN):
            raise ValueError("a map patch carries known cells only")

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def byte_size(self) -> int:
        return len(self) * self.BYTES_PER_ENTRY


def _apply(cells: np.ndarray, free_idx: np.ndarray, occ_idx: np.ndarray):
    flat = cells.reshape(-1)
    if len(free_idx):
        target = free_idx[flat[free_idx] != OCCUPIED]
        flat[target] = FREE
    if len(occ_idx):
        flat[occ_idx] = OCCUPIED


def _out_of_bounds(indices: np.ndarray, size: int) -> bool:
    return len(indices) > 0 and (indices.min() < 0 or indices.max() >= size)


def integrate_scan(local: LocalMap, scan: ScanResult) -> LocalMap:
    """
    Write a scan into the map; occupied observations override free ones

    Args:
        local: Map owned by the scanning robot
        scan: Observation from raycast_scan

    Returns:
        The same map, mutated, with version bumped
    """
    free_idx = np.asarray(scan.free, dtype=np.int64)
    occ_idx = np.asarray(scan.occupied, dtype=np.int64)
    if _out_of_bounds(free_idx, local.size) or _out_of_bounds(occ_idx, local.size):
        raise IntegrationError(f"scan references a cell outside the {local.width}x{local.height} map")
    _apply(local.cells, free_idx, occ_idx)
    local.version += 1
    return local


def merge_maps(dst: LocalMap, patch: MapPatch) -> LocalMap:
    """Fuse a patch into dst with the same override rule as integrate_scan"""
    indices = np.asarray(patch.indices, dtype=np.int64)
    if _out_of_bounds(indices, dst.size):
        raise MergeError(f"patch from robot {patch.source} references a cell outside the map")
    states = np.asarray(patch.states)
    _apply(dst.cells, indices[states == FREE], indices[states == OCCUPIED])
    dst.version += 1
    return dst


def _check_dims(local: LocalMap, truth: GroundTruthGrid):
    if (local.width, local.height) != (truth.width, truth.height):
        raise DimensionMismatchError(
            f"map is {local.width}x{local.height}, truth is {truth.width}x{truth.height}"
        )


def truth_states(truth: GroundTruthGrid) -> np.ndarray:
    return np.where(truth.cells, OCCUPIED, FREE).astype(np.int8)


def coverage_fraction(local: LocalMap, truth: GroundTruthGrid) -> float:
    """Known cells that agree with the truth, over all truth cells"""
    _check_dims(local, truth)
    correct = (local.cells != UNKNOWN) & (local.cells == truth_states(truth))
    return float(correct.sum()) / truth.size


def ssim_raster(cells: np.ndarray) -> np.ndarray:
    out = np.empty(cells.shape, dtype=np.float64)
    for state, level in SSIM_LEVELS.items():
        out[cells == state] = level
    return out


def ssim_arrays(a: np.ndarray, b: np.ndarray, window: int, data_range: float = 1.0) -> float:
    """Mean SSIM over all valid window x window positions (population statistics)"""
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    axes = (-2, -1)
    mu_a = wa.mean(axis=axes)
    mu_b = wb.mean(axis=axes)
    var_a = wa.var(axis=axes)
    var_b = wb.var(axis=axes)
    cov = ((wa - mu_a[..., None, None]) * (wb - mu_b[..., None, None])).mean(axis=axes)

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def map_ssim(local: LocalMap, truth: GroundTruthGrid, window: int = 7) -> float:
    """
    Structural similarity of a map against the truth

    Rasters use 0 occupied, 0.5 unknown, 1 free so unexplored area lowers
    the score.

    Args:
        local: Map to score
        truth: Ground truth
        window: Square window side in cells (>= 2)

    Returns:
        Mean SSIM in [-1, 1]
    """
    _check_dims(local, truth)
    if window < 2:
        raise WindowSizeError(f"SSIM window must be >= 2, got {window}")
    if window > min(local.width, local.height):
        raise WindowSizeError(f"SSIM window {window} larger than the {local.width}x{local.height} map")
    return ssim_arrays(ssim_raster(local.cells), ssim_raster(truth_states(truth)), window)
