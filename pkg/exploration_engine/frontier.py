"""
frontier.py - Frontier detection, clustering into states, explored-state set
and overlap probability
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

import config
from .local_map import FREE, UNKNOWN, LocalMap

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

ORIGIN_LOCAL = "local"
ORIGIN_RECEIVED = "received"


def state_id(x: int, y: int) -> int:
    """Stable 8-byte key; numeric order equals (y, x) order"""
    return (int(y) << 32) | int(x)


def cell_of_state(sid: int) -> Tuple[int, int]:
    return sid & 0xFFFFFFFF, sid >> 32


@dataclass(frozen=True)
class FrontierState:
    """Clustered frontier region; cell is the navigation goal"""
    cell: Tuple[int, int]
    size: int = 1

    @property
    def id(self) -> int:
        return state_id(*self.cell)

    @property
    def x(self) -> int:
        return self.cell[0]

    @property
    def y(self) -> int:
        return self.cell[1]


@dataclass(frozen=True)
class ExploredEntry:
    cell: Tuple[int, int]
    origin: str


class ExploredSet:
    """
    ES_t: states already visited by this robot or reported by a neighbor

    Entries never leave the set. A state seen both locally and by notice is
    kept as local regardless of arrival order.
    """

    def __init__(self, resolution: float = config.RESOLUTION):
        self.resolution = resolution
        self._entries: Dict[int, ExploredEntry] = {}
        self._positions: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, item: Union[int, FrontierState]) -> bool:
        sid = item.id if isinstance(item, FrontierState) else item
        return sid in self._entries

    def __iter__(self) -> Iterator[int]:
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def get(self, sid: int) -> Optional[ExploredEntry]:
        return self._entries.get(sid)

    def add(self, state: Union[FrontierState, Tuple[int, int]], origin: str = ORIGIN_LOCAL) -> bool:
        """
        Insert a state; returns True when the id was not yet present

        Args:
            state: FrontierState or (x, y) cell
            origin: ORIGIN_LOCAL or ORIGIN_RECEIVED
        """
        if origin not in (ORIGIN_LOCAL, ORIGIN_RECEIVED):
            raise ValueError(f"Unknown origin {origin!r}")
        cell = state.cell if isinstance(state, FrontierState) else (int(state[0]), int(state[1]))
        sid = state_id(*cell)
        existing = self._entries.get(sid)
        if existing is None:
            self._entries[sid] = ExploredEntry(cell, origin)
            self._positions = None
            return True
        if existing.origin == ORIGIN_RECEIVED and origin == ORIGIN_LOCAL:
            self._entries[sid] = ExploredEntry(cell, ORIGIN_LOCAL)
        return False

    def union(self, other: 'ExploredSet') -> 'ExploredSet':
        """Add every entry of other into self"""
        for entry in other._entries.values():
            self.add(entry.cell, entry.origin)
        return self

    def snapshot(self) -> Dict[int, ExploredEntry]:
        return dict(self._entries)

    def positions(self) -> np.ndarray:
        """(m, 2) array of entry cells as (x, y)"""
        if self._positions is None:
            if self._entries:
                self._positions = np.array([e.cell for e in self._entries.values()], dtype=np.float64)
            else:
                self._positions = np.empty((0, 2), dtype=np.float64)
        return self._positions

    def count(self, origin: str) -> int:
        return sum(1 for e in self._entries.values() if e.origin == origin)


# ════════════════════════════════════════════════════════════════════════════
# DETECTION + CLUSTERING
# ════════════════════════════════════════════════════════════════════════════

def frontier_mask(local: LocalMap) -> np.ndarray:
    """Boolean [y, x] mask of free cells with at least one unknown 8-neighbor"""
    near_unknown = ndimage.binary_dilation(local.cells == UNKNOWN, structure=EIGHT_CONNECTED)
    return near_unknown & (local.cells == FREE)


def detect_frontiers(local: LocalMap) -> List[Tuple[int, int]]:
    """
    Frontier cells in row-major order

    Args:
        local: Robot map

    Returns:
        List of (x, y) cells
    """
    ys, xs = np.nonzero(frontier_mask(local))
    return list(zip(xs.tolist(), ys.tolist()))


def cluster_frontiers(cells: Sequence[Tuple[int, int]], min_cluster: int = config.MIN_CLUSTER) -> List[FrontierState]:
    """
    Group frontier cells into 8-connected components

    Components smaller than min_cluster are dropped. Each survivor becomes a
    FrontierState at the member nearest to the component's mean position
    (ties by y, then x).

    Args:
        cells: Frontier cells as (x, y)
        min_cluster: Smallest component kept

    Returns:
        FrontierStates ordered by id
    """
    if min_cluster < 1:
        raise ValueError(f"min_cluster must be >= 1, got {min_cluster}")
    if len(cells) == 0:
        return []

    pts = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    x0, y0 = pts[:, 0].min(), pts[:, 1].min()
    w = pts[:, 0].max() - x0 + 1
    h = pts[:, 1].max() - y0 + 1
    mask = np.zeros((h, w), dtype=bool)
    mask[pts[:, 1] - y0, pts[:, 0] - x0] = True

    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    states = []
    for label in range(1, count + 1):
        ys, xs = np.nonzero(labels == label)
        if len(xs) < min_cluster:
            continue
        mx, my = xs.mean(), ys.mean()
        d2 = (xs - mx) ** 2 + (ys - my) ** 2
        best = min(range(len(xs)), key=lambda i: (d2[i], ys[i], xs[i]))
        states.append(FrontierState((int(xs[best] + x0), int(ys[best] + y0)), int(len(xs))))

    states.sort(key=lambda s: s.id)
    return states


def frontier_states(local: LocalMap, min_cluster: int = config.MIN_CLUSTER) -> List[FrontierState]:
    return cluster_frontiers(detect_frontiers(local), min_cluster)


# ════════════════════════════════════════════════════════════════════════════
# OVERLAP
# ════════════════════════════════════════════════════════════════════════════

def overlap_probability(s: FrontierState, es: ExploredSet, r_is: float = config.R_IS) -> float:
    """
    Fraction of explored states within r_is meters of s

    Args:
        s: Candidate state
        es: Explored set (distances use es.resolution)
        r_is: Overlap radius in meters

    Returns:
        Probability in [0, 1]; 0 for an empty set
    """
    if r_is <= 0:
        raise ValueError(f"r_is must be positive, got {r_is}")
    m = len(es)
    if m == 0:
        return 0.0
    pos = es.positions()
    dist = np.hypot(pos[:, 0] - s.x, pos[:, 1] - s.y) * es.resolution
    return float(np.count_nonzero(dist <= r_is)) / m


def cell_distance_m(a: Tuple[int, int], b: Tuple[int, int], resolution: float) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) * resolution


def states_by_id(states: Iterable[FrontierState]) -> Dict[int, FrontierState]:
    return {s.id: s for s in states}
