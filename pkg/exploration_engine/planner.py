"""
planner.py - A* paths, travel times, PI-controller traversal estimate and
pairwise state travel times
"""

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

import config
from .frontier import FrontierState
from .local_map import FREE, OCCUPIED, LocalMap
from .world import Pose, normalize_angle

SQRT2 = math.sqrt(2.0)

# (dx, dy, unit cost)
MOVES = [
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
]

KIND_ROBOT = "robot"
KIND_STATE = "state"


class InvalidEndpointError(ValueError):
    pass


class DegenerateControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerParams:
    kp: float = config.KP
    ki: float = config.KI
    v_max: float = config.V_MAX
    w_max: float = config.W_MAX

    def __post_init__(self):
        if self.kp <= 0:
            raise ValueError(f"K_p must be positive, got {self.kp}")
        if self.ki < 0:
            raise ValueError(f"K_I must be non-negative, got {self.ki}")
        if self.v_max <= 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if self.w_max <= 0:
            raise ValueError(f"w_max must be positive, got {self.w_max}")


@dataclass(frozen=True)
class Path:
    """8-connected waypoint cells from start to goal; length in meters"""
    waypoints: Tuple[Tuple[int, int], ...]
    resolution: float
    length: float = field(init=False)

    def __post_init__(self):
        wps = tuple((int(x), int(y)) for x, y in self.waypoints)
        if not wps:
            raise ValueError("a path has at least one waypoint")
        straight = diagonal = 0
        for (x0, y0), (x1, y1) in zip(wps, wps[1:]):
            dx, dy = abs(x1 - x0), abs(y1 - y0)
            if max(dx, dy) != 1:
                raise ValueError(f"waypoints {(x0, y0)} and {(x1, y1)} are not 8-adjacent")
            if dx and dy:
                diagonal += 1
            else:
                straight += 1
        object.__setattr__(self, 'waypoints', wps)
        object.__setattr__(self, 'length', (straight + diagonal * SQRT2) * self.resolution)

    @property
    def start(self) -> Tuple[int, int]:
        return self.waypoints[0]

    @property
    def goal(self) -> Tuple[int, int]:
        return self.waypoints[-1]

    def segment_lengths(self) -> List[float]:
        return [
            (SQRT2 if (x0 != x1 and y0 != y1) else 1.0) * self.resolution
            for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:])
        ]

    def headings(self) -> List[float]:
        return [math.atan2(y1 - y0, x1 - x0) for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:])]


def octile(a: Tuple[int, int], b: Tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def _check_endpoint(local: LocalMap, cell: Tuple[int, int], name: str):
    x, y = cell
    if not (0 <= x < local.width and 0 <= y < local.height):
        raise InvalidEndpointError(f"{name} {cell} outside the map")
    if local.cells[y, x] == OCCUPIED:
        raise InvalidEndpointError(f"{name} {cell} is occupied")


def astar_path(local: LocalMap, start: Tuple[int, int], goal: Tuple[int, int]) -> Optional[Path]:
    """
    Shortest 8-connected path over known-free cells

    Args:
        local: Robot map; unknown cells are not traversable
        start: Start cell (x, y)
        goal: Goal cell (x, y)

    Returns:
        Path, or None when the goal is unreachable
    """
    _check_endpoint(local, start, "start")
    _check_endpoint(local, goal, "goal")
    start, goal = (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
    free = local.cells == FREE
    if not free[start[1], start[0]] or not free[goal[1], goal[0]]:
        return None
    if start == goal:
        return Path((start,), local.resolution)

    width, height = local.width, local.height
    g_cost: Dict[Tuple[int, int], float] = {start: 0.0}
    parent: Dict[Tuple[int, int], Tuple[int, int]] = {}
    closed = set()
    heap = [(octile(start, goal), 0.0, start[1], start[0])]

    while heap:
        _, g, y, x = heapq.heappop(heap)
        cell = (x, y)
        if cell in closed:
            continue
        if cell == goal:
            break
        closed.add(cell)
        for dx, dy, cost in MOVES:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < width and 0 <= ny < height) or not free[ny, nx]:
                continue
            nxt = (nx, ny)
            ng = g + cost
            if nxt in closed or ng >= g_cost.get(nxt, math.inf):
                continue
            g_cost[nxt] = ng
            parent[nxt] = cell
            heapq.heappush(heap, (ng + octile(nxt, goal), ng, ny, nx))
    else:
        return None

    waypoints = [goal]
    while waypoints[-1] != start:
        waypoints.append(parent[waypoints[-1]])
    waypoints.reverse()
    return Path(tuple(waypoints), local.resolution)


# ════════════════════════════════════════════════════════════════════════════
# TIMING
# ════════════════════════════════════════════════════════════════════════════

def travel_time(path: Path, v: float) -> float:
    """d / v in seconds"""
    if v <= 0:
        raise ValueError(f"speed must be positive, got {v}")
    return path.length / v


def estimate_traversal_time(path: Path, params: ControllerParams) -> float:
    """
    PI-controller estimate of the time to follow a path

    The error of segment j is its length; the integral term restarts at the
    path start. Each command is clamped to [0, v_max].

    Args:
        path: Path to follow
        params: Controller gains and limits

    Returns:
        Sum over segments of e_j^2 / v_j, in seconds
    """
    errors = np.asarray(path.segment_lengths(), dtype=np.float64)
    if errors.size == 0:
        return 0.0
    commands = np.clip(params.kp * errors + params.ki * np.cumsum(errors), 0.0, params.v_max)
    if np.any(commands <= 0):
        raise DegenerateControllerError("velocity command of zero on a nonempty segment")
    return float(np.sum(errors ** 2 / commands))


def rotation_delay(path: Path, heading: float, w_max: float) -> Tuple[float, float]:
    """
    Time spent turning between path segments

    Returns:
        (seconds, final heading)
    """
    total = 0.0
    for h in path.headings():
        total += abs(normalize_angle(h - heading))
        heading = h
    return total / w_max, normalize_angle(heading)


def move_time(path: Path, heading: float, params: ControllerParams) -> Tuple[float, float]:
    """Kinematic move at v_max plus rotation delays; returns (seconds, final heading)"""
    turning, final = rotation_delay(path, heading, params.w_max)
    return travel_time(path, params.v_max) + turning, final


# ════════════════════════════════════════════════════════════════════════════
# PAIRWISE TRAVEL TIMES
# ════════════════════════════════════════════════════════════════════════════

def free_cell_graph(local: LocalMap) -> sparse.csr_matrix:
    """Undirected 8-neighbor graph over free cells, weights in meters"""
    free = local.cells == FREE
    h, w = free.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, weights = [], [], []
    # right, down, down-right, down-left
    for dy, dx, cost in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, SQRT2), (1, -1, SQRT2)):
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(dy, h)
        xs2 = slice(max(0, dx), w - max(0, -dx))
        both = free[ys, xs] & free[ys2, xs2]
        rows.append(idx[ys, xs][both])
        cols.append(idx[ys2, xs2][both])
        weights.append(np.full(int(both.sum()), cost * local.resolution))
    return sparse.csr_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(h * w, h * w)
    )


def shortest_distances(
    local: LocalMap, sources: Sequence[Tuple[int, int]], graph: Optional[sparse.csr_matrix] = None
) -> np.ndarray:
    """(len(sources), H*W) path lengths in meters; inf where unreachable or not free"""
    out = np.full((len(sources), local.size), np.inf)
    valid = [i for i, (x, y) in enumerate(sources) if local.is_free(x, y)]
    if not valid:
        return out
    flat = [sources[i][1] * local.width + sources[i][0] for i in valid]
    if graph is None:
        graph = free_cell_graph(local)
    dist = csgraph.dijkstra(graph, directed=False, indices=flat)
    out[valid] = np.atleast_2d(dist)
    return out


@dataclass(frozen=True)
class TauNode:
    kind: str
    key: int
    cell: Tuple[int, int]
    speed: float


@dataclass
class TauMatrix:
    """Travel-time matrix between robots and frontier states; inf = unreachable"""
    nodes: List[TauNode]
    times: np.ndarray

    def __post_init__(self):
        self._index = {(n.kind, n.key): i for i, n in enumerate(self.nodes)}

    def index(self, kind: str, key: int) -> int:
        return self._index[(kind, key)]

    def robot_row(self, robot_id: int) -> int:
        return self.index(KIND_ROBOT, robot_id)

    def state_ids(self) -> List[int]:
        return [n.key for n in self.nodes if n.kind == KIND_STATE]

    def state_columns(self) -> List[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind == KIND_STATE]

    def time(self, kind_a: str, key_a: int, kind_b: str, key_b: int) -> float:
        return float(self.times[self.index(kind_a, key_a), self.index(kind_b, key_b)])


def pairwise_travel_times(
    local: LocalMap,
    states: Sequence[FrontierState],
    robots: Dict[int, Pose],
    speeds: Optional[Dict[int, float]] = None,
    default_speed: float = config.V_MAX,
    graph: Optional[sparse.csr_matrix] = None,
) -> TauMatrix:
    """
    Shortest travel times between every pair of robots and states

    Row p uses the speed of node p (robot speed, or default_speed for a
    state). Nodes are robots in id order followed by the states.

    Args:
        local: Map the travel times are computed on
        states: Frontier states
        robots: Robot id -> pose
        speeds: Robot id -> speed in m/s
        default_speed: Speed used for robots without an entry and for states
        graph: Prebuilt free_cell_graph of local

    Returns:
        TauMatrix with zero diagonal and inf for unreachable pairs
    """
    speeds = speeds or {}
    nodes = [
        TauNode(KIND_ROBOT, rid, robots[rid].cell(local.resolution), speeds.get(rid, default_speed))
        for rid in sorted(robots)
    ]
    nodes += [TauNode(KIND_STATE, s.id, s.cell, default_speed) for s in states]

    cells = [n.cell for n in nodes]
    dist = shortest_distances(local, cells, graph)
    targets = np.array([y * local.width + x for x, y in cells], dtype=np.int64)
    times = dist[:, targets] / np.array([n.speed for n in nodes])[:, None]
    np.fill_diagonal(times, 0.0)
    return TauMatrix(nodes, times)
