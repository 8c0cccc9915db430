"""
partition.py - Travel-time Voronoi split of frontier states among robots,
state priorities and the weighted partition cost
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

import config
from .frontier import ExploredSet
from .planner import KIND_STATE, TauMatrix

PriorityMap = Dict[int, float]


class MissingPriorityError(KeyError):
    pass


@dataclass
class Partition:
    """Robot id -> assigned state ids; generators are the robots' tau rows"""
    assignments: Dict[int, List[int]]
    generators: Dict[int, int]
    tau: TauMatrix = field(repr=False)
    unassigned: List[int] = field(default_factory=list)

    def cell(self, robot_id: int) -> List[int]:
        return self.assignments.get(robot_id, [])

    def owner_of(self, sid: int):
        for rid, states in self.assignments.items():
            if sid in states:
                return rid
        return None


def voronoi_partition(tau: TauMatrix, robots: Mapping[int, int]) -> Partition:
    """
    Assign each state to the robot that reaches it soonest

    Ties go to the lower robot id. States no robot can reach stay
    unassigned.

    Args:
        tau: Travel-time matrix
        robots: Robot id -> tau row of its current position

    Returns:
        Partition over the state columns of tau
    """
    order = sorted(robots)
    assignments: Dict[int, List[int]] = {rid: [] for rid in order}
    unassigned = []
    if not order:
        return Partition(assignments, {}, tau, tau.state_ids())

    rows = np.array([robots[rid] for rid in order])
    for col in tau.state_columns():
        sid = tau.nodes[col].key
        times = tau.times[rows, col]
        if not np.any(np.isfinite(times)):
            unassigned.append(sid)
            continue
        assignments[order[int(np.argmin(times))]].append(sid)
    return Partition(assignments, dict(robots), tau, unassigned)


def assign_priorities(
    states: Sequence[int],
    robot_id: int,
    explored: ExploredSet,
    tau: TauMatrix,
    base: float = config.PRIORITY_BASE,
) -> PriorityMap:
    """
    phi = base / (1 + tau) for each reachable state, halved when explored,
    normalized so the largest is 1

    Args:
        states: State ids to weight
        robot_id: Robot whose travel times are used
        explored: That robot's explored set
        tau: Travel-time matrix
        base: Priority before distance decay

    Returns:
        State id -> priority in (0, 1]; unreachable states are left out
    """
    row = tau.robot_row(robot_id)
    raw: PriorityMap = {}
    for sid in states:
        t = float(tau.times[row, tau.index(KIND_STATE, sid)])
        if not math.isfinite(t):
            continue
        phi = base / (1.0 + t)
        if sid in explored:
            phi *= 0.5
        raw[sid] = phi
    if not raw:
        return {}
    top = max(raw.values())
    return {sid: phi / top for sid, phi in raw.items()}


def partition_cost(part: Partition, tau: TauMatrix, priorities: Mapping[int, float]) -> Dict[int, float]:
    """Per-robot sum of tau(p_i, q) * phi_q over its assigned states"""
    costs = {}
    for rid, states in part.assignments.items():
        row = part.generators[rid]
        total = 0.0
        for sid in states:
            if sid not in priorities:
                raise MissingPriorityError(f"no priority for state {sid} assigned to robot {rid}")
            total += float(tau.times[row, tau.index(KIND_STATE, sid)]) * priorities[sid]
        costs[rid] = total
    return costs


def is_cover(part: Partition) -> bool:
    """Assigned sets are disjoint and together hold exactly the reachable states"""
    assigned = [sid for states in part.assignments.values() for sid in states]
    if len(assigned) != len(set(assigned)):
        return False
    rows = list(part.generators.values())
    reachable = {
        part.tau.nodes[col].key
        for col in part.tau.state_columns()
        if rows and np.any(np.isfinite(part.tau.times[rows, col]))
    }
    return set(assigned) == reachable
