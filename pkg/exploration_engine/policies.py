"""
policies.py - Frontier choice for the cqlite learner and the two baselines
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .frontier import ORIGIN_LOCAL, ExploredSet, FrontierState
from .learner import ActionCandidate, LearnerParams, QTable, compute_reward, q_value, select_action
from .local_map import LocalMap
from .planner import ControllerParams, astar_path, estimate_traversal_time


@dataclass(frozen=True)
class PolicySpec:
    """Behavior switches the simulator reads for each policy"""
    name: str
    learns: bool
    uses_partition: bool
    consults_notices: bool
    shares_full_table: bool
    merges_every_tick: bool


POLICY_SPECS: Dict[str, PolicySpec] = {
    "cqlite": PolicySpec("cqlite", True, True, True, False, False),
    "full_share": PolicySpec("full_share", True, True, True, True, True),
    "greedy_frontier": PolicySpec("greedy_frontier", False, False, False, False, False),
}


@dataclass(frozen=True)
class Candidate:
    """Reachable frontier state with the A* distance from the deciding robot"""
    state: FrontierState
    distance_m: float

    @property
    def id(self) -> int:
        return self.state.id


@dataclass
class Decision:
    state: FrontierState
    reward: float = 0.0
    q: float = 0.0
    next_ids: Tuple[int, ...] = ()


def novel_candidates(candidates: Sequence[Candidate], explored: ExploredSet, consults_notices: bool) -> List[Candidate]:
    """
    Candidates not yet explored

    Without notices only the robot's own visits count.
    """
    if consults_notices:
        return [c for c in candidates if c.id not in explored]
    return [
        c for c in candidates
        if c.id not in explored or explored.get(c.id).origin != ORIGIN_LOCAL
    ]


def greedy_frontier_policy(explored: ExploredSet, candidates: Sequence[Candidate]) -> Optional[FrontierState]:
    """
    Nearest frontier by A* distance, ties by state id, skipping own visits

    Returns:
        Chosen state, or None when nothing is left
    """
    fresh = novel_candidates(candidates, explored, consults_notices=False)
    if not fresh:
        return None
    return min(fresh, key=lambda c: (c.distance_m, c.id)).state


def cqlite_policy(
    table: QTable,
    explored: ExploredSet,
    candidates: Sequence[Candidate],
    local: LocalMap,
    start: Tuple[int, int],
    learner: LearnerParams,
    controller: ControllerParams,
    r_is: float,
    distance_aware: bool = True,
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Decision:
    """
    Reward and Q for every candidate, then argmax

    Traversal estimates are computed only for candidates tied at the
    maximum Q, where they decide the choice.

    Args:
        table: Robot Q-table (read only here)
        explored: Robot explored set
        candidates: Novel reachable candidates, nonempty
        local: Robot map used for tie-break paths
        start: Robot cell
        learner: Learner parameters
        controller: Controller parameters for the traversal estimate
        r_is: Overlap radius in meters
        distance_aware: Scale the step cost by path length
        epsilon: Random-choice probability
        rng: Generator for epsilon choices

    Returns:
        Decision for the chosen state
    """
    ids = [c.id for c in candidates]
    scored = []
    for cand in candidates:
        step = cand.distance_m if distance_aware else 1.0
        reward = compute_reward(cand.state, explored, table.get(cand.id), learner, r_is, step)
        next_ids = tuple(i for i in ids if i != cand.id)
        scored.append((cand, reward, q_value(table, cand.id, reward, next_ids, learner), next_ids))

    top = max(q for _, _, q, _ in scored)
    tied = sum(1 for _, _, q, _ in scored if q == top)
    action_candidates = []
    for cand, _, q, _ in scored:
        eta = 0.0
        if q == top and tied > 1:
            path = astar_path(local, start, cand.state.cell)
            eta = estimate_traversal_time(path, controller) if path is not None else float('inf')
        action_candidates.append(ActionCandidate(cand.id, q, eta))

    chosen = select_action(action_candidates, epsilon, rng)
    for cand, reward, q, next_ids in scored:
        if cand.id == chosen:
            return Decision(cand.state, reward, q, next_ids)
    raise RuntimeError(f"selected state {chosen} not among candidates")


def full_share_policy_wrapper(*args, **kwargs) -> Decision:
    """Same choice as cqlite; the simulator changes only what is shared"""
    return cqlite_policy(*args, **kwargs)
