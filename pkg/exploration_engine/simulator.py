"""
simulator.py - Lockstep execution of distributed frontier exploration

Each tick every robot, in id order, drains its inbox, then (while active)
scans, picks a frontier state and moves there in one step. Messages sent
during a tick are delivered at the next tick boundary, where map requests
are answered and the replies delivered before anyone decides.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

import config
from utils.logger import setup_logging
from .frontier import ORIGIN_LOCAL, ORIGIN_RECEIVED, ExploredSet, frontier_states
from .learner import (
    ConvergenceDiagnostics,
    LearnerParams,
    QTable,
    apply_remote_q,
    q_bound_violations,
    q_table_mse,
    q_update,
)
from .local_map import LocalMap, integrate_scan, map_ssim, merge_maps
from .metrics import (
    MetricsReport,
    TickRecord,
    exploration_pct,
    observable_mask,
    overlap_pct,
    team_union_map,
)
from .network import (
    KIND_EXPLORED_FRONTIER,
    KIND_MAP_PATCH,
    KIND_MAP_REQUEST,
    KIND_Q_UPDATE,
    KIND_QTABLE_SHARE,
    ExploredFrontier,
    MapPatchMsg,
    MapRequest,
    MessageBus,
    NeighborGraph,
    PayloadLedger,
    QTableShare,
    QUpdate,
    neighbor_graph,
    pack_known,
    unpack_known,
)
from .partition import assign_priorities, is_cover, partition_cost, voronoi_partition
from .planner import (
    ControllerParams,
    astar_path,
    estimate_traversal_time,
    free_cell_graph,
    move_time,
    pairwise_travel_times,
    shortest_distances,
)
from .policies import (
    POLICY_SPECS,
    Candidate,
    Decision,
    cqlite_policy,
    full_share_policy_wrapper,
    greedy_frontier_policy,
    novel_candidates,
)
from .world import GroundTruthGrid, InvalidPoseError, Pose, SensorParams, check_pose, raycast_scan

logger = setup_logging(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
IDLE_THRESHOLD = 2


class SimConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    """Everything one trial needs; r_c lives in the learner parameters"""
    grid: GroundTruthGrid
    robots: int
    seed: int = 0
    starts: Optional[List[Tuple[int, int]]] = None
    learner: LearnerParams = field(default_factory=LearnerParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    r_is: float = config.R_IS
    min_cluster: int = config.MIN_CLUSTER
    t_max: int = config.T_MAX
    policy: str = config.DEFAULT_POLICY
    epsilon: float = config.EPSILON
    drop_probability: float = config.DROP_PROBABILITY
    shuffle_order: bool = config.SHUFFLE_ORDER
    q_merge_rule: str = config.Q_MERGE_RULE
    patch_mode: str = config.PATCH_MODE
    kappa: float = config.COST_PER_BYTE
    lambda_distance_aware: bool = config.LAMBDA_DISTANCE_AWARE
    confidence_e: float = config.CONFIDENCE_E
    ssim_window: int = config.SSIM_WINDOW
    snapshot_every: int = 0
    snapshot_dir: Optional[str] = None

    @property
    def r_c(self) -> float:
        return self.learner.r_c

    def validate(self):
        """Raise SimConfigError for anything that would fail before tick 0"""
        if not 1 <= self.robots <= config.MAX_ROBOTS:
            raise SimConfigError(f"robots must be in [1, {config.MAX_ROBOTS}], got {self.robots}")
        if self.t_max < 1:
            raise SimConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.min_cluster < 1:
            raise SimConfigError(f"min_cluster must be >= 1, got {self.min_cluster}")
        if self.r_is <= 0:
            raise SimConfigError(f"r_is must be positive, got {self.r_is}")
        if self.policy not in POLICY_SPECS:
            raise SimConfigError(f"Unknown policy {self.policy!r}; choose from {sorted(POLICY_SPECS)}")
        if self.q_merge_rule not in ("overwrite", "max"):
            raise SimConfigError(f"Unknown q_merge rule {self.q_merge_rule!r}")
        if self.patch_mode not in ("full", "delta"):
            raise SimConfigError(f"Unknown patch_mode {self.patch_mode!r}")
        if not 0 <= self.epsilon <= 1:
            raise SimConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0 <= self.drop_probability < 1:
            raise SimConfigError(f"drop probability must be in [0, 1), got {self.drop_probability}")
        if self.starts is not None:
            if len(self.starts) != self.robots:
                raise SimConfigError(f"{len(self.starts)} start cells given for {self.robots} robots")
            for x, y in self.starts:
                if not self.grid.is_free(x, y):
                    raise SimConfigError(f"start cell ({x}, {y}) is not a free cell")


def default_starts(grid: GroundTruthGrid, robots: int, seed: int) -> List[Tuple[int, int]]:
    """
    Seeded start cells clustered around one anchor

    The anchor is a random free cell of the largest free region; robots take
    the free cells of that region nearest to it (ties by y, then x).
    """
    labels, count = ndimage.label(~grid.cells, structure=EIGHT_CONNECTED)
    if count == 0:
        raise SimConfigError("map has no free cells")
    sizes = np.bincount(labels.ravel())[1:]
    region = labels == (int(np.argmax(sizes)) + 1)
    ys, xs = np.nonzero(region)
    if len(xs) < robots:
        raise SimConfigError(f"largest free region holds {len(xs)} cells, need {robots}")

    rng = np.random.default_rng(seed)
    anchor = int(rng.integers(len(xs)))
    ax, ay = xs[anchor], ys[anchor]
    order = sorted(range(len(xs)), key=lambda i: ((xs[i] - ax) ** 2 + (ys[i] - ay) ** 2, ys[i], xs[i]))
    return [(int(xs[i]), int(ys[i])) for i in order[:robots]]


@dataclass
class RobotAgent:
    id: int
    pose: Pose
    local_map: LocalMap
    q_table: QTable
    explored: ExploredSet
    observed: np.ndarray
    s_d: int = 0
    odometer: float = 0.0
    diagnostics: ConvergenceDiagnostics = field(default_factory=ConvergenceDiagnostics)
    peer_cells: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    shared_map: Optional[LocalMap] = None
    move_time: float = 0.0
    delta_q: float = 0.0
    last_update: Optional[Tuple[int, float]] = None
    partition_costs: List[float] = field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.pose.active

    @property
    def cell(self) -> Tuple[int, int]:
        return self.pose.cell(self.local_map.resolution)


@dataclass
class SimState:
    config: SimConfig
    agents: List[RobotAgent]
    bus: MessageBus
    ledger: PayloadLedger
    rng: np.random.Generator
    observable: np.ndarray
    tick: int = 0
    sim_time: float = 0.0
    merges: int = 0
    records: List[TickRecord] = field(default_factory=list)
    terminated: bool = False
    termination: str = ""
    reward_min: float = math.inf
    reward_max: float = -math.inf
    stats: Dict[str, int] = field(default_factory=lambda: {
        'connectivity_violations': 0,
        'cover_violations': 0,
        'skipped_moves': 0,
        'map_requests': 0,
    })

    @property
    def spec(self):
        return POLICY_SPECS[self.config.policy]

    def poses(self) -> Dict[int, Pose]:
        return {a.id: a.pose for a in self.agents}


def initial_state(cfg: SimConfig) -> SimState:
    """Validate the config and place the robots; nothing is sensed yet"""
    cfg.validate()
    starts = cfg.starts or default_starts(cfg.grid, cfg.robots, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    bus = MessageBus(cfg.drop_probability, rng if cfg.drop_probability > 0 else None)
    ledger = PayloadLedger(cfg.kappa)

    agents = []
    for rid, (x, y) in enumerate(starts):
        pose = Pose.at_cell(x, y, cfg.grid.resolution)
        try:
            check_pose(cfg.grid, pose)
        except InvalidPoseError as e:
            raise SimConfigError(f"robot {rid}: {e}") from e
        agents.append(RobotAgent(
            id=rid,
            pose=pose,
            local_map=LocalMap.for_world(cfg.grid),
            q_table=QTable(owner=rid),
            explored=ExploredSet(cfg.grid.resolution),
            observed=np.zeros((cfg.grid.height, cfg.grid.width), dtype=bool),
            shared_map=LocalMap.for_world(cfg.grid) if POLICY_SPECS[cfg.policy].merges_every_tick else None,
        ))

    return SimState(cfg, agents, bus, ledger, rng, observable_mask(cfg.grid, starts))


# ════════════════════════════════════════════════════════════════════════════
# TICK
# ════════════════════════════════════════════════════════════════════════════

def step(state: SimState) -> SimState:
    """
    Run one lockstep tick

    Args:
        state: Simulation state, not yet terminated

    Returns:
        The same state advanced by one tick
    """
    if state.terminated:
        raise RuntimeError("simulation already terminated")

    state.ledger.tick = state.tick
    state.bus.deliver()
    for agent in state.agents:
        agent.move_time = 0.0
        agent.delta_q = 0.0
        agent.last_update = None

    graph = neighbor_graph(state.poses(), state.config.r_c)
    if len(state.agents) > 1 and not graph.is_connected():
        state.stats['connectivity_violations'] += 1
        logger.warning(f"tick {state.tick}: robots not connected, components {graph.components()}")

    order = list(range(len(state.agents)))
    if state.config.shuffle_order:
        order = [int(i) for i in state.rng.permutation(len(state.agents))]

    # Map replies cross the same boundary as their request
    for idx in order:
        agent = state.agents[idx]
        for msg in state.bus.take(agent.id, KIND_MAP_REQUEST):
            _answer_map_request(state, agent, msg, graph)
    state.bus.deliver()

    merged = False
    for idx in order:
        agent = state.agents[idx]
        merged |= _process_inbox(state, agent)
        if not agent.active:
            continue
        _sense(state, agent)
        _decide(state, agent, graph)
        if state.spec.shares_full_table:
            _share_table(state, agent, graph)

    if state.spec.merges_every_tick:
        merged |= _full_share_exchange(state, graph)

    _record_tick(state, merged)
    state.tick += 1
    _check_termination(state)
    return state


def _process_inbox(state: SimState, agent: RobotAgent) -> bool:
    merged = False
    for msg in state.bus.receive(agent.id):
        if msg.kind == KIND_Q_UPDATE:
            apply_remote_q(agent.q_table, (msg.state_id, msg.value), state.config.q_merge_rule)
        elif msg.kind == KIND_QTABLE_SHARE:
            if msg.updated is not None:
                apply_remote_q(agent.q_table, msg.updated, state.config.q_merge_rule)
        elif msg.kind == KIND_EXPLORED_FRONTIER:
            agent.explored.add(msg.cell, ORIGIN_RECEIVED)
            agent.peer_cells[msg.sender] = msg.cell
        elif msg.kind == KIND_MAP_PATCH:
            merge_maps(agent.local_map, msg.patch)
            merged = True
    return merged


def _answer_map_request(state: SimState, agent: RobotAgent, msg: MapRequest, graph: NeighborGraph):
    if not graph.has_edge(agent.id, msg.sender):
        logger.debug(f"robot {agent.id}: requester {msg.sender} out of range, no reply")
        return
    exclude = unpack_known(msg.known, agent.local_map.size) if msg.known is not None else None
    patch = agent.local_map.to_patch(agent.id, exclude)
    if len(patch):
        state.bus.send(MapPatchMsg(agent.id, patch), msg.sender, state.ledger)


def _sense(state: SimState, agent: RobotAgent):
    scan = raycast_scan(state.config.grid, agent.pose, state.config.sensor)
    integrate_scan(agent.local_map, scan)
    observed = agent.observed.reshape(-1)
    observed[scan.free] = True
    observed[scan.occupied] = True


def _decide(state: SimState, agent: RobotAgent, graph: NeighborGraph):
    cfg = state.config
    spec = state.spec
    local = agent.local_map
    start = agent.cell

    cell_graph = free_cell_graph(local)
    states = frontier_states(local, cfg.min_cluster)
    dist = shortest_distances(local, [start], cell_graph)[0]
    reachable = [
        Candidate(s, float(dist[s.y * local.width + s.x]))
        for s in states
        if math.isfinite(dist[s.y * local.width + s.x])
    ]
    novel = novel_candidates(reachable, agent.explored, spec.consults_notices)
    if not novel:
        _request_maps(state, agent, graph)
        return

    if spec.learns:
        if spec.uses_partition:
            novel = _own_cell(state, agent, novel, cell_graph)
        choose = full_share_policy_wrapper if spec.shares_full_table else cqlite_policy
        decision = choose(
            agent.q_table, agent.explored, novel, local, start,
            cfg.learner, cfg.controller, cfg.r_is,
            cfg.lambda_distance_aware, cfg.epsilon, state.rng if cfg.epsilon > 0 else None,
        )
    else:
        decision = Decision(greedy_frontier_policy(agent.explored, novel))

    path = astar_path(local, start, decision.state.cell)
    if path is None:
        state.stats['skipped_moves'] += 1
        logger.warning(f"tick {state.tick}: robot {agent.id} cannot reach {decision.state.cell}, skipping")
        return
    _move(state, agent, decision, path, graph)


def _own_cell(state: SimState, agent: RobotAgent, novel: List[Candidate], cell_graph) -> List[Candidate]:
    """Candidates in the robot's travel-time Voronoi cell, or all of them if that is empty"""
    local = agent.local_map
    robots = {agent.id: agent.pose}
    for rid, (x, y) in agent.peer_cells.items():
        robots[rid] = Pose.at_cell(x, y, local.resolution)
    speeds = {rid: state.config.controller.v_max for rid in robots}
    tau = pairwise_travel_times(
        local, [c.state for c in novel], robots, speeds, state.config.controller.v_max, cell_graph
    )
    part = voronoi_partition(tau, {rid: tau.robot_row(rid) for rid in robots})
    if not is_cover(part):
        state.stats['cover_violations'] += 1
        logger.warning(f"tick {state.tick}: robot {agent.id} partition is not a cover")

    priorities = {}
    for rid, sids in part.assignments.items():
        priorities.update(assign_priorities(sids, rid, agent.explored, tau))
    agent.partition_costs.append(partition_cost(part, tau, priorities)[agent.id])

    mine = set(part.cell(agent.id))
    filtered = [c for c in novel if c.id in mine]
    return filtered or novel


def _request_maps(state: SimState, agent: RobotAgent, graph: NeighborGraph):
    known = pack_known(agent.local_map.known_mask()) if state.config.patch_mode == "delta" else None
    state.bus.broadcast(MapRequest(agent.id, known), graph, state.ledger)
    state.stats['map_requests'] += 1
    agent.s_d += 1
    if agent.s_d >= IDLE_THRESHOLD:
        agent.pose.active = False
        logger.info(f"tick {state.tick}: robot {agent.id} found no new frontier twice, now inactive")


def _move(state: SimState, agent: RobotAgent, decision: Decision, path, graph: NeighborGraph):
    cfg = state.config
    seconds, heading = move_time(path, agent.pose.theta, cfg.controller)
    gx, gy = path.goal
    agent.pose = Pose.at_cell(gx, gy, cfg.grid.resolution, heading)
    check_pose(cfg.grid, agent.pose)
    agent.odometer += path.length
    agent.move_time = seconds
    sid = decision.state.id

    if state.spec.learns:
        before = agent.q_table.copy()
        previous = before.get(sid)
        q_new = q_update(agent.q_table, sid, decision.reward, decision.next_ids, cfg.learner)
        agent.delta_q = abs(q_new - previous)
        state.reward_min = min(state.reward_min, decision.reward)
        state.reward_max = max(state.reward_max, decision.reward)
        agent.diagnostics.record(q_table_mse(agent.q_table, before), estimate_traversal_time(path, cfg.controller))

        agent.last_update = (sid, q_new)
        if not state.spec.shares_full_table:
            state.bus.broadcast(QUpdate(agent.id, sid, q_new), graph, state.ledger)
        state.bus.broadcast(ExploredFrontier(agent.id, sid, decision.state.cell), graph, state.ledger)

    agent.explored.add(decision.state, ORIGIN_LOCAL)
    agent.s_d = 0


def _share_table(state: SimState, agent: RobotAgent, graph: NeighborGraph):
    """Whole Q-table to every neighbor, this tick's update first when there is one"""
    updated = agent.last_update
    rest = tuple((k, v) for k, v in sorted(agent.q_table.items()) if updated is None or k != updated[0])
    entries = ((updated,) if updated is not None else ()) + rest
    state.bus.broadcast(QTableShare(agent.id, entries, updated), graph, state.ledger)


def _full_share_exchange(state: SimState, graph: NeighborGraph) -> bool:
    """Every robot sends its whole known map to each neighbor and merges what it receives"""
    exchanged = False
    patches = {a.id: a.local_map.to_patch(a.id) for a in state.agents}
    for agent in state.agents:
        neighbors = graph.neighbors(agent.id)
        state.ledger.record(MapPatchMsg(agent.id, patches[agent.id]), len(neighbors))
        merge_maps(agent.shared_map, patches[agent.id])
        for rid in neighbors:
            merge_maps(agent.shared_map, patches[rid])
            exchanged = True
    return exchanged


def _record_tick(state: SimState, merged: bool):
    cfg = state.config
    union = team_union_map([a.local_map for a in state.agents])
    counts = np.sum([a.observed for a in state.agents], axis=0)
    state.sim_time += max(a.move_time for a in state.agents)
    state.merges += int(merged)
    state.records.append(TickRecord(
        tick=state.tick,
        sim_time_s=state.sim_time,
        exploration_pct=exploration_pct(union, cfg.grid, state.observable),
        overlap_pct=overlap_pct(counts),
        bytes_cum=state.ledger.total_bytes,
        merges_cum=state.merges,
        max_delta_q=max(a.delta_q for a in state.agents),
    ))

    if cfg.snapshot_every and cfg.snapshot_dir and state.tick % cfg.snapshot_every == 0:
        out = Path(cfg.snapshot_dir)
        out.mkdir(parents=True, exist_ok=True)
        union.save_pgm(out / f"union_tick{state.tick:05d}.pgm")

    last = state.records[-1]
    logger.debug(
        f"tick {state.tick}: explored {last.exploration_pct:.1f}%, overlap {last.overlap_pct:.1f}%, "
        f"bytes {last.bytes_cum}, merges {last.merges_cum}"
    )


def _check_termination(state: SimState):
    if all(a.s_d >= IDLE_THRESHOLD for a in state.agents):
        state.terminated, state.termination = True, "all_idle"
    elif state.records[-1].exploration_pct >= 100.0:
        state.terminated, state.termination = True, "complete"
    elif state.tick >= state.config.t_max:
        state.terminated, state.termination = True, "t_max"


# ════════════════════════════════════════════════════════════════════════════
# RUN + REPORT
# ════════════════════════════════════════════════════════════════════════════

def run(cfg: SimConfig) -> MetricsReport:
    """
    Step until every robot is idle, the map is complete or t_max is hit

    Args:
        cfg: Trial configuration

    Returns:
        MetricsReport for the trial
    """
    state = initial_state(cfg)
    while not state.terminated:
        step(state)
    return build_report(state)


def run_state(cfg: SimConfig) -> SimState:
    """Like run, but return the final state for map and table export"""
    state = initial_state(cfg)
    while not state.terminated:
        step(state)
    return state


def build_report(state: SimState) -> MetricsReport:
    cfg = state.config
    union = team_union_map([a.local_map for a in state.agents])
    window = max(2, min(cfg.ssim_window, cfg.grid.width, cfg.grid.height))

    violations = 0
    if state.spec.learns and math.isfinite(state.reward_min):
        for agent in state.agents:
            bad = q_bound_violations(agent.q_table, state.reward_min, state.reward_max, cfg.learner.gamma)
            if bad:
                logger.warning(f"robot {agent.id}: {len(bad)} Q-values outside the reward-implied range")
            violations += len(bad)

    per_tick = state.ledger.q_entries_by_tick
    last = state.records[-1] if state.records else None
    return MetricsReport(
        policy=cfg.policy,
        seed=cfg.seed,
        robots=cfg.robots,
        iterations=state.tick,
        sim_time_s=state.sim_time,
        termination=state.termination,
        path_length_m={a.id: a.odometer for a in state.agents},
        exploration_pct=last.exploration_pct if last else 0.0,
        overlap_pct=last.overlap_pct if last else 0.0,
        ssim=map_ssim(union, cfg.grid, window),
        total_bytes=state.ledger.total_bytes,
        total_cost=state.ledger.total_cost(),
        kappa=state.ledger.kappa,
        bytes_by_robot={a.id: state.ledger.bytes_by_robot.get(a.id, 0) for a in state.agents},
        bytes_by_kind=state.ledger.kind_totals(),
        merges=state.merges,
        map_requests=state.stats['map_requests'],
        q_entries_shared=sum(sum(t.values()) for t in per_tick.values()),
        max_q_entries_per_robot_tick=max((max(t.values()) for t in per_tick.values() if t), default=0),
        convergence_bound_s={
            a.id: a.diagnostics.bound(cfg.confidence_e, cfg.learner.gamma) for a in state.agents
        } if state.spec.learns else {},
        q_bound_violations=violations,
        cover_violations=state.stats['cover_violations'],
        partition_cost={
            a.id: float(np.mean(a.partition_costs)) for a in state.agents if a.partition_costs
        },
        connectivity_violations=state.stats['connectivity_violations'],
        skipped_moves=state.stats['skipped_moves'],
        ticks=list(state.records),
    )
