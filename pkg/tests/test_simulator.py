import numpy as np
import pytest

from exploration_engine.frontier import frontier_states, state_id
from exploration_engine.local_map import LocalMap, integrate_scan
from exploration_engine.map_generator import generate_grid
from exploration_engine.network import (
    KIND_MAP_PATCH,
    KIND_MAP_REQUEST,
    KIND_QTABLE_SHARE,
    QUpdate,
    neighbor_graph,
)
from exploration_engine.simulator import (
    SimConfig,
    SimConfigError,
    build_report,
    default_starts,
    initial_state,
    run,
    step,
)
from exploration_engine.world import Pose, SensorParams, raycast_scan

SHORT_SENSOR = SensorParams(0.5, 360)


def test_first_tick_of_a_lone_robot(room_grid):
    cfg = SimConfig(grid=room_grid(21, 21), robots=1, starts=[(10, 10)], sensor=SHORT_SENSOR)
    state = step(initial_state(cfg))
    agent = state.agents[0]

    assert len(agent.q_table) == 1
    assert len(agent.explored) == 1
    assert agent.odometer > 0
    assert agent.cell != (10, 10)
    assert state.ledger.total_bytes == 0
    assert not state.terminated


def test_robot_without_novel_frontier_requests_maps(room_grid):
    grid = room_grid(21, 21)
    cfg = SimConfig(grid=grid, robots=1, starts=[(10, 10)], sensor=SHORT_SENSOR)
    state = initial_state(cfg)

    preview = LocalMap.for_world(grid)
    integrate_scan(preview, raycast_scan(grid, Pose.at_cell(10, 10, grid.resolution), SHORT_SENSOR))
    for s in frontier_states(preview, cfg.min_cluster):
        state.agents[0].explored.add(s)

    step(state)
    agent = state.agents[0]
    assert agent.s_d == 1
    assert agent.active
    assert agent.cell == (10, 10)
    assert state.stats['map_requests'] == 1
    assert len(agent.q_table) == 0

    step(state)
    assert agent.s_d == 2
    assert not agent.active
    assert state.terminated and state.termination == "all_idle"


def hide_own_frontiers(state, robot, cell):
    """Mark every frontier the robot would see from cell as already explored"""
    grid = state.config.grid
    preview = LocalMap.for_world(grid)
    integrate_scan(preview, raycast_scan(grid, Pose.at_cell(*cell, grid.resolution), state.config.sensor))
    for s in frontier_states(preview, state.config.min_cluster):
        state.agents[robot].explored.add(s)


def test_map_reply_is_merged_before_the_requester_gives_up(room_grid):
    cfg = SimConfig(grid=room_grid(41, 21), robots=2, starts=[(8, 10), (14, 10)], sensor=SHORT_SENSOR)
    state = initial_state(cfg)
    hide_own_frontiers(state, 0, (8, 10))
    requester = state.agents[0]

    step(state)
    assert requester.s_d == 1
    assert requester.odometer == 0

    step(state)
    assert state.ledger.sends_by_kind[KIND_MAP_PATCH] == 1
    assert state.merges == 1
    assert requester.active
    assert requester.s_d == 0
    assert requester.odometer > 0


def test_full_share_sends_the_table_on_every_active_tick(room_grid):
    cfg = SimConfig(
        grid=room_grid(41, 21), robots=2, starts=[(8, 10), (14, 10)], sensor=SHORT_SENSOR,
        policy="full_share", t_max=40,
    )
    state = initial_state(cfg)
    hide_own_frontiers(state, 0, (8, 10))

    step(state)
    assert state.agents[0].cell == (8, 10)
    assert state.ledger.sends_by_kind[KIND_QTABLE_SHARE] == 2
    assert state.ledger.bytes_by_kind[KIND_QTABLE_SHARE] == 4 + 20

    active_ticks = 2
    while not state.terminated:
        active_ticks += sum(a.active for a in state.agents)
        step(state)
    assert state.ledger.sends_by_kind[KIND_QTABLE_SHARE] == active_ticks


def test_remote_q_value_arrives_next_tick(room_grid):
    grid = room_grid(21, 21)
    cfg = SimConfig(grid=grid, robots=2, starts=[(5, 10), (6, 10)], sensor=SHORT_SENSOR)
    state = initial_state(cfg)
    key = state_id(99, 99)

    graph = neighbor_graph(state.poses(), cfg.r_c)
    state.bus.broadcast(QUpdate(0, key, 4.14), graph, state.ledger)
    assert key not in state.agents[1].q_table

    step(state)
    assert state.agents[1].q_table.get(key) == 4.14
    assert key not in state.agents[0].q_table


def test_single_tick_budget():
    grid = generate_grid(60, 60, 0.1, 3)
    report = run(SimConfig(grid=grid, robots=2, seed=4, sensor=SHORT_SENSOR, t_max=1))
    assert report.iterations == 1
    assert report.termination == "t_max"
    assert report.exploration_pct > 0


def test_room_within_sensor_range_completes(room_grid):
    report = run(SimConfig(grid=room_grid(21, 21), robots=1, starts=[(10, 10)]))
    assert report.termination == "complete"
    assert report.exploration_pct == pytest.approx(100.0)
    assert report.iterations == 1
    assert report.ssim == pytest.approx(1.0, abs=1e-3)


def test_same_seed_gives_identical_reports():
    grid = generate_grid(30, 30, 0.15, 9)
    cfg = dict(grid=grid, robots=3, seed=21, sensor=SensorParams(0.6, 360), t_max=40)
    assert run(SimConfig(**cfg)) == run(SimConfig(**cfg))


@pytest.mark.parametrize("policy", ["cqlite", "greedy_frontier", "full_share"])
def test_run_invariants(policy):
    grid = generate_grid(30, 30, 0.15, 5)
    report = run(SimConfig(grid=grid, robots=3, seed=2, sensor=SensorParams(0.6, 360), t_max=60, policy=policy))

    pct = [t.exploration_pct for t in report.ticks]
    assert all(a <= b + 1e-9 for a, b in zip(pct, pct[1:]))
    assert report.iterations == len(report.ticks)
    assert report.cover_violations == 0
    assert report.total_bytes == sum(report.bytes_by_robot.values())
    assert report.total_bytes == sum(report.bytes_by_kind.values())
    if policy == "cqlite":
        assert report.max_q_entries_per_robot_tick <= 1
    if policy == "greedy_frontier":
        assert report.bytes_by_kind["q_update"] == 0
        assert report.bytes_by_kind["explored_frontier"] == 0
        assert report.convergence_bound_s == {}


def test_full_share_decides_like_cqlite_but_costs_more():
    grid = generate_grid(30, 30, 0.15, 5)
    base = dict(grid=grid, robots=3, seed=2, sensor=SensorParams(0.6, 360), t_max=60)
    lite = run(SimConfig(policy="cqlite", **base))
    full = run(SimConfig(policy="full_share", **base))

    assert full.path_length_m == lite.path_length_m
    assert [t.exploration_pct for t in full.ticks] == [t.exploration_pct for t in lite.ticks]
    assert full.total_bytes > lite.total_bytes
    assert full.merges == full.iterations
    assert lite.merges < lite.iterations
    assert full.bytes_by_kind["qtable_share"] > 0
    assert lite.bytes_by_kind["qtable_share"] == 0


def test_lone_robot_never_merges(room_grid):
    report = run(SimConfig(grid=room_grid(21, 21), robots=1, starts=[(10, 10)], sensor=SHORT_SENSOR, t_max=200))
    assert report.merges == 0
    assert report.total_bytes == 0


def test_snapshots_written(tmp_path, room_grid):
    cfg = SimConfig(
        grid=room_grid(21, 21), robots=1, starts=[(10, 10)], sensor=SHORT_SENSOR,
        t_max=3, snapshot_every=1, snapshot_dir=str(tmp_path),
    )
    state = initial_state(cfg)
    while not state.terminated:
        step(state)
    assert sorted(p.name for p in tmp_path.iterdir())[0] == "union_tick00000.pgm"
    assert len(list(tmp_path.iterdir())) == state.tick


def test_step_after_termination_rejected(room_grid):
    state = initial_state(SimConfig(grid=room_grid(21, 21), robots=1, starts=[(10, 10)], t_max=1))
    step(state)
    assert state.terminated
    with pytest.raises(RuntimeError):
        step(state)


def test_report_summary_fields(room_grid):
    state = initial_state(SimConfig(grid=room_grid(21, 21), robots=2, seed=1, sensor=SHORT_SENSOR, t_max=5))
    while not state.terminated:
        step(state)
    report = build_report(state)
    row = report.summary_row()
    assert row['iterations'] == report.iterations
    assert row['path_length_m'] == pytest.approx(sum(report.path_length_m.values()))
    assert list(report.tick_frame().columns)[:6] == [
        "tick", "sim_time_s", "exploration_pct", "overlap_pct", "bytes_cum", "merges_cum",
    ]
    assert 0.0 <= report.overlap_pct <= 100.0


# ════════════════════════════════════════════════════════════════════════════
# CONFIG
# ════════════════════════════════════════════════════════════════════════════

def test_occupied_start_rejected(room_grid):
    with pytest.raises(SimConfigError):
        initial_state(SimConfig(grid=room_grid(9, 9), robots=1, starts=[(0, 0)]))


def test_start_outside_grid_rejected(room_grid):
    with pytest.raises(SimConfigError):
        initial_state(SimConfig(grid=room_grid(9, 9), robots=1, starts=[(12, 4)]))


def test_start_count_must_match(room_grid):
    with pytest.raises(SimConfigError):
        initial_state(SimConfig(grid=room_grid(9, 9), robots=2, starts=[(1, 1)]))


def test_unknown_policy_rejected(room_grid):
    with pytest.raises(SimConfigError):
        initial_state(SimConfig(grid=room_grid(9, 9), robots=1, policy="random_walk"))


def test_default_starts_are_free_distinct_and_seeded():
    grid = generate_grid(40, 40, 0.2, 1)
    starts = default_starts(grid, 4, seed=8)
    assert len(set(starts)) == 4
    assert all(grid.is_free(x, y) for x, y in starts)
    assert starts == default_starts(grid, 4, seed=8)


def test_robot_count_limited_by_free_cells(room_grid):
    with pytest.raises(SimConfigError):
        default_starts(room_grid(3, 3), 2, seed=0)


def test_map_requests_are_counted_in_ledger(room_grid):
    state = initial_state(SimConfig(grid=room_grid(9, 9), robots=2, starts=[(3, 4), (5, 4)], t_max=50))
    while not state.terminated:
        step(state)
    assert state.ledger.sends_by_kind[KIND_MAP_REQUEST] == state.stats['map_requests']
    assert np.all([not a.active or a.s_d < 2 for a in state.agents])
