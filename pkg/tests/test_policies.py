import numpy as np
import pytest

from exploration_engine.frontier import ORIGIN_RECEIVED, ExploredSet, FrontierState
from exploration_engine.learner import LearnerParams, QTable, q_value
from exploration_engine.planner import ControllerParams
from exploration_engine.policies import (
    POLICY_SPECS,
    Candidate,
    cqlite_policy,
    full_share_policy_wrapper,
    greedy_frontier_policy,
    novel_candidates,
)


def cand(x, y, d):
    return Candidate(FrontierState((x, y)), d)


def test_greedy_single_frontier():
    only = cand(3, 3, 1.0)
    assert greedy_frontier_policy(ExploredSet(), [only]) == only.state


def test_greedy_prefers_near_frontier():
    near, far = cand(8, 8, 0.4), cand(1, 1, 2.0)
    assert greedy_frontier_policy(ExploredSet(), [far, near]) == near.state


def test_greedy_matches_min_distance_oracle():
    rng = np.random.default_rng(13)
    for _ in range(100):
        cells = {tuple(int(v) for v in c) for c in rng.integers(0, 30, size=(8, 2))}
        cands = [cand(x, y, float(rng.integers(1, 6))) for x, y in cells]
        expected = min(cands, key=lambda c: (c.distance_m, c.id)).state
        assert greedy_frontier_policy(ExploredSet(), cands) == expected


def test_greedy_skips_own_visits_but_not_notices():
    es = ExploredSet()
    es.add((1, 1))
    es.add((2, 2), ORIGIN_RECEIVED)
    cands = [cand(1, 1, 0.1), cand(2, 2, 0.2), cand(3, 3, 0.3)]
    assert greedy_frontier_policy(es, cands) == cands[1].state
    assert greedy_frontier_policy(es, cands[:1]) is None


def test_novel_candidates_with_notices():
    es = ExploredSet()
    es.add((2, 2), ORIGIN_RECEIVED)
    cands = [cand(2, 2, 0.2), cand(3, 3, 0.3)]
    assert novel_candidates(cands, es, consults_notices=True) == cands[1:]
    assert novel_candidates(cands, es, consults_notices=False) == cands


def _run_cqlite(free_map, cands, es, policy=cqlite_policy):
    local = free_map(11, 11)
    return policy(
        QTable(), es, cands, local, (5, 5), LearnerParams(), ControllerParams(),
        0.2, distance_aware=False,
    )


def test_cqlite_ties_go_to_faster_traversal(free_map):
    cands = [cand(9, 5, 0.4), cand(3, 5, 0.2)]
    decision = _run_cqlite(free_map, cands, ExploredSet(0.1))
    assert decision.state.cell == (3, 5)
    assert decision.next_ids == (cands[0].id,)


def test_cqlite_avoids_overlap(free_map):
    es = ExploredSet(0.1)
    es.add((3, 6))
    cands = [cand(9, 5, 0.4), cand(3, 5, 0.2)]
    decision = _run_cqlite(free_map, cands, es)
    assert decision.state.cell == (9, 5)


def test_cqlite_decision_carries_q_of_choice(free_map):
    cands = [cand(9, 5, 0.4), cand(3, 5, 0.2)]
    decision = _run_cqlite(free_map, cands, ExploredSet(0.1))
    expected = q_value(QTable(), decision.state.id, decision.reward, decision.next_ids, LearnerParams())
    assert decision.q == pytest.approx(expected)


def test_full_share_makes_the_same_choice(free_map):
    es = ExploredSet(0.1)
    es.add((3, 6))
    cands = [cand(9, 5, 0.4), cand(3, 5, 0.2), cand(5, 9, 0.4)]
    a = _run_cqlite(free_map, cands, es)
    b = _run_cqlite(free_map, cands, es, policy=full_share_policy_wrapper)
    assert a == b


def test_policy_switches():
    assert POLICY_SPECS["cqlite"].learns and not POLICY_SPECS["cqlite"].merges_every_tick
    assert POLICY_SPECS["full_share"].shares_full_table
    assert not POLICY_SPECS["greedy_frontier"].learns
