import math

import numpy as np
import pytest

from exploration_engine.learner import QTable
from exploration_engine.local_map import FREE, OCCUPIED, LocalMap, MapPatch
from exploration_engine.network import (
    KIND_MAP_PATCH,
    KIND_Q_UPDATE,
    ExploredFrontier,
    MapPatchMsg,
    MapRequest,
    MessageBus,
    PayloadLedger,
    QTableShare,
    QUpdate,
    broadcast,
    encode,
    full_table_payload,
    neighbor_graph,
    pack_known,
    payload_bytes,
    unpack_known,
)
from exploration_engine.world import Pose


def poses_at(*points):
    return {i: Pose(x, y) for i, (x, y) in enumerate(points)}


def patch_of(k):
    return MapPatch(np.arange(k, dtype=np.int64), np.full(k, FREE, dtype=np.int8), source=0)


# ════════════════════════════════════════════════════════════════════════════
# WIRE SIZES
# ════════════════════════════════════════════════════════════════════════════

def test_q_update_is_20_bytes():
    assert payload_bytes(QUpdate(0, 123, 4.14)) == 20


def test_explored_frontier_is_24_bytes():
    assert payload_bytes(ExploredFrontier(0, 123, (3, 0))) == 24


@pytest.mark.parametrize("k", [0, 1, 7, 250])
def test_map_patch_size(k):
    assert payload_bytes(MapPatchMsg(0, patch_of(k))) == 8 + 5 * k


def test_map_request_sizes():
    assert payload_bytes(MapRequest(0)) == 4
    known = pack_known(np.zeros((5, 5), dtype=bool))
    assert payload_bytes(MapRequest(0, known)) == 4 + math.ceil(25 / 8)


@pytest.mark.parametrize("msg", [
    QUpdate(3, (5 << 32) | 2, -1.5),
    ExploredFrontier(1, (5 << 32) | 2, (2, 5), "received"),
    MapRequest(2),
    MapRequest(2, b'\x01\x02'),
    MapPatchMsg(4, patch_of(3)),
    QTableShare(0, ((1, 2.0), (3, 4.0)), (1, 2.0)),
    QTableShare(0, ()),
])
def test_encoded_length_equals_payload_bytes(msg):
    assert len(encode(msg)) == payload_bytes(msg)
    assert encode(msg)[0] == msg.kind
    assert encode(msg)[1] == msg.sender


def test_full_table_payload_scales_with_entries():
    table = QTable()
    assert full_table_payload(table) == 4
    table.set(1, 1.0)
    assert full_table_payload(table) == payload_bytes(QUpdate(0, 1, 1.0))
    for sid in range(2, 11):
        table.set(sid, float(sid))
    assert full_table_payload(table) == 4 + 16 * 10
    assert full_table_payload(table) / payload_bytes(QUpdate(0, 1, 1.0)) == pytest.approx(8.2)


def test_table_share_matches_full_table_payload():
    table = QTable()
    for sid in range(6):
        table.set(sid, 1.0)
    share = QTableShare(0, tuple(sorted(table.items())), (0, 1.0))
    assert payload_bytes(share) == full_table_payload(table)


def test_empty_table_share_is_header_only():
    assert payload_bytes(QTableShare(0, ())) == full_table_payload(QTable()) == 4


def test_known_bitmap_round_trip():
    mask = np.random.default_rng(2).random((7, 9)) < 0.5
    assert np.array_equal(unpack_known(pack_known(mask), mask.size), mask.ravel())


# ════════════════════════════════════════════════════════════════════════════
# NEIGHBOR GRAPH
# ════════════════════════════════════════════════════════════════════════════

def test_close_robots_are_connected():
    graph = neighbor_graph(poses_at((0, 0), (3, 4)), 40.0)
    assert graph.has_edge(0, 1)
    assert graph.is_connected()


def test_far_robots_are_not_connected():
    graph = neighbor_graph(poses_at((0, 0), (100, 0)), 40.0)
    assert not graph.has_edge(0, 1)
    assert not graph.is_connected()
    assert graph.components() == [[0], [1]]


def test_adjacency_matches_pairwise_distances():
    rng = np.random.default_rng(6)
    for _ in range(20):
        points = [tuple(p) for p in rng.uniform(0, 100, size=(5, 2))]
        graph = neighbor_graph(poses_at(*points), 40.0)
        for i in range(5):
            expected = [j for j in range(5) if j != i and math.dist(points[i], points[j]) <= 40.0]
            assert graph.neighbors(i) == expected


def test_comm_range_must_be_positive():
    with pytest.raises(ValueError):
        neighbor_graph(poses_at((0, 0)), 0.0)


# ════════════════════════════════════════════════════════════════════════════
# DELIVERY + LEDGER
# ════════════════════════════════════════════════════════════════════════════

def test_broadcast_charges_one_copy_per_neighbor():
    graph = neighbor_graph(poses_at((0, 0), (1, 0), (2, 0)), 1.5)
    ledger, bus = PayloadLedger(kappa=0.5), MessageBus()

    delivered = broadcast(QUpdate(1, 9, 4.14), graph, ledger, bus)
    assert delivered == [0, 2]
    assert ledger.total_bytes == 40
    assert ledger.bytes_by_robot[1] == 40
    assert ledger.bytes_by_kind[KIND_Q_UPDATE] == 40
    assert ledger.copies_by_kind[KIND_Q_UPDATE] == 2
    assert ledger.cost(1) == 20.0
    assert ledger.is_conserved()


def test_isolated_robot_sends_nothing():
    graph = neighbor_graph(poses_at((0, 0), (100, 0)), 40.0)
    ledger, bus = PayloadLedger(), MessageBus()
    assert broadcast(QUpdate(0, 9, 1.0), graph, ledger, bus) == []
    assert ledger.total_bytes == 0
    assert bus.pending_count() == 0


def test_messages_arrive_next_tick_in_send_order():
    ledger, bus = PayloadLedger(), MessageBus()
    bus.send(MapRequest(0), 1, ledger)
    bus.send(MapPatchMsg(0, patch_of(2)), 1, ledger)
    assert bus.receive(1) == []

    bus.deliver()
    kinds = [m.kind for m in bus.receive(1)]
    assert kinds == [MapRequest(0).kind, KIND_MAP_PATCH]
    assert bus.receive(1) == []
    assert ledger.total_bytes == 4 + 18


def test_take_removes_one_kind_and_keeps_the_rest_in_order():
    ledger, bus = PayloadLedger(), MessageBus()
    bus.send(QUpdate(0, 1, 1.0), 1, ledger)
    bus.send(MapRequest(0), 1, ledger)
    bus.send(QUpdate(0, 2, 2.0), 1, ledger)
    bus.deliver()

    assert [m.sender for m in bus.take(1, MapRequest(0).kind)] == [0]
    assert bus.take(1, MapRequest(0).kind) == []
    assert [m.state_id for m in bus.receive(1)] == [1, 2]
    assert bus.take(2, MapRequest(0).kind) == []


def test_dropped_copies_are_still_charged():
    graph = neighbor_graph(poses_at((0, 0), (1, 0)), 40.0)
    ledger = PayloadLedger()
    bus = MessageBus(0.5, np.random.default_rng(0))
    delivered = sum(len(bus.broadcast(QUpdate(0, i, 1.0), graph, ledger)) for i in range(200))

    assert ledger.total_bytes == 200 * 20
    assert delivered + bus.dropped == 200
    assert 0 < bus.dropped < 200


def test_drop_needs_rng():
    with pytest.raises(ValueError):
        MessageBus(0.1)


def test_ledger_kind_totals_and_per_tick_entries():
    ledger = PayloadLedger()
    ledger.tick = 3
    ledger.record(QTableShare(2, ((1, 1.0), (2, 2.0), (3, 3.0)), (1, 1.0)), 2)
    ledger.record(MapPatchMsg(1, MapPatch(np.array([0]), np.array([OCCUPIED], dtype=np.int8))), 1)
    assert ledger.q_entries_by_tick[3][2] == 3
    assert ledger.bytes_by_tick[3] == 2 * (4 + 48) + 13
    totals = ledger.kind_totals()
    assert totals["qtable_share"] == 104
    assert totals["map_patch"] == 13
    assert totals["q_update"] == 0
    assert ledger.total_cost() == ledger.total_bytes
