"""
network.py - Range-limited robot communication: neighbor graph, wire
messages, next-tick FIFO delivery and byte-exact payload accounting
"""

import math
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Mapping, Optional, Tuple, Union

import networkx as nx
import numpy as np

import config
from .local_map import MapPatch
from .world import Pose

KIND_Q_UPDATE = 1
KIND_EXPLORED_FRONTIER = 2
KIND_MAP_REQUEST = 3
KIND_MAP_PATCH = 4
KIND_QTABLE_SHARE = 5

KIND_NAMES = {
    KIND_Q_UPDATE: "q_update",
    KIND_EXPLORED_FRONTIER: "explored_frontier",
    KIND_MAP_REQUEST: "map_request",
    KIND_MAP_PATCH: "map_patch",
    KIND_QTABLE_SHARE: "qtable_share",
}

ORIGIN_FLAGS = {"local": 0, "received": 1}

# little-endian wire layouts
HEADER = struct.Struct('<BBH')           # kind, sender, reserved
Q_ENTRY = struct.Struct('<qd')           # state key, IEEE754 value
EXPLORED = struct.Struct('<qiiB3x')      # state key, x, y, origin, pad
PATCH_COUNT = struct.Struct('<I')
PATCH_ENTRY = struct.Struct('<Ib')       # cell index, state


@dataclass(frozen=True)
class QUpdate:
    sender: int
    state_id: int
    value: float
    kind: int = field(default=KIND_Q_UPDATE, init=False)


@dataclass(frozen=True)
class ExploredFrontier:
    sender: int
    state_id: int
    cell: Tuple[int, int]
    origin: str = "local"
    kind: int = field(default=KIND_EXPLORED_FRONTIER, init=False)


@dataclass(frozen=True)
class MapRequest:
    """known, when set, is the requester's packed known-cell bitmap (delta patch mode)"""
    sender: int
    known: Optional[bytes] = None
    kind: int = field(default=KIND_MAP_REQUEST, init=False)


@dataclass(frozen=True)
class MapPatchMsg:
    sender: int
    patch: MapPatch
    kind: int = field(default=KIND_MAP_PATCH, init=False)


@dataclass(frozen=True)
class QTableShare:
    """Whole table, with the entry updated this tick listed first"""
    sender: int
    entries: Tuple[Tuple[int, float], ...]
    updated: Optional[Tuple[int, float]] = None
    kind: int = field(default=KIND_QTABLE_SHARE, init=False)


Message = Union[QUpdate, ExploredFrontier, MapRequest, MapPatchMsg, QTableShare]


def payload_bytes(msg: Message) -> int:
    """Exact wire size of a message including its header"""
    if msg.kind == KIND_Q_UPDATE:
        return HEADER.size + Q_ENTRY.size
    if msg.kind == KIND_EXPLORED_FRONTIER:
        return HEADER.size + EXPLORED.size
    if msg.kind == KIND_MAP_REQUEST:
        return HEADER.size + (len(msg.known) if msg.known is not None else 0)
    if msg.kind == KIND_MAP_PATCH:
        return HEADER.size + PATCH_COUNT.size + len(msg.patch) * PATCH_ENTRY.size
    if msg.kind == KIND_QTABLE_SHARE:
        return HEADER.size + len(msg.entries) * Q_ENTRY.size
    raise ValueError(f"Unknown message kind {msg.kind}")


def full_table_payload(table) -> int:
    """Bytes to share every entry of a Q-table in one message"""
    return HEADER.size + len(table) * Q_ENTRY.size


def encode(msg: Message) -> bytes:
    """Serialize a message to its wire form"""
    out = bytearray(HEADER.pack(msg.kind, msg.sender, 0))
    if msg.kind == KIND_Q_UPDATE:
        out += Q_ENTRY.pack(msg.state_id, msg.value)
    elif msg.kind == KIND_EXPLORED_FRONTIER:
        out += EXPLORED.pack(msg.state_id, msg.cell[0], msg.cell[1], ORIGIN_FLAGS[msg.origin])
    elif msg.kind == KIND_MAP_REQUEST:
        out += msg.known or b''
    elif msg.kind == KIND_MAP_PATCH:
        out += PATCH_COUNT.pack(len(msg.patch))
        for index, state in zip(msg.patch.indices.tolist(), msg.patch.states.tolist()):
            out += PATCH_ENTRY.pack(index, state)
    elif msg.kind == KIND_QTABLE_SHARE:
        for sid, value in msg.entries:
            out += Q_ENTRY.pack(sid, value)
    else:
        raise ValueError(f"Unknown message kind {msg.kind}")
    return bytes(out)


def pack_known(known_mask: np.ndarray) -> bytes:
    """Bit-per-cell summary of known cells, ceil(W*H / 8) bytes"""
    return np.packbits(known_mask.ravel()).tobytes()


def unpack_known(known: bytes, size: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(known, dtype=np.uint8), count=size).astype(bool)


# ════════════════════════════════════════════════════════════════════════════
# NEIGHBOR GRAPH
# ════════════════════════════════════════════════════════════════════════════

class NeighborGraph:
    """Undirected robot graph; edge (i, j) iff the robots are within r_c"""

    def __init__(self, graph: nx.Graph, r_c: float):
        self.graph = graph
        self.r_c = r_c

    def neighbors(self, robot_id: int) -> List[int]:
        return sorted(self.graph.neighbors(robot_id))

    def has_edge(self, a: int, b: int) -> bool:
        return self.graph.has_edge(a, b)

    def is_connected(self) -> bool:
        return self.graph.number_of_nodes() <= 1 or nx.is_connected(self.graph)

    def components(self) -> List[List[int]]:
        return sorted(sorted(c) for c in nx.connected_components(self.graph))


def neighbor_graph(poses: Mapping[int, Pose], r_c: float = config.COMM_RANGE) -> NeighborGraph:
    """
    Build the communication graph from robot poses

    Args:
        poses: Robot id -> pose in meters
        r_c: Communication range in meters

    Returns:
        NeighborGraph over every robot id, no self-edges
    """
    if r_c <= 0:
        raise ValueError(f"r_c must be positive, got {r_c}")
    graph = nx.Graph()
    ids = sorted(poses)
    graph.add_nodes_from(ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if math.hypot(poses[a].x - poses[b].x, poses[a].y - poses[b].y) <= r_c:
                graph.add_edge(a, b)
    return NeighborGraph(graph, r_c)


# ════════════════════════════════════════════════════════════════════════════
# LEDGER + DELIVERY
# ════════════════════════════════════════════════════════════════════════════

class PayloadLedger:
    """Cumulative bytes per robot, per kind and per tick; cost = kappa * bytes"""

    def __init__(self, kappa: float = config.COST_PER_BYTE):
        self.kappa = kappa
        self.tick = 0
        self.bytes_by_robot: Dict[int, int] = defaultdict(int)
        self.bytes_by_kind: Dict[int, int] = defaultdict(int)
        self.sends_by_kind: Dict[int, int] = defaultdict(int)
        self.copies_by_kind: Dict[int, int] = defaultdict(int)
        self.bytes_by_tick: Dict[int, int] = defaultdict(int)
        self.q_entries_by_tick: Dict[int, Dict[int, int]] = defaultdict(lambda: defaultdict(int))

    def record(self, msg: Message, copies: int):
        size = payload_bytes(msg) * copies
        self.bytes_by_robot[msg.sender] += size
        self.bytes_by_kind[msg.kind] += size
        self.sends_by_kind[msg.kind] += 1
        self.copies_by_kind[msg.kind] += copies
        self.bytes_by_tick[self.tick] += size
        if msg.kind == KIND_Q_UPDATE:
            self.q_entries_by_tick[self.tick][msg.sender] += 1
        elif msg.kind == KIND_QTABLE_SHARE:
            self.q_entries_by_tick[self.tick][msg.sender] += len(msg.entries)

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_by_robot.values())

    def cost(self, robot_id: int) -> float:
        return self.kappa * self.bytes_by_robot.get(robot_id, 0)

    def total_cost(self) -> float:
        return self.kappa * self.total_bytes

    def is_conserved(self) -> bool:
        return sum(self.bytes_by_kind.values()) == sum(self.bytes_by_robot.values())

    def kind_totals(self) -> Dict[str, int]:
        return {KIND_NAMES[k]: self.bytes_by_kind.get(k, 0) for k in KIND_NAMES}


class MessageBus:
    """
    Per-recipient FIFO queues with one-tick latency

    Messages sent during tick t become readable after deliver() at the
    tick boundary. A dropped copy is still charged to the sender.
    """

    def __init__(self, drop_probability: float = 0.0, rng: Optional[np.random.Generator] = None):
        if drop_probability > 0 and rng is None:
            raise ValueError("a drop probability needs an rng")
        self.drop_probability = drop_probability
        self.rng = rng
        self._pending: Dict[int, Deque[Message]] = defaultdict(deque)
        self._inbox: Dict[int, Deque[Message]] = defaultdict(deque)
        self.dropped = 0

    def _enqueue(self, msg: Message, recipient: int):
        if self.drop_probability > 0 and self.rng.random() < self.drop_probability:
            self.dropped += 1
            return False
        self._pending[recipient].append(msg)
        return True

    def broadcast(self, msg: Message, graph: NeighborGraph, ledger: PayloadLedger) -> List[int]:
        """
        One copy per neighbor of the sender

        Returns:
            Recipients whose copy was enqueued
        """
        recipients = graph.neighbors(msg.sender)
        ledger.record(msg, len(recipients))
        return [r for r in recipients if self._enqueue(msg, r)]

    def send(self, msg: Message, recipient: int, ledger: PayloadLedger) -> bool:
        """Unicast one copy"""
        ledger.record(msg, 1)
        return self._enqueue(msg, recipient)

    def deliver(self):
        """Move everything sent this tick into the recipients' inboxes"""
        for rid, queue in self._pending.items():
            self._inbox[rid].extend(queue)
        self._pending = defaultdict(deque)

    def receive(self, robot_id: int) -> List[Message]:
        """Drain a robot's inbox in arrival order"""
        queue = self._inbox.pop(robot_id, None)
        return list(queue) if queue else []

    def take(self, robot_id: int, kind: int) -> List[Message]:
        """Remove and return the inbox messages of one kind, leaving the rest queued"""
        queue = self._inbox.get(robot_id)
        if not queue:
            return []
        taken = [m for m in queue if m.kind == kind]
        if taken:
            self._inbox[robot_id] = deque(m for m in queue if m.kind != kind)
        return taken

    def pending_count(self) -> int:
        return sum(len(q) for q in self._pending.values()) + sum(len(q) for q in self._inbox.values())


def broadcast(msg: Message, graph: NeighborGraph, ledger: PayloadLedger, bus: MessageBus) -> List[int]:
    return bus.broadcast(msg, graph, ledger)
