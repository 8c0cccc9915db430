"""
learner.py - Per-robot Q-table, coverage-biased reward, Q-update, action
selection and convergence diagnostics
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from .frontier import ExploredSet, FrontierState, cell_of_state, overlap_probability

MERGE_OVERWRITE = "overwrite"
MERGE_MAX = "max"

Q_CSV_FIELDS = ["state_id", "x", "y", "q"]


class UpdateError(ValueError):
    pass


class NoActionError(RuntimeError):
    pass


class RemoteValueError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = config.ALPHA
    gamma: float = config.GAMMA
    lambda_step: float = config.LAMBDA_STEP
    rho: float = config.RHO
    sigma: float = config.SIGMA
    r_c: float = config.COMM_RANGE

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        for name in ('lambda_step', 'rho', 'sigma'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.r_c <= 0:
            raise ValueError(f"r_c must be positive, got {self.r_c}")


class QTable:
    """State id -> Q-value; absent keys read as 0"""

    def __init__(self, owner: int = 0):
        self.owner = owner
        self.version = 0
        self._values: Dict[int, float] = {}

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, sid: int) -> bool:
        return sid in self._values

    def get(self, sid: int) -> float:
        return self._values.get(sid, 0.0)

    def set(self, sid: int, value: float):
        if not math.isfinite(value):
            raise UpdateError(f"non-finite Q-value {value} for state {sid}")
        self._values[sid] = float(value)
        self.version += 1

    def items(self):
        return self._values.items()

    def keys(self):
        return self._values.keys()

    def as_dict(self) -> Dict[int, float]:
        return dict(self._values)

    def copy(self) -> 'QTable':
        other = QTable(self.owner)
        other._values = dict(self._values)
        other.version = self.version
        return other

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for sid in sorted(self._values):
            x, y = cell_of_state(sid)
            rows.append({'state_id': sid, 'x': x, 'y': y, 'q': self._values[sid]})
        return pd.DataFrame(rows, columns=Q_CSV_FIELDS)

    def save_csv(self, path: Union[str, Path]):
        """Write "state_id,x,y,q" rows ordered by state id"""
        self.to_frame().to_csv(path, index=False, float_format="%.10g")


@dataclass(frozen=True)
class ActionCandidate:
    """A frontier state under consideration with its computed Q and estimated traversal time"""
    state_id: int
    q: float
    traversal_time: float = 0.0


# ════════════════════════════════════════════════════════════════════════════
# REWARD + UPDATE
# ════════════════════════════════════════════════════════════════════════════

def compute_reward(
    s: FrontierState,
    es: ExploredSet,
    q_current: float,
    p: LearnerParams,
    r_is: float = config.R_IS,
    step_distance: float = 1.0,
) -> float:
    """
    Coverage-biased reward for moving to s

    The step cost is lambda_step per meter of the path (step_distance).

    Args:
        s: Candidate state
        es: Explored set of the deciding robot
        q_current: Current Q-value of s
        p: Learner parameters
        r_is: Overlap radius in meters
        step_distance: Path length to s in meters

    Returns:
        -lambda for explored states, otherwise
        lambda - Q + rho * (1 - P_overlap) + sigma * r_c
    """
    step_cost = p.lambda_step * step_distance
    if s in es:
        return -step_cost
    overlap = overlap_probability(s, es, r_is)
    return step_cost - q_current + p.rho * (1.0 - overlap) + p.sigma * p.r_c


def q_value(table: QTable, s: int, reward: float, next_ids: Iterable[int], p: LearnerParams) -> float:
    """Q-update result for s without writing it"""
    if not math.isfinite(reward):
        raise UpdateError(f"non-finite reward {reward} for state {s}")
    best_next = max((table.get(n) for n in next_ids), default=0.0)
    return (1.0 - p.alpha) * table.get(s) + p.alpha * (reward + p.gamma * best_next)


def q_update(table: QTable, s: int, reward: float, next_ids: Iterable[int], p: LearnerParams) -> float:
    """
    Q' = (1 - alpha) Q(s) + alpha (r + gamma max_next Q), stored at s

    Args:
        table: Table to update
        s: State id
        reward: Reward for s
        next_ids: State ids reachable from the next state (absent read as 0)
        p: Learner parameters

    Returns:
        The new Q-value
    """
    value = q_value(table, s, reward, next_ids, p)
    table.set(s, value)
    return value


def select_action(
    candidates: Sequence[ActionCandidate],
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """
    Argmax over candidate Q-values

    Ties go to the smaller traversal time, then the smaller state id. With
    epsilon > 0 a uniformly random candidate is taken with that probability.

    Returns:
        Chosen state id
    """
    if not candidates:
        raise NoActionError("no candidate frontier states")
    if epsilon > 0:
        if rng is None:
            raise ValueError("epsilon-greedy selection needs an rng")
        if rng.random() < epsilon:
            ordered = sorted(candidates, key=lambda c: c.state_id)
            return ordered[int(rng.integers(len(ordered)))].state_id
    best = min(candidates, key=lambda c: (-c.q, c.traversal_time, c.state_id))
    return best.state_id


def apply_remote_q(table: QTable, remote: Tuple[int, float], rule: str = MERGE_OVERWRITE) -> QTable:
    """Write a neighbor's (state id, Q) into the table (last writer wins, or max)"""
    sid, value = remote
    if not math.isfinite(value):
        raise RemoteValueError(f"non-finite remote Q-value {value} for state {sid}")
    if rule == MERGE_MAX and sid in table:
        value = max(value, table.get(sid))
    elif rule not in (MERGE_OVERWRITE, MERGE_MAX):
        raise ValueError(f"Unknown Q merge rule {rule!r}")
    table.set(sid, value)
    return table


# ════════════════════════════════════════════════════════════════════════════
# CONVERGENCE DIAGNOSTICS
# ════════════════════════════════════════════════════════════════════════════

def convergence_bound(deltas: Sequence[float], e1: float, confidence: float, gamma: float) -> float:
    """
    Weighted-Hoeffding bound on the time to reach a state

    With t = len(deltas) + 1 and r_j = 1 + gamma * delta_j / j:
      psi_i = prod_{j=t-i}^{t-1} r_j / t   for i = 1..t-1
      omega = prod_{j=1}^{t-1} r_j / t
      bound = omega * E_1 + sqrt(ln(1/e) * sum(psi_i^2) / 2)

    Args:
        deltas: delta_1..delta_{t-1}, each in [0, 1]
        e1: First traversal-time estimate in seconds
        confidence: e in (0, 1)
        gamma: Discount factor

    Returns:
        Bound in seconds
    """
    d = np.asarray(deltas, dtype=np.float64)
    if d.size and (np.any(d < 0) or np.any(d > 1) or not np.all(np.isfinite(d))):
        raise PreconditionError("every delta must lie in [0, 1]")
    if e1 < 0:
        raise PreconditionError(f"E_1 must be >= 0, got {e1}")
    if not 0 < confidence < 1:
        raise PreconditionError(f"confidence must be in (0, 1), got {confidence}")

    t = d.size + 1
    j = np.arange(1, t, dtype=np.float64)
    ratios = 1.0 + gamma * d / j
    # suffix[i-1] = prod_{j=t-i}^{t-1} r_j
    suffix = np.cumprod(ratios[::-1])
    psi = suffix / t
    omega = (suffix[-1] if suffix.size else 1.0) / t
    return float(omega * e1 + math.sqrt(math.log(1.0 / confidence) * float(np.sum(psi ** 2)) / 2.0))


def q_table_mse(table: QTable, reference: QTable) -> float:
    """Mean squared difference over the union of keys (absent = 0)"""
    keys = set(table.keys()) | set(reference.keys())
    if not keys:
        return 0.0
    return sum((table.get(k) - reference.get(k)) ** 2 for k in keys) / len(keys)


@dataclass
class ConvergenceDiagnostics:
    """Per-move MSE, traversal estimate and error ratio of one robot"""
    mse: List[float] = field(default_factory=list)
    traversal_times: List[float] = field(default_factory=list)
    deltas: List[float] = field(default_factory=list)

    def record(self, mse: float, traversal_time: float):
        self.mse.append(mse)
        self.traversal_times.append(traversal_time)
        if traversal_time > 0:
            self.deltas.append(mse / traversal_time)

    @property
    def e1(self) -> float:
        return next((e for e in self.traversal_times if e > 0), 0.0)

    def bound(self, confidence: float = config.CONFIDENCE_E, gamma: float = config.GAMMA) -> float:
        clipped = [min(max(d, 0.0), 1.0) for d in self.deltas]
        return convergence_bound(clipped, self.e1, confidence, gamma)


def q_value_range(r_min: float, r_max: float, gamma: float) -> Tuple[float, float]:
    return min(0.0, r_min) / (1.0 - gamma), max(0.0, r_max) / (1.0 - gamma)


def q_bound_violations(table: QTable, r_min: float, r_max: float, gamma: float, tol: float = 1e-9) -> List[Tuple[int, float]]:
    """Entries outside [min(0, r_min), max(0, r_max)] / (1 - gamma)"""
    low, high = q_value_range(r_min, r_max, gamma)
    return [(sid, q) for sid, q in sorted(table.items()) if q < low - tol or q > high + tol]
