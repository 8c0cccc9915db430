"""
metrics.py - Trial metrics: exploration and overlap percentages, the
MetricsReport record, tick CSV rows and merge-frequency checks
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

import config
from utils.logger import setup_logging
from .local_map import FREE, OCCUPIED, UNKNOWN, LocalMap, truth_states
from .world import GroundTruthGrid

logger = setup_logging(__name__)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass
class TickRecord:
    tick: int
    sim_time_s: float
    exploration_pct: float
    overlap_pct: float
    bytes_cum: int
    merges_cum: int
    max_delta_q: float


@dataclass
class MergeFrequency:
    merges: int
    iterations: int
    ratio: float


@dataclass
class MetricsReport:
    """Per-trial record of mapping time, path length, coverage, payload and merge counters"""
    policy: str
    seed: int
    robots: int
    iterations: int = 0
    sim_time_s: float = 0.0
    termination: str = ""
    path_length_m: Dict[int, float] = field(default_factory=dict)
    exploration_pct: float = 0.0
    overlap_pct: float = 0.0
    ssim: float = 0.0
    total_bytes: int = 0
    total_cost: float = 0.0
    kappa: float = config.COST_PER_BYTE
    bytes_by_robot: Dict[int, int] = field(default_factory=dict)
    bytes_by_kind: Dict[str, int] = field(default_factory=dict)
    merges: int = 0
    map_requests: int = 0
    q_entries_shared: int = 0
    max_q_entries_per_robot_tick: int = 0
    convergence_bound_s: Dict[int, float] = field(default_factory=dict)
    q_bound_violations: int = 0
    cover_violations: int = 0
    partition_cost: Dict[int, float] = field(default_factory=dict)
    connectivity_violations: int = 0
    skipped_moves: int = 0
    ticks: List[TickRecord] = field(default_factory=list)

    @property
    def total_path_length_m(self) -> float:
        return float(sum(self.path_length_m.values()))

    @property
    def merge_ratio(self) -> float:
        return self.merges / self.iterations if self.iterations else 0.0

    def tick_frame(self) -> pd.DataFrame:
        """One row per tick with the documented column order"""
        return pd.DataFrame([asdict(t) for t in self.ticks], columns=config.TICK_CSV_FIELDS)

    def summary_row(self) -> Dict:
        """Flat scalar summary used for summary.csv"""
        row = {
            'policy': self.policy,
            'seed': self.seed,
            'robots': self.robots,
            'iterations': self.iterations,
            'sim_time_s': self.sim_time_s,
            'termination': self.termination,
            'path_length_m': self.total_path_length_m,
            'exploration_pct': self.exploration_pct,
            'overlap_pct': self.overlap_pct,
            'ssim': self.ssim,
            'total_bytes': self.total_bytes,
            'total_cost': self.total_cost,
            'merges': self.merges,
            'merge_ratio': self.merge_ratio,
            'map_requests': self.map_requests,
            'q_entries_shared': self.q_entries_shared,
            'q_bound_violations': self.q_bound_violations,
            'cover_violations': self.cover_violations,
            'connectivity_violations': self.connectivity_violations,
            'skipped_moves': self.skipped_moves,
        }
        for kind, size in sorted(self.bytes_by_kind.items()):
            row[f'bytes_{kind}'] = size
        return row


SUMMARY_NUMERIC_FIELDS = [
    'iterations', 'sim_time_s', 'path_length_m', 'exploration_pct', 'overlap_pct', 'ssim',
    'total_bytes', 'total_cost', 'merges', 'merge_ratio', 'map_requests', 'q_entries_shared',
]


# ════════════════════════════════════════════════════════════════════════════
# MAP-LEVEL METRICS
# ════════════════════════════════════════════════════════════════════════════

def team_union_map(maps: Sequence[LocalMap]) -> LocalMap:
    """Cell-wise union of robot maps; occupied wins over free"""
    first = maps[0]
    union = LocalMap(first.width, first.height, first.resolution)
    stacked = np.stack([m.cells for m in maps])
    union.cells[(stacked == FREE).any(axis=0)] = FREE
    union.cells[(stacked == OCCUPIED).any(axis=0)] = OCCUPIED
    return union


def observable_mask(truth: GroundTruthGrid, starts: Iterable[Tuple[int, int]]) -> np.ndarray:
    """
    Cells a team starting at the given cells can ever observe

    Free cells 4-connected to a start plus the occupied cells sharing an edge
    with them. Rays cannot pass a corner where two occupied cells touch, so
    anything reachable only through such a corner stays hidden.
    """
    free = ~truth.cells
    labels, _ = ndimage.label(free, structure=FOUR_CONNECTED)
    keep = {int(labels[y, x]) for x, y in starts if free[y, x]}
    reach = np.isin(labels, list(keep)) & (labels > 0)
    border = ndimage.binary_dilation(reach, structure=FOUR_CONNECTED) & truth.cells
    return reach | border


def exploration_pct(union: LocalMap, truth: GroundTruthGrid, observable: np.ndarray) -> float:
    """Correctly known observable cells as a percentage"""
    total = int(observable.sum())
    if total == 0:
        return 0.0
    correct = (union.cells != UNKNOWN) & (union.cells == truth_states(truth)) & observable
    return 100.0 * float(correct.sum()) / total


def overlap_pct(observation_counts: np.ndarray) -> float:
    """Cells observed by two or more robots over cells observed at all"""
    seen = int((observation_counts >= 1).sum())
    if seen == 0:
        return 0.0
    return 100.0 * float((observation_counts >= 2).sum()) / seen


# ════════════════════════════════════════════════════════════════════════════
# MERGE FREQUENCY
# ════════════════════════════════════════════════════════════════════════════

def merge_frequency_report(report: MetricsReport, strict: bool = False) -> MergeFrequency:
    """
    Merge count f against iterations

    Lite sharing is expected to merge on fewer than all ticks and the
    full-share baseline on every tick. Deviations are logged, or raised as
    AssertionError when strict.

    Args:
        report: Completed trial report
        strict: Raise instead of logging

    Returns:
        MergeFrequency(merges, iterations, ratio)
    """
    result = MergeFrequency(report.merges, report.iterations, report.merge_ratio)
    problem: Optional[str] = None
    if report.policy == "cqlite" and report.iterations and result.ratio >= 1.0:
        problem = f"cqlite merged on every tick ({result.merges}/{result.iterations})"
    elif report.policy == "full_share" and report.robots > 1 and result.ratio != 1.0:
        problem = f"full_share merged on {result.merges} of {result.iterations} ticks"

    if problem:
        if strict:
            raise AssertionError(problem)
        logger.warning(problem)
    return result
