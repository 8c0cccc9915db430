"""
Exploration Engine - Multi-robot frontier exploration with lite Q-value sharing
"""

from .world import GroundTruthGrid, Pose, SensorParams, load_map, load_map_file, raycast_scan
from .local_map import LocalMap, MapPatch, coverage_fraction, integrate_scan, map_ssim, merge_maps
from .frontier import ExploredSet, FrontierState, cluster_frontiers, detect_frontiers, overlap_probability
from .planner import ControllerParams, Path, astar_path, estimate_traversal_time, pairwise_travel_times, travel_time
from .learner import LearnerParams, QTable, apply_remote_q, compute_reward, convergence_bound, q_table_mse, q_update, select_action
from .partition import Partition, assign_priorities, partition_cost, voronoi_partition
from .network import MessageBus, NeighborGraph, PayloadLedger, broadcast, full_table_payload, neighbor_graph, payload_bytes
from .metrics import MetricsReport, merge_frequency_report
from .simulator import SimConfig, SimState, run, step
from .scenario import ConfigError, ScenarioFile, emit_config, parse_config
from .map_generator import generate_map
from .trial_runner import TrialSummary, run_trials


__all__ = [
    'GroundTruthGrid',
    'Pose',
    'SensorParams',
    'load_map',
    'load_map_file',
    'raycast_scan',
    'LocalMap',
    'MapPatch',
    'coverage_fraction',
    'integrate_scan',
    'map_ssim',
    'merge_maps',
    'ExploredSet',
    'FrontierState',
    'cluster_frontiers',
    'detect_frontiers',
    'overlap_probability',
    'ControllerParams',
    'Path',
    'astar_path',
    'estimate_traversal_time',
    'pairwise_travel_times',
    'travel_time',
    'LearnerParams',
    'QTable',
    'apply_remote_q',
    'compute_reward',
    'convergence_bound',
    'q_table_mse',
    'q_update',
    'select_action',
    'Partition',
    'assign_priorities',
    'partition_cost',
    'voronoi_partition',
    'MessageBus',
    'NeighborGraph',
    'PayloadLedger',
    'broadcast',
    'full_table_payload',
    'neighbor_graph',
    'payload_bytes',
    'MetricsReport',
    'merge_frequency_report',
    'SimConfig',
    'SimState',
    'run',
    'step',
    'ConfigError',
    'ScenarioFile',
    'emit_config',
    'parse_config',
    'generate_map',
    'TrialSummary',
    'run_trials',
]
