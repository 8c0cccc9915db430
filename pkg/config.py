"""
CQLite Explorer Configuration
Learner parameters, simulator defaults and output settings in one place
"""

import math
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# ════════════════════════════════════════════════════════════════════════════
# 🤖 LEARNER PARAMETERS (Q-update and reward)
# ════════════════════════════════════════════════════════════════════════════

ALPHA = 0.6                          # Learning rate, (0, 1]
GAMMA = 0.95                         # Discount factor, [0, 1)
LAMBDA_STEP = 2.0                    # Step cost per meter of path
RHO = 1.0                            # Overlap-avoidance scaling
SIGMA = 0.1                          # Communication-range scaling
EPSILON = 0.0                        # Optional exploration noise (0 = pure argmax)
LAMBDA_DISTANCE_AWARE = True         # Scale lambda by chosen path length in meters
Q_MERGE_RULE = "overwrite"           # "overwrite" (last writer wins) or "max"

# ════════════════════════════════════════════════════════════════════════════
# 📡 SENSOR + WORLD
# ════════════════════════════════════════════════════════════════════════════

RESOLUTION = 0.1                     # Meters per cell
SENSOR_RANGE = 15.0                  # r_s in meters
RAY_COUNT = 720                      # Rays per omnidirectional scan
R_IS = 1.0                           # Overlap radius r_{i,s} in meters
PGM_OCCUPIED_THRESHOLD = 127         # PGM pixel <= threshold -> occupied

# ════════════════════════════════════════════════════════════════════════════
# 🚗 MOTION CONTROLLER
# ════════════════════════════════════════════════════════════════════════════

KP = 2.0                             # Proportional gain
KI = 0.5                             # Integral gain
V_MAX = 0.5                          # Max linear speed, m/s
W_MAX = math.pi / 4                  # Max angular speed, rad/s

# ════════════════════════════════════════════════════════════════════════════
# 🗺️  FRONTIERS
# ════════════════════════════════════════════════════════════════════════════

MIN_CLUSTER = 3                      # Smallest frontier cluster kept (cells)
PRIORITY_BASE = 1.0                  # Base priority before distance decay

# ════════════════════════════════════════════════════════════════════════════
# 📶 COMMUNICATION + WIRE SCHEMA (bytes)
# ════════════════════════════════════════════════════════════════════════════

COMM_RANGE = 40.0                    # r_c in meters, standard 40-60 m radios
DROP_PROBABILITY = 0.0               # Per-delivery drop chance
COST_PER_BYTE = 1.0                  # kappa
PATCH_MODE = "full"                  # "full" known-set replies or "delta"
MAX_ROBOTS = 255                     # sender id is one byte on the wire

# ════════════════════════════════════════════════════════════════════════════
# ⏱️  SIMULATION
# ════════════════════════════════════════════════════════════════════════════

T_MAX = 2000                         # Iteration cap
DEFAULT_POLICY = "cqlite"
POLICIES = ["cqlite", "greedy_frontier", "full_share"]
SHUFFLE_ORDER = False                # Seeded per-tick robot order (robustness runs)
CONFIDENCE_E = 0.05                  # Confidence used for the convergence bound
SSIM_WINDOW = 7

# ════════════════════════════════════════════════════════════════════════════
# 🔄 TRIALS + PARALLELIZATION
# ════════════════════════════════════════════════════════════════════════════

DEFAULT_TRIALS = 1
ENABLE_PARALLEL = True               # Thread-based parallel trials
MAX_WORKERS = 4
MAX_MAP_ATTEMPTS = 100               # Map generator regeneration cap

# ════════════════════════════════════════════════════════════════════════════
# 📁 PATHS + LOGGING
# ════════════════════════════════════════════════════════════════════════════

OUTPUT_DIR = os.getenv("CQLITE_OUTPUT_DIR", "output")
LOG_LEVEL = os.getenv("CQLITE_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("CQLITE_LOG_FILE", "")

# Per-tick CSV header (schema-stable)
TICK_CSV_FIELDS = [
    "tick",
    "sim_time_s",
    "exploration_pct",
    "overlap_pct",
    "bytes_cum",
    "merges_cum",
    "max_delta_q",
]


def setup_folders(output_dir: str = None) -> Path:
    """Create the output folder and return it."""
    out = Path(output_dir or OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    if LOG_FILE:
        Path(LOG_FILE).parent.mkdir(parents=True, exist_ok=True)
    return out
