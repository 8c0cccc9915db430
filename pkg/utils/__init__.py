"""
Utils - Helper modules for the exploration simulator
"""

from .logger import TrialLogger, setup_logging, set_console_level
from .validators import ScenarioValidator, GridValidator

__all__ = [
    'TrialLogger',
    'setup_logging',
    'set_console_level',
    'ScenarioValidator',
    'GridValidator',
]
