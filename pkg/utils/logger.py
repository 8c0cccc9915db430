"""
Logger - Logging setup and trial execution statistics
"""

import logging
import time
from typing import Dict, List, NamedTuple, Optional, Tuple

import config

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def setup_logging(name: str) -> logging.Logger:
    """
    Configure a named logger with console (and optional file) output

    Args:
        name: Logger name, usually the module's role

    Returns:
        The configured logger (handlers attached only once)
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(getattr(logging, config.LOG_LEVEL.upper(), logging.INFO))
    logger.propagate = False

    ch = logging.StreamHandler()
    ch.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(ch)

    if config.LOG_FILE:
        fh = logging.FileHandler(config.LOG_FILE, encoding="utf-8")
        fh.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(fh)

    return logger


def set_console_level(level: int):
    """Lower or raise console verbosity for every logger created so far"""
    for logger in logging.Logger.manager.loggerDict.values():
        if isinstance(logger, logging.Logger):
            for handler in logger.handlers:
                if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                    handler.setLevel(level)


class TrialEvent(NamedTuple):
    name: str
    at_s: float
    details: str = ""


class TrialLogger:
    """
    Timeline of one trial batch, printed under the summary banner

    Event times are seconds since start(). The summary banner lists each
    event with the time spent since the previous one.
    """

    def __init__(self, quiet: bool = False, name: str = "cqlite.trials"):
        self._t0: Optional[float] = None
        self.events: List[TrialEvent] = []
        self.quiet = quiet
        self.log = setup_logging(name)

    def start(self):
        self._t0 = time.perf_counter()
        self.events = [TrialEvent('START', 0.0)]

    def log_event(self, event_name: str, details: str = ""):
        """Record an event; events before start() are kept at t=0"""
        event = TrialEvent(event_name, self.get_elapsed(), details)
        self.events.append(event)
        self.log.debug(f"{event.name} at {event.at_s:.3f}s {details}".rstrip())

    def get_elapsed(self) -> float:
        return time.perf_counter() - self._t0 if self._t0 is not None else 0.0

    def durations(self) -> List[Tuple[TrialEvent, float]]:
        """Each event after START with the seconds since the one before it"""
        return [(cur, cur.at_s - prev.at_s) for prev, cur in zip(self.events, self.events[1:])]

    def print_summary(self, stats: Dict):
        if self.quiet:
            return
        elapsed = self.get_elapsed()
        total = stats.get('total_trials', 0)

        print(f"\n{'='*70}")
        print(f"📊 EXECUTION SUMMARY")
        print(f"{'='*70}")
        for event, spent in self.durations():
            label = f"{event.name} {event.details}".strip()
            print(f"  +{event.at_s:8.2f}s ({spent:6.2f}s)  {label}")
        print(f"Total Time: {elapsed:.2f}s")
        print(f"Trials Run: {total}")
        print(f"Completed: {stats.get('completed', 0)}")
        print(f"Failed: {stats.get('failed', 0)}")
        print(f"Avg Time per Trial: {elapsed / max(total, 1):.2f}s")
        print(f"{'='*70}\n")
