import logging

import pytest

from utils import GridValidator, ScenarioValidator, TrialLogger, set_console_level, setup_logging


@pytest.mark.parametrize("key, value, ok", [
    ("alpha", 1.0, True),
    ("alpha", 0.0, False),
    ("gamma", 0.0, True),
    ("gamma", 1.0, False),
    ("drop_prob", 0.99, True),
    ("ray_count", 4, False),
    ("robots", 256, False),
    ("policy", "anything", True),
])
def test_scenario_value_ranges(key, value, ok):
    assert ScenarioValidator.validate_value(key, value)[0] is ok


def test_range_message_names_key_and_interval():
    ok, message = ScenarioValidator.validate_value("gamma", 1.0)
    assert not ok
    assert message == "'gamma' = 1.0 outside [0.0, 1.0)"
    assert ScenarioValidator.validate({"alpha": 0.5, "gamma": 1.0}) == (False, message)


def test_grid_validator():
    assert GridValidator.validate(3, 3, 0.4) == (True, "Valid")
    assert not GridValidator.validate(2, 10, 0.1)[0]
    assert not GridValidator.validate(10, 10, 0.41)[0]


def test_logger_handlers_attached_once():
    first = setup_logging("cqlite.test")
    again = setup_logging("cqlite.test")
    assert first is again
    assert len(first.handlers) >= 1
    count = len(first.handlers)
    setup_logging("cqlite.test")
    assert len(first.handlers) == count


def test_console_level_applies_to_stream_handlers():
    log = setup_logging("cqlite.quiet")
    set_console_level(logging.WARNING)
    assert all(h.level == logging.WARNING for h in log.handlers if not isinstance(h, logging.FileHandler))
    set_console_level(logging.NOTSET)


def test_trial_logger_summary_lists_events(capsys):
    tracker = TrialLogger()
    tracker.start()
    tracker.log_event("WORLD_LOADED", "20x20")
    tracker.log_event("POLICY_DONE", "cqlite")
    tracker.print_summary({"total_trials": 2, "completed": 2, "failed": 0})
    printed = capsys.readouterr().out

    assert "Trials Run: 2" in printed
    assert "WORLD_LOADED 20x20" in printed
    assert "POLICY_DONE cqlite" in printed
    assert [e.name for e in tracker.events] == ["START", "WORLD_LOADED", "POLICY_DONE"]
    times = [e.at_s for e in tracker.events]
    assert times == sorted(times)
    spent = [d for _, d in tracker.durations()]
    assert len(spent) == 2 and all(d >= 0 for d in spent)
    assert sum(spent) == pytest.approx(times[-1])

    TrialLogger(quiet=True).print_summary({"total_trials": 1})
    assert capsys.readouterr().out == ""


def test_events_before_start_sit_at_zero():
    tracker = TrialLogger(quiet=True)
    tracker.log_event("EARLY")
    assert tracker.events == [("EARLY", 0.0, "")]
    assert tracker.get_elapsed() == 0.0
