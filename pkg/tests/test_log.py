import logging

from src.utils.log import log_metrics, set_global_level, setup_logger, timed


def test_setup_logger_is_idempotent():
    a = setup_logger("TEST_LOG_A", "debug")
    b = setup_logger("TEST_LOG_A")
    assert a is b
    assert len(a.handlers) == 1
    assert a.level == logging.DEBUG
    assert a.propagate is False


def test_set_global_level_reaches_registered_loggers():
    a = setup_logger("TEST_LOG_B", "info")
    set_global_level("warning")
    assert a.level == logging.WARNING
    set_global_level(logging.INFO)
    assert a.level == logging.INFO


def test_timed_records_seconds():
    log = setup_logger("TEST_LOG_C", "warning")
    with timed(log, "bloque") as sw:
        sum(range(1000))
    assert sw.seconds >= 0.0


def test_log_metrics_skipped_when_level_disabled(caplog):
    log = setup_logger("TEST_LOG_D", "info")
    log.propagate = True
    try:
        with caplog.at_level(logging.INFO, logger="TEST_LOG_D"):
            log_metrics(log, "Λ", {"x": 1.0})
            assert not caplog.records
            log_metrics(log, "Λ", {"x": 1.0}, level=logging.INFO)
        assert "x=" in caplog.records[-1].getMessage()
    finally:
        log.propagate = False
