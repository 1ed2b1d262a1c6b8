"""
Tests for the key=value log format and correlation scopes.
"""

import logging

from utils.logging_config import CorrelationIdFilter, StructuredFormatter, correlation


def record(message: str) -> logging.LogRecord:
    return logging.LogRecord("tools.interpreter", logging.INFO, __file__, 1, message, None, None)


def formatted(message: str) -> str:
    entry = record(message)
    CorrelationIdFilter().filter(entry)
    return StructuredFormatter().format(entry)


def test_lines_carry_the_scope_id():
    with correlation("abc123") as correlation_id:
        line = formatted("Run finished")

    assert correlation_id == "abc123"
    assert "correlation_id=abc123" in line
    assert "logger=tools.interpreter" in line
    assert "level=INFO" in line


def test_scope_is_restored_on_exit():
    with correlation("outer"):
        with correlation("inner"):
            assert "correlation_id=inner" in formatted("x")
        assert "correlation_id=outer" in formatted("x")

    assert "correlation_id=-" in formatted("x")


def test_generated_ids_differ():
    with correlation() as first:
        pass
    with correlation() as second:
        pass

    assert first != second


def test_messages_with_blanks_are_quoted():
    line = formatted('every thread is "blocked"\nnow')

    assert line.endswith('message="every thread is \\"blocked\\"\\nnow"')
