"""
Error handling utilities for the copyless verifier.
Defines the exception hierarchy shared by the parser, the logic layer and the
drivers, and converts exceptions to user-facing dictionaries at the edge.
"""

import logging
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class SourceLocation:
    """A 1-based line/column position inside a source text."""

    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"

    def to_dict(self) -> Dict[str, int]:
        return {"line": self.line, "column": self.column}


class CopylessError(Exception):
    """Base class for every error raised by the toolchain."""

    def __init__(self, message: str, location: Optional[SourceLocation] = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self) -> str:
        if self.location is not None:
            return f"{self.location}: {self.message}"
        return self.message


class ParseError(CopylessError):
    """Raised when source text does not match the grammar."""

    def __init__(
        self,
        message: str,
        location: Optional[SourceLocation] = None,
        expected: Sequence[str] = (),
    ):
        super().__init__(message, location)
        self.expected = sorted(set(expected))


class ResolveError(CopylessError):
    """Raised when a parsed program refers to something that does not exist."""

    def __init__(self, kind: str, message: str, location: Optional[SourceLocation] = None):
        super().__init__(message, location)
        self.kind = kind


class ContractError(CopylessError):
    """Raised when a contract automaton cannot be built (e.g. nondeterminism)."""

    pass


class LogicError(CopylessError):
    """Raised by the assertion layer (unknown predicate, oversized universe, ...)."""

    pass


class BudgetExceeded(CopylessError):
    """Raised when a search exhausts its configured budget."""

    pass


def log_errors(operation: str) -> Callable:
    """
    Decorator that logs failures of an entry point before re-raising them.

    Args:
        operation: Human-readable operation name used in log lines

    Returns:
        Decorated function
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            try:
                return func(*args, **kwargs)
            except CopylessError as e:
                logger.warning(f"{operation} failed: {e}")
                raise
            except Exception as e:
                logger.error(f"Unexpected error during {operation}: {e}")
                raise

        return wrapper

    return decorator


def handle_error(error: Exception) -> Dict[str, Any]:
    """
    Convert toolchain exceptions to user-friendly error dictionaries.

    Args:
        error: Exception raised while processing a program

    Returns:
        Dictionary with error details
    """
    location = getattr(error, "location", None)
    details: Dict[str, Any] = {
        "details": str(error),
        "location": location.to_dict() if location is not None else None,
    }

    if isinstance(error, ParseError):
        return {
            "error": "Syntax Error",
            "message": error.message,
            "expected": error.expected,
            **details,
            "remediation": [
                "Check the statement near the reported line and column",
                "Every function needs a [pre] before and a [post] after its body",
                "Every while loop and parallel branch needs a bracketed assertion",
            ],
        }

    elif isinstance(error, ResolveError):
        return {
            "error": "Resolution Error",
            "kind": error.kind,
            "message": error.message,
            **details,
            "remediation": _resolve_remediation(error.kind),
        }

    elif isinstance(error, ContractError):
        return {
            "error": "Contract Error",
            "message": error.message,
            **details,
            "remediation": [
                "Each (state, direction, tag) may have at most one successor",
                "Declare every state used by initial, final and transitions",
            ],
        }

    elif isinstance(error, BudgetExceeded):
        return {
            "error": "Budget Exceeded",
            "message": error.message,
            **details,
            "remediation": [
                "Raise the corresponding budget setting",
                "Reduce the loop bound or the number of spawned threads",
            ],
        }

    elif isinstance(error, CopylessError):
        return {
            "error": type(error).__name__,
            "message": error.message,
            **details,
            "remediation": ["Check the annotation named in the message"],
        }

    elif isinstance(error, (FileNotFoundError, IsADirectoryError, PermissionError)):
        return {
            "error": "File Error",
            "message": f"Cannot read input: {error}",
            **details,
            "remediation": ["Check the path passed on the command line"],
        }

    else:
        return {
            "error": "Unexpected Error",
            "message": "An unexpected error occurred",
            **details,
            "remediation": [
                "Check application logs for details",
                "Re-run with LOG_LEVEL=DEBUG",
            ],
        }


def _resolve_remediation(kind: str) -> List[str]:
    hints = {
        "unknown-tag": ["Declare the tag with a `message` line"],
        "arity-mismatch": ["Match the number of values to the message declaration"],
        "unknown-contract": ["Declare the contract with a `contract` block"],
        "unknown-state": ["Use a state that the contract declares"],
        "recursive-predicate": ["Predicate macros may not refer to themselves"],
        "unbound-variable": ["Declare the variable as a parameter, local or global"],
        "missing-annotation": ["Add the bracketed assertion"],
        "unknown-predicate": ["Declare the predicate with a `predicate` line"],
        "unknown-function": ["Declare the function or bind its result to a variable"],
        "assigned-parameter": ["Copy the parameter into a local before changing it"],
        "return-in-parallel": ["Move the return after the parallel block"],
        "duplicate-name": ["Rename one of the clashing declarations or binders"],
    }
    return hints.get(kind, ["Fix the reported declaration"])
