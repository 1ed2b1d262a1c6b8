"""
Report builders shared by the command line and the MCP server.
Each takes program source text and returns a JSON-ready dictionary carrying
an `exit_code`.
"""

import logging
from typing import Any, Dict, Optional

from lang.parser import parse
from lang.resolver import ResolvedProgram, resolve
from tools.contracts import lint
from tools.explorer import explore
from tools.interpreter import ERROR_KINDS, run
from tools.verifier import verify_program
from utils.error_handling import ContractError, CopylessError, handle_error, log_errors
from utils.settings import Settings

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILED = 1
EXIT_RUNTIME_ERROR = 2
EXIT_USAGE = 3


def load_program(source: str, strict: bool = True) -> ResolvedProgram:
    """Parse and resolve program text."""
    return resolve(parse(source), strict=strict)


def error_report(command: str, error: Exception, file: Optional[str] = None) -> Dict[str, Any]:
    """Report for a program that could not be read, parsed or resolved."""
    exit_code = EXIT_FAILED if isinstance(error, ContractError) else EXIT_USAGE
    return {
        "command": command,
        "file": file,
        "passed": False,
        "error": handle_error(error),
        "exit_code": exit_code,
    }


@log_errors("check")
def check_report(
    source: str, settings: Optional[Settings] = None, file: Optional[str] = None
) -> Dict[str, Any]:
    """
    Verify a program.

    Args:
        source: Program text
        settings: Budgets and lint options
        file: Name of the file the text came from, echoed in the report

    Returns:
        Report with contract lints, footprint checks and one verdict per function
    """
    settings = settings or Settings.from_env()
    try:
        resolved = load_program(source, settings.strict_contracts)
    except CopylessError as e:
        return error_report("check", e, file)

    report = verify_program(resolved, settings).model_dump()
    report.update(
        command="check", file=file, exit_code=EXIT_PASS if report["passed"] else EXIT_FAILED
    )
    return report


@log_errors("run")
def run_report(
    source: str,
    seed: int = 0,
    settings: Optional[Settings] = None,
    file: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Execute one seeded schedule of a program.

    Returns:
        Report with the outcome, its trace and the number of steps taken
    """
    settings = settings or Settings.from_env()
    try:
        resolved = load_program(source, settings.strict_contracts)
    except CopylessError as e:
        return error_report("run", e, file)

    result = run(resolved, seed, settings.max_steps, settings.reception)
    outcome = result.outcome
    return {
        "command": "run",
        "file": file,
        "seed": seed,
        "reception": settings.reception,
        "steps": result.steps,
        "outcome": outcome.to_dict(),
        "passed": not outcome.is_error,
        "exit_code": EXIT_RUNTIME_ERROR if outcome.is_error else EXIT_PASS,
    }


@log_errors("explore")
def explore_report(
    source: str, settings: Optional[Settings] = None, file: Optional[str] = None
) -> Dict[str, Any]:
    """
    Explore every interleaving of a program within the configured bounds.

    Returns:
        Report with the set of outcome kinds and one witness trace per kind
    """
    settings = settings or Settings.from_env()
    try:
        resolved = load_program(source, settings.strict_contracts)
    except CopylessError as e:
        return error_report("explore", e, file)

    exploration = explore(
        resolved,
        settings.max_depth,
        settings.loop_bound,
        settings.state_budget,
        settings.reception,
    )
    errors = sorted(exploration.kinds & ERROR_KINDS)
    report = exploration.to_dict()
    report.update(
        command="explore",
        file=file,
        reception=settings.reception,
        errors=errors,
        passed=not errors,
        exit_code=EXIT_RUNTIME_ERROR if errors else EXIT_PASS,
    )
    return report


@log_errors("lint")
def lint_report(
    source: str, settings: Optional[Settings] = None, file: Optional[str] = None
) -> Dict[str, Any]:
    """
    Check every contract of a program for determinism, mixed choice and final cycles.

    Returns:
        Report with one lint result per declared contract
    """
    settings = settings or Settings.from_env()
    try:
        resolved = load_program(source, settings.strict_contracts)
    except CopylessError as e:
        return error_report("lint", e, file)

    contracts = [lint(c, resolved.lint_config) for c in resolved.contracts.declared()]
    passed = all(c["passed"] for c in contracts)
    return {
        "command": "lint",
        "file": file,
        "contracts": contracts,
        "passed": passed,
        "exit_code": EXIT_PASS if passed else EXIT_FAILED,
    }
