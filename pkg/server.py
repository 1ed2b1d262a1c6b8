"""
Copyless Verifier MCP Server
Static verification and bounded execution of copyless message-passing programs.
"""

import logging
from typing import Any, Dict

from fastmcp import FastMCP

from tools.reports import check_report, explore_report, lint_report, run_report
from utils.error_handling import handle_error
from utils.logging_config import correlation, setup_logging
from utils.settings import Settings

settings = Settings.from_env()
setup_logging(level=settings.log_level)

logger = logging.getLogger(__name__)

mcp = FastMCP("Copyless Verifier")


@mcp.tool()
def check_program(source: str) -> Dict[str, Any]:
    """
    Verify every function of an annotated program against its pre/post conditions.

    Checks contracts (determinism, mixed choice, final cycles), message footprints
    (precision) and then runs the ownership-aware symbolic execution on each function.

    Args:
        source: Program text

    Returns:
        Dictionary with contract lints, footprint checks and one verdict per function

    Example:
        ```python
        result = check_program(open("corpus/example_1_1.cmp").read())
        print(result["passed"], [f["status"] for f in result["functions"]])
        ```
    """
    with correlation():
        logger.info("Starting verification")
        try:
            result = check_report(source, settings)
            logger.info(f"Verification completed: passed={result['passed']}")
            return result
        except Exception as e:
            logger.error(f"Verification failed: {e}")
            return {"error": handle_error(e)}


@mcp.tool()
def run_program(
    source: str, seed: int = 0, max_steps: int = 10_000, reception: str = "fifo"
) -> Dict[str, Any]:
    """
    Execute one schedule of a program, chosen by a seeded random scheduler.

    Args:
        source: Program text
        seed: Scheduler seed; the same seed always gives the same trace
        max_steps: Steps before the run is reported as inconclusive
        reception: "fifo", or "lookahead" to let a reception take a matching message
            from deeper in the queue

    Returns:
        Dictionary with the outcome, its trace and the number of steps taken
    """
    with correlation():
        logger.info(f"Running program with seed {seed}")
        try:
            run_settings = Settings.model_validate(
                {**settings.model_dump(), "max_steps": max_steps, "reception": reception}
            )
            result = run_report(source, seed, run_settings)
            logger.info(f"Run finished: {result.get('outcome', {}).get('kind')}")
            return result
        except Exception as e:
            logger.error(f"Run failed: {e}")
            return {"error": handle_error(e)}


@mcp.tool()
def explore_program(
    source: str, max_depth: int = 10_000, loop_bound: int = 2, reception: str = "fifo"
) -> Dict[str, Any]:
    """
    Explore every interleaving of a program within bounds.

    Args:
        source: Program text
        max_depth: Longest schedule explored
        loop_bound: Loop iterations before a path is truncated
        reception: "fifo" or "lookahead"

    Returns:
        Dictionary with every outcome kind reached and one witness trace per kind
    """
    with correlation():
        logger.info(f"Exploring program (depth {max_depth}, loops {loop_bound})")
        try:
            explore_settings = Settings.model_validate(
                {
                    **settings.model_dump(),
                    "max_depth": max_depth,
                    "loop_bound": loop_bound,
                    "reception": reception,
                }
            )
            result = explore_report(source, explore_settings)
            logger.info(f"Exploration finished: {result.get('outcomes')}")
            return result
        except Exception as e:
            logger.error(f"Exploration failed: {e}")
            return {"error": handle_error(e)}


@mcp.tool()
def lint_contracts(source: str) -> Dict[str, Any]:
    """
    Check only the contracts declared in a program.

    Args:
        source: Program text (functions may be omitted)

    Returns:
        Dictionary with determinism, mixed-choice and final-cycle results per contract
    """
    with correlation():
        logger.info("Linting contracts")
        try:
            return lint_report(source, settings)
        except Exception as e:
            logger.error(f"Contract lint failed: {e}")
            return {"error": handle_error(e)}


if __name__ == "__main__":
    logger.info("Starting Copyless Verifier MCP Server")
    logger.info(f"Log level: {settings.log_level}")
    mcp.run()
