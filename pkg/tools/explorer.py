"""
Bounded exhaustive exploration of interleavings.
Depth-first search over interpreter configurations with a visited set,
collecting one witness trace per outcome kind.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

from lang.resolver import ResolvedProgram
from tools.interpreter import (
    DEADLOCK,
    FIFO,
    FINISHED_CLEAN,
    TRUNCATED,
    Outcome,
    RuntimeConfig,
    find_race,
    finished,
    initial_config,
    is_enabled,
    step,
)

logger = logging.getLogger(__name__)

SAFE_KINDS = frozenset({FINISHED_CLEAN, DEADLOCK, TRUNCATED})

# A trace is kept as a linked list of (label, parent) pairs
_TraceNode = Optional[Tuple[str, Any]]


def _materialize(node: _TraceNode) -> List[str]:
    labels: List[str] = []
    while node is not None:
        labels.append(node[0])
        node = node[1]
    return labels[::-1]


@dataclass
class Exploration:
    outcomes: Dict[str, Outcome] = field(default_factory=dict)
    states: int = 0
    partial: bool = False

    @property
    def kinds(self) -> Set[str]:
        return set(self.outcomes)

    def record(self, outcome: Outcome, trace: _TraceNode) -> None:
        if outcome.kind not in self.outcomes:
            outcome.trace = _materialize(trace)
            self.outcomes[outcome.kind] = outcome
            logger.debug(f"New outcome {outcome.kind}: {outcome.message}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "outcomes": sorted(self.kinds),
            "witnesses": {kind: o.to_dict() for kind, o in sorted(self.outcomes.items())},
            "states": self.states,
            "partial": self.partial,
        }


def explore(
    resolved: ResolvedProgram,
    max_depth: int = 10_000,
    loop_bound: int = 2,
    state_budget: int = 1_000_000,
    reception: str = FIFO,
) -> Exploration:
    """
    Enumerate every interleaving and nondeterministic choice within bounds.

    Args:
        resolved: The program
        max_depth: Longest schedule explored
        loop_bound: Iterations after which loops are cut off
        state_budget: Configurations visited before giving up
        reception: FIFO or LOOKAHEAD

    Returns:
        Exploration with one witness per outcome kind; `partial` is set when the
        state budget ran out
    """
    result = Exploration()
    start = initial_config(resolved)
    visited: Set[RuntimeConfig] = {start}
    stack: List[Tuple[RuntimeConfig, _TraceNode, int]] = [(start, None, 0)]

    while stack:
        config, trace, depth = stack.pop()
        result.states += 1
        if result.states > state_budget:
            result.partial = True
            logger.warning(f"State budget of {state_budget} exhausted; result is partial")
            break

        if not config.threads:
            result.record(finished(config), trace)
            continue

        results = {
            tid: step(resolved, config, tid, loop_bound, reception) for tid in config.tids()
        }
        enabled = [tid for tid, r in sorted(results.items()) if is_enabled(r)]

        race = find_race(resolved, config, enabled)
        if race:
            result.record(
                Outcome(race.kind, race.message, thread=race.tid, location=race.location), trace
            )

        for tid, r in sorted(results.items()):
            for fault in r.faults:
                result.record(
                    Outcome(fault.kind, fault.message, thread=tid, location=fault.location), trace
                )
            if r.truncated:
                result.record(Outcome(TRUNCATED, f"loop in t{tid} cut off at {loop_bound}"), trace)

        if all(r.blocked for r in results.values()):
            blocked = tuple(sorted(results))
            result.record(Outcome(DEADLOCK, "every thread is blocked", blocked=blocked), trace)
            continue

        if depth >= max_depth:
            result.record(Outcome(TRUNCATED, f"schedule cut off at depth {max_depth}"), trace)
            continue

        for tid in reversed(enabled):
            for successor, text in reversed(results[tid].successors):
                if successor not in visited:
                    visited.add(successor)
                    stack.append((successor, (text, trace), depth + 1))

    logger.info(
        f"Explored {result.states} configurations: {sorted(result.kinds)}"
        + (" (partial)" if result.partial else "")
    )
    return result


def check_soundness(
    resolved: ResolvedProgram,
    max_depth: int = 10_000,
    loop_bound: int = 2,
    state_budget: int = 1_000_000,
    reception: str = FIFO,
) -> Dict[str, Any]:
    """
    Explore a verified program and report any outcome a proof should rule out.

    A run that exhausts the state budget is inconclusive: it never passes, even
    when no violation was found in the part explored.

    Returns:
        Dictionary with `passed`, `inconclusive`, the outcome kinds seen, and a
        witness for each violation
    """
    exploration = explore(resolved, max_depth, loop_bound, state_budget, reception)
    violations = {
        kind: outcome.to_dict()
        for kind, outcome in sorted(exploration.outcomes.items())
        if kind not in SAFE_KINDS
    }
    inconclusive = exploration.partial and not violations
    passed = not violations and not exploration.partial
    if violations:
        logger.warning(f"Soundness check found {sorted(violations)}")
    elif inconclusive:
        logger.warning("Soundness check is inconclusive: state budget exhausted")
    return {
        "passed": passed,
        "inconclusive": inconclusive,
        "outcomes": sorted(exploration.kinds),
        "violations": violations,
        "partial": exploration.partial,
    }
