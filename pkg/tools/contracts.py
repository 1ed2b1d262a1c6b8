"""
Channel contracts.
Finite-state automata over !m / ?m transitions, their duals, and the
well-formedness checks (determinism, no mixed choice, final-state cycles) that
rule out unspecified receptions and orphan messages.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
from pydantic import BaseModel

from lang import ast
from utils.error_handling import ContractError, SourceLocation

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    SEND = "!"
    RECV = "?"

    @property
    def flipped(self) -> "Direction":
        return Direction.RECV if self is Direction.SEND else Direction.SEND


@dataclass(frozen=True)
class Transition:
    source: str
    direction: Direction
    tag: str
    target: str

    def __str__(self) -> str:
        return f"{self.source} -{self.direction.value}{self.tag}-> {self.target}"


@dataclass(frozen=True)
class Contract:
    """
    A deterministic contract automaton.

    `delta` is derived from `transitions` and excluded from comparisons, so two
    contracts are equal when their names, states, initial/final states and
    transition lists agree.
    """

    name: str
    states: Tuple[str, ...]
    init: str
    finals: FrozenSet[str]
    transitions: Tuple[Transition, ...]
    delta: Dict[Tuple[str, Direction, str], str] = field(
        default_factory=dict, compare=False, repr=False, hash=False
    )

    @classmethod
    def build(
        cls,
        name: str,
        states: Iterable[str],
        init: str,
        finals: Iterable[str],
        transitions: Iterable[Tuple[str, str, str, str]],
        location: Optional[SourceLocation] = None,
    ) -> "Contract":
        """
        Build a contract, rejecting nondeterminism and undeclared states.

        Args:
            name: Contract name
            states: State ids in declaration order
            init: Initial state
            finals: Final states
            transitions: (source, "!" or "?", tag, target) tuples
            location: Declaration site, attached to construction errors

        Returns:
            The contract

        Raises:
            ContractError: On duplicate (state, direction, tag) keys or unknown states
        """
        state_tuple = tuple(states)
        known = set(state_tuple)
        if len(known) != len(state_tuple):
            raise ContractError(f"contract {name} lists a state twice", location)
        if init not in known:
            raise ContractError(f"contract {name}: initial state {init} is not declared", location)
        final_set = frozenset(finals)
        unknown = sorted(final_set - known)
        if unknown:
            raise ContractError(f"contract {name}: final state {unknown[0]} is not declared", location)

        delta: Dict[Tuple[str, Direction, str], str] = {}
        built: List[Transition] = []
        for source, direction, tag, target in transitions:
            for state in (source, target):
                if state not in known:
                    raise ContractError(f"contract {name}: state {state} is not declared", location)
            key = (source, Direction(direction), tag)
            if key in delta:
                raise ContractError(
                    f"contract {name} is nondeterministic: {source} -{direction}{tag}-> "
                    f"has successors {delta[key]} and {target}",
                    location,
                )
            delta[key] = target
            built.append(Transition(source, Direction(direction), tag, target))

        return cls(name, state_tuple, init, final_set, tuple(built), delta)

    @classmethod
    def from_decl(cls, decl: ast.ContractDecl) -> "Contract":
        return cls.build(
            decl.name,
            decl.states,
            decl.initial,
            decl.finals,
            [(t.source, t.direction, t.tag, t.target) for t in decl.transitions],
            decl.loc,
        )

    def __post_init__(self) -> None:
        if not self.delta and self.transitions:
            object.__setattr__(
                self,
                "delta",
                {(t.source, t.direction, t.tag): t.target for t in self.transitions},
            )

    def outgoing(self, state: str) -> List[Transition]:
        return [t for t in self.transitions if t.source == state]


def _require_state(contract: Contract, state: str) -> None:
    if state not in contract.states:
        raise ContractError(f"contract {contract.name} has no state {state}")


def dual_name(name: str) -> str:
    return name[1:] if name.startswith("~") else f"~{name}"


def dual(contract: Contract) -> Contract:
    """Swap sends and receives; states, initial and final states are unchanged."""
    flipped = tuple(
        Transition(t.source, t.direction.flipped, t.tag, t.target) for t in contract.transitions
    )
    return Contract(
        dual_name(contract.name), contract.states, contract.init, contract.finals, flipped
    )


def successor(contract: Contract, state: str, direction: Direction, tag: str) -> Optional[str]:
    """
    The `direction tag` successor of `state`, or None when the contract forbids it.

    Raises:
        ContractError: If `state` is not a state of the contract
    """
    _require_state(contract, state)
    return contract.delta.get((state, Direction(direction), tag))


def choices(contract: Contract, state: str) -> FrozenSet[str]:
    """Tags that may be received in `state`."""
    _require_state(contract, state)
    return frozenset(
        tag for (source, direction, tag) in contract.delta if source == state and direction is Direction.RECV
    )


def is_sending_state(contract: Contract, state: str) -> bool:
    """True when `state` has outgoing transitions and all of them are sends."""
    outgoing = contract.outgoing(state)
    return bool(outgoing) and all(t.direction is Direction.SEND for t in outgoing)


def check_no_mixed_choice(contract: Contract) -> List[str]:
    """States with both a send and a receive outgoing transition."""
    mixed = []
    for state in contract.states:
        directions = {t.direction for t in contract.outgoing(state)}
        if len(directions) == 2:
            mixed.append(state)
    return mixed


def _one_way_cycles(contract: Contract, direction: Direction) -> FrozenSet[str]:
    graph = nx.DiGraph()
    graph.add_nodes_from(contract.states)
    graph.add_edges_from(
        (t.source, t.target) for t in contract.transitions if t.direction is direction
    )
    on_cycle = set()
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1:
            on_cycle |= component
    on_cycle |= {state for state in contract.states if graph.has_edge(state, state)}
    return frozenset(on_cycle)


def check_cycle_condition(contract: Contract) -> List[Dict[str, str]]:
    """
    Final states lying on a cycle made only of sends or only of receives.

    Returns:
        One {"state", "direction"} entry per offending final state and direction
    """
    offending = []
    for direction in Direction:
        cyclic = _one_way_cycles(contract, direction)
        for state in contract.states:
            if state in contract.finals and state in cyclic:
                offending.append({"state": state, "direction": direction.value})
    return offending


class LintConfig(BaseModel):
    """Severity per contract check: "error" fails the lint, "warn" only reports."""

    mixed_choice: str = "error"
    final_cycle: str = "error"

    @classmethod
    def for_program(
        cls, settings: Iterable[ast.LintSetting], strict: bool = True
    ) -> "LintConfig":
        """
        Build the configuration for one file.

        Args:
            settings: `lint check = severity;` declarations of the file
            strict: When False, every check defaults to "warn"

        Returns:
            LintConfig with file declarations applied last
        """
        base = {} if strict else {"mixed_choice": "warn", "final_cycle": "warn"}
        config = cls(**base)
        for setting in settings:
            if setting.check not in cls.model_fields:
                raise ContractError(f"unknown lint check '{setting.check}'")
            if setting.severity not in ("error", "warn"):
                raise ContractError(f"unknown lint severity '{setting.severity}'")
            config = config.model_copy(update={setting.check: setting.severity})
        return config


def lint(contract: Contract, config: Optional[LintConfig] = None) -> Dict[str, Any]:
    """
    Run every well-formedness check on a contract.

    Determinism always passes here: nondeterministic contracts cannot be built.

    Args:
        contract: The contract to check
        config: Severities (defaults to all errors)

    Returns:
        Dictionary with per-check findings and an overall `passed` flag
    """
    config = config or LintConfig()
    findings: List[Dict[str, Any]] = []

    for state in check_no_mixed_choice(contract):
        findings.append(
            {
                "check": "mixed_choice",
                "severity": config.mixed_choice,
                "state": state,
                "message": f"state {state} mixes sends and receives",
            }
        )
    for entry in check_cycle_condition(contract):
        findings.append(
            {
                "check": "final_cycle",
                "severity": config.final_cycle,
                "state": entry["state"],
                "message": (
                    f"final state {entry['state']} lies on a "
                    f"{'send' if entry['direction'] == '!' else 'receive'}-only cycle"
                ),
            }
        )

    for finding in findings:
        log = logger.warning if finding["severity"] == "warn" else logger.info
        log(f"Contract {contract.name}: {finding['message']} ({finding['severity']})")

    return {
        "contract": contract.name,
        "checks": {
            "determinism": "pass",
            "mixed_choice": _status(findings, "mixed_choice"),
            "final_cycle": _status(findings, "final_cycle"),
        },
        "findings": findings,
        "passed": not any(f["severity"] == "error" for f in findings),
    }


def _status(findings: List[Dict[str, Any]], check: str) -> str:
    severities = {f["severity"] for f in findings if f["check"] == check}
    if "error" in severities:
        return "fail"
    if "warn" in severities:
        return "warn"
    return "pass"


class ContractTable:
    """Declared contracts with their duals, looked up by (possibly dual) reference."""

    def __init__(self, contracts: Iterable[Contract]):
        self._by_name: Dict[str, Contract] = {}
        for contract in contracts:
            self._by_name[contract.name] = contract
            self._by_name[dual_name(contract.name)] = dual(contract)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> Contract:
        try:
            return self._by_name[name]
        except KeyError:
            raise ContractError(f"unknown contract {name}") from None

    def ref(self, ref: ast.ContractRef) -> Contract:
        return self.get(str(ref))

    def declared(self) -> List[Contract]:
        return [c for name, c in self._by_name.items() if not name.startswith("~")]
