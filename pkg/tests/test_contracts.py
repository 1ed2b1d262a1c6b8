"""
Tests for contract automata and their well-formedness checks.
"""

import itertools
import random

import pytest

from tools.contracts import (
    Contract,
    ContractTable,
    Direction,
    LintConfig,
    check_cycle_condition,
    check_no_mixed_choice,
    choices,
    dual,
    is_sending_state,
    lint,
    successor,
)
from utils.error_handling import ContractError

TAGS = ("a", "b", "c")


def random_contract(rng: random.Random, name: str = "R") -> Contract:
    states = [str(i) for i in range(rng.randint(1, 5))]
    transitions = {}
    for _ in range(rng.randint(0, 8)):
        source = rng.choice(states)
        key = (source, rng.choice("!?"), rng.choice(TAGS))
        transitions.setdefault(key, rng.choice(states))
    finals = [s for s in states if rng.random() < 0.4]
    return Contract.build(
        name,
        states,
        states[0],
        finals,
        [(src, d, tag, target) for (src, d, tag), target in transitions.items()],
    )


def on_simple_cycle(contract: Contract, state: str, direction: Direction) -> bool:
    edges = {
        (t.source, t.target)
        for source in contract.states
        for t in contract.outgoing(source)
        if t.direction is direction
    }
    others = [s for s in contract.states if s != state]
    for length in range(len(others) + 1):
        for middle in itertools.permutations(others, length):
            path = (state,) + middle + (state,)
            if all(step in edges for step in zip(path, path[1:])):
                return True
    return False


@pytest.fixture
def transfer() -> Contract:
    return Contract.build("C2", ["1", "2", "3"], "1", ["3"], [
        ("1", "!", "cell", "2"),
        ("1", "!", "nocell", "2"),
        ("2", "?", "clos", "3"),
    ])


def test_successor_and_choices(transfer):
    assert successor(transfer, "1", Direction.SEND, "cell") == "2"
    assert successor(transfer, "1", Direction.RECV, "cell") is None
    assert choices(transfer, "2") == frozenset({"clos"})
    assert choices(transfer, "1") == frozenset()
    assert is_sending_state(transfer, "1")
    assert not is_sending_state(transfer, "3")


def test_successor_rejects_unknown_state(transfer):
    with pytest.raises(ContractError):
        successor(transfer, "9", Direction.SEND, "cell")


def test_dual_swaps_directions(transfer):
    flipped = dual(transfer)

    assert flipped.name == "~C2"
    assert successor(flipped, "1", Direction.RECV, "cell") == "2"
    assert successor(flipped, "2", Direction.SEND, "clos") == "3"
    assert choices(flipped, "1") == frozenset({"cell", "nocell"})
    assert flipped.finals == transfer.finals


def test_dual_is_an_involution():
    rng = random.Random(1234)
    for _ in range(200):
        contract = random_contract(rng)
        assert dual(dual(contract)) == contract


def test_cycle_condition_against_simple_cycles():
    rng = random.Random(99)
    for _ in range(300):
        contract = random_contract(rng)
        expected = {
            (state, direction.value)
            for state in contract.finals
            for direction in Direction
            if on_simple_cycle(contract, state, direction)
        }
        found = {(e["state"], e["direction"]) for e in check_cycle_condition(contract)}
        assert found == expected, contract


def test_mixed_choice_detection():
    contract = Contract.build("Lock", ["0", "1"], "0", ["1"], [
        ("0", "?", "token", "0"),
        ("0", "!", "stop", "1"),
    ])

    assert check_no_mixed_choice(contract) == ["0"]
    assert check_no_mixed_choice(dual(contract)) == ["0"]


def test_nondeterminism_is_rejected():
    with pytest.raises(ContractError, match="nondeterministic"):
        Contract.build("N", ["1", "2"], "1", [], [("1", "!", "a", "1"), ("1", "!", "a", "2")])


def test_undeclared_state_is_rejected():
    with pytest.raises(ContractError):
        Contract.build("N", ["1"], "1", ["2"], [])


def test_final_send_cycle_fails_lint():
    contract = Contract.build("Loop", ["1"], "1", ["1"], [("1", "!", "a", "1")])

    result = lint(contract)

    assert not result["passed"]
    assert result["checks"]["final_cycle"] == "fail"
    assert result["findings"][0]["check"] == "final_cycle"


def test_warn_severity_passes_lint():
    contract = Contract.build("Loop", ["1"], "1", ["1"], [("1", "!", "a", "1")])

    result = lint(contract, LintConfig(final_cycle="warn"))

    assert result["passed"]
    assert result["checks"]["final_cycle"] == "warn"


def test_corpus_contracts_pass_lint(load_corpus):
    resolved = load_corpus("contracts_only.cmp")

    results = [lint(c, resolved.lint_config) for c in resolved.contracts.declared()]

    assert [r["contract"] for r in results] == ["C1", "C2", "Shared", "Service", "Persistent"]
    assert all(r["passed"] for r in results)
    assert all(not r["findings"] for r in results)


def test_lock_contract_mixed_choice_is_a_warning(load_corpus):
    resolved = load_corpus("lock_4_1.cmp")
    lock = resolved.contract("Lock")

    result = lint(lock, resolved.lint_config)

    assert result["passed"]
    assert result["checks"]["mixed_choice"] == "warn"


def test_contract_table_lookup(transfer):
    table = ContractTable([transfer])

    assert "~C2" in table
    assert table.get("~C2") == dual(transfer)
    assert table.declared() == [transfer]
    with pytest.raises(ContractError):
        table.get("C9")
