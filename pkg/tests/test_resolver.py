"""
Tests for name resolution and program well-formedness checks.
"""

import pytest

from lang.parser import parse
from lang.resolver import entry_function, resolve
from utils.error_handling import ContractError, ResolveError

HEADER = """
contract C { states 1, 2; initial 1; final {2}; 1 -!m-> 2; }
message m(x) [emp]
"""


def resolve_text(body: str, strict: bool = True):
    return resolve(parse(HEADER + body), strict=strict)


def kind_of(body: str) -> str:
    with pytest.raises(ResolveError) as excinfo:
        resolve_text(body)
    return excinfo.value.kind


def test_resolves_corpus_tables(load_corpus):
    resolved = load_corpus("fig4_client_server.cmp")

    assert set(resolved.messages) >= {"welcome", "connect", "data", "bye"}
    assert "~Welcome" in resolved.contracts
    assert entry_function(resolved).name == "main"
    assert resolved.globals == ("ip", "ep")


def test_opaque_calls_are_recorded(load_corpus):
    resolved = load_corpus("seller_buyers.cmp")

    assert "think_about_it" in resolved.opaque_calls


def test_unbound_variable():
    assert kind_of("main() [emp] { x = 1; } [emp]") == "unbound-variable"


def test_unknown_tag():
    body = "g(e) [e ~> (C<1>, _)] { send(n, e, 1); } [e ~> (C<2>, _)]\n"
    assert kind_of(body + "main() [emp] { skip; } [emp]") == "unknown-tag"


def test_message_arity():
    body = "g(e) [e ~> (C<1>, _)] { send(m, e); } [e ~> (C<2>, _)]\n"
    assert kind_of(body + "main() [emp] { skip; } [emp]") == "arity-mismatch"


def test_unknown_contract_in_open():
    assert kind_of("main() [emp] { local a, b; (a, b) = open(D); } [emp]") == "unknown-contract"


def test_unknown_state_in_assertion():
    body = "g(e) [e ~> (C<7>, _)] { skip; } [emp]\n"
    assert kind_of(body + "main() [emp] { skip; } [emp]") == "unknown-state"


def test_unknown_predicate():
    assert kind_of("main() [lock(1)] { skip; } [emp]") == "unknown-predicate"


def test_recursive_predicate():
    body = "predicate p(x) [q(x)]\npredicate q(x) [p(x)]\nmain() [emp] { skip; } [emp]"
    assert kind_of(body) == "recursive-predicate"


def test_parameter_assignment():
    body = "g(x) [emp] { x = 1; } [emp]\nmain() [emp] { skip; } [emp]"
    assert kind_of(body) == "assigned-parameter"


def test_return_inside_parallel_branch():
    body = "g() [emp] { par { [emp] { return 1; } } } [emp]\nmain() [emp] { skip; } [emp]"
    assert kind_of(body) == "return-in-parallel"


def test_unknown_function_without_result():
    assert kind_of("main() [emp] { missing(); } [emp]") == "unknown-function"


def test_unknown_function_with_result_is_opaque():
    resolved = resolve_text("main() [emp] { local v; v = oracle(); } [emp]")

    assert resolved.opaque_calls == frozenset({"oracle"})


def test_reserved_names():
    assert kind_of("g(src) [emp] { skip; } [emp]\nmain() [emp] { skip; } [emp]") == "duplicate-name"


def test_nondeterministic_contract():
    text = """
    contract D { states 1, 2, 3; initial 1; final {2}; 1 -!m-> 2; 1 -!m-> 3; }
    main() [emp] { skip; } [emp]
    """
    with pytest.raises(ContractError, match="nondeterministic"):
        resolve(parse(text))


def test_unknown_lint_setting():
    with pytest.raises(ContractError):
        resolve_text("lint shadowing = warn;\nmain() [emp] { skip; } [emp]")


def test_lint_settings_apply(load_corpus):
    resolved = load_corpus("lock_4_1.cmp")

    assert resolved.lint_config.mixed_choice == "warn"
    assert resolved.lint_config.final_cycle == "error"


def test_non_strict_downgrades_contract_checks():
    resolved = resolve_text("main() [emp] { skip; } [emp]", strict=False)

    assert resolved.lint_config.mixed_choice == "warn"
    assert resolved.lint_config.final_cycle == "warn"
