"""
Verified programs explored exhaustively: no outcome a proof rules out may appear.
"""

import pytest

from tools.explorer import check_soundness
from tools.interpreter import ERROR_KINDS
from tools.verifier import verify_program

VERIFIED = [
    "example_1_1.cmp",
    "example_2_2.cmp",
    "example_1_2.cmp",
    "fig1_multi_readers.cmp",
    "fig3_producers.cmp",
    "example_3_2.cmp",
    "fig4_client_server.cmp",
    "lock_4_1.cmp",
    "seller_buyers.cmp",
]

REFUTED = ["invalid_sec3.cmp", "close_mismatch.cmp", "leaky_1_1.cmp"]


@pytest.mark.slow
@pytest.mark.parametrize("name", VERIFIED)
def test_verified_programs_are_safe(load_corpus, settings, name):
    resolved = load_corpus(name)
    assert verify_program(resolved, settings).passed

    result = check_soundness(resolved, loop_bound=2)

    assert not result["partial"]
    assert result["passed"], result["violations"]
    assert not set(result["outcomes"]) & ERROR_KINDS


@pytest.mark.slow
@pytest.mark.parametrize("name", REFUTED)
def test_rejected_programs_show_an_error(load_corpus, settings, name):
    resolved = load_corpus(name)
    assert not verify_program(resolved, settings).passed

    result = check_soundness(resolved)

    assert not result["passed"]
    assert set(result["violations"]) <= ERROR_KINDS


def test_exhausted_budget_is_inconclusive(load_corpus):
    result = check_soundness(load_corpus("fig3_producers.cmp"), state_budget=3)

    assert result["partial"]
    assert result["inconclusive"]
    assert not result["passed"]
    assert result["violations"] == {}
