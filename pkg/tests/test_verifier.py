"""
Tests for the static verifier.
"""

from dataclasses import replace
from fractions import Fraction

import pytest

from lang import ast
from tools.reports import load_program
from tools.symexec import Reason
from tools.verifier import check_footprints, verify_function, verify_program

ACCEPTED = [
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

REJECTED = [
    ("invalid_sec3.cmp", "put", Reason.PERMISSION_VIOLATION),
    ("nonexhaustive_1_2.cmp", "get", Reason.NON_EXHAUSTIVE_SWITCH),
    ("leaky_1_1.cmp", "main", Reason.POST_MISMATCH),
    ("close_mismatch.cmp", "main", Reason.CLOSE_PRECONDITION),
]


def verdicts(report):
    return {v.function: v for v in report.functions}


@pytest.mark.parametrize("name", ACCEPTED)
def test_corpus_program_is_accepted(load_corpus, settings, name):
    report = verify_program(load_corpus(name), settings)

    rejected = {v.function: (v.reason, v.message) for v in report.functions if not v.accepted}
    assert rejected == {}
    assert report.passed


@pytest.mark.parametrize("name,function,reason", REJECTED)
def test_corpus_program_is_rejected(load_corpus, settings, name, function, reason):
    report = verify_program(load_corpus(name), settings)

    verdict = verdicts(report)[function]
    assert not report.passed
    assert verdict.status == "rejected"
    assert verdict.reason == reason.value
    assert verdict.location is not None
    assert verdict.message


def test_only_the_faulty_function_is_rejected(load_corpus, settings):
    report = verify_program(load_corpus("invalid_sec3.cmp"), settings)

    status = {name: v.accepted for name, v in verdicts(report).items()}
    assert status == {"put": False, "get": True, "main": True}


def test_lock_reports_mixed_choice_warning(load_corpus, settings):
    report = verify_program(load_corpus("lock_4_1.cmp"), settings)

    (lock,) = report.contracts
    assert lock["checks"]["mixed_choice"] == "warn"
    assert lock["passed"]


def test_send_footprint_order_matters(load_corpus):
    resolved = load_corpus("example_1_1.cmp")
    put = resolved.functions["put"]

    assert verify_function(resolved, put).accepted

    verdict = verify_function(resolved, put, footprint_before_step=True)
    assert not verdict.accepted
    assert verdict.reason == Reason.ENTAILMENT_FAILURE.value


def _framed(function: ast.FunctionDecl, name: str) -> ast.FunctionDecl:
    extra = ast.PointsTo(ast.TName(name), ast.PermExpr(Fraction(1)), ast.TInt(1), ast.TInt(2))
    return replace(function, pre=ast.star(function.pre, extra), post=ast.star(function.post, extra))


@pytest.mark.parametrize(
    "name,function",
    [
        ("example_1_1.cmp", "put"),
        ("example_1_1.cmp", "get"),
        ("example_1_1.cmp", "main"),
        ("example_1_2.cmp", "put"),
        ("fig3_producers.cmp", "get"),
    ],
)
def test_frame_is_preserved(load_corpus, name, function):
    resolved = load_corpus(name)
    original = resolved.functions[function]

    assert verify_function(resolved, original).accepted
    assert verify_function(resolved, _framed(original, "framed_cell")).accepted


def test_leaking_function_stays_rejected_with_a_frame(load_corpus):
    resolved = load_corpus("leaky_1_1.cmp")
    main = resolved.functions["main"]

    verdict = verify_function(resolved, _framed(main, "framed_cell"))

    assert verdict.reason == Reason.POST_MISMATCH.value


def test_footprints_are_precise(load_corpus):
    for name in ACCEPTED:
        findings = check_footprints(load_corpus(name))
        assert all(f["precise"] for f in findings), name


def test_singsharp_flags_receiving_states(load_corpus):
    findings = {f["tag"]: f for f in check_footprints(load_corpus("example_1_2.cmp"), True)}

    assert findings["cell"]["passed"]
    assert findings["clos"]["non_sending_states"] == [{"contract": "~C2", "state": "3"}]
    assert not findings["clos"]["passed"]


def test_imprecise_footprint_fails_check():
    resolved = load_program(
        """
        message leak [exists c. c |-> (_, _)]
        main() [emp] { skip; } [emp]
        """
    )

    report = verify_program(resolved)

    assert report.footprints == [{"tag": "leak", "precise": False, "passed": False}]
    assert not report.passed


def test_wrong_postcondition():
    resolved = load_program(
        """
        make() [emp] {
          local c;
          c = new();
          dispose(c);
        } [emp]
        leak() [emp] {
          local c;
          c = new();
        } [emp]
        main() [emp] { make(); } [emp]
        """
    )

    status = {v.function: v.reason for v in verify_program(resolved).functions}
    assert status["make"] is None
    assert status["leak"] == Reason.POST_MISMATCH.value


def test_dispose_without_ownership():
    resolved = load_program(
        """
        global c;
        main() [emp] { dispose(c); } [emp]
        """
    )

    (verdict,) = verify_program(resolved).functions
    assert verdict.reason == Reason.OWNERSHIP_MISSING.value


def test_write_needs_full_permission():
    resolved = load_program(
        """
        global c;
        poke() [c |->[1/2] (_, _)] { c.0 = 1; } [c |->[1/2] (_, _)]
        main() [emp] { skip; } [emp]
        """
    )

    status = {v.function: v.reason for v in verify_program(resolved).functions}
    assert status["poke"] == Reason.PERMISSION_VIOLATION.value


def test_read_under_half_permission():
    resolved = load_program(
        """
        global c;
        peek() [c |->[1/2] (_, 7)] {
          local v;
          v = c.1;
        } [c |->[1/2] (_, 7)]
        main() [emp] { skip; } [emp]
        """
    )

    (peek, _) = verify_program(resolved).functions
    assert peek.accepted


def test_loop_invariant_must_be_preserved():
    resolved = load_program(
        """
        main() [emp] {
          local c;
          while (*) [emp] {
            c = new();
          }
        } [emp]
        """
    )

    (verdict,) = verify_program(resolved).functions
    assert not verdict.accepted
    assert verdict.reason == Reason.ENTAILMENT_FAILURE.value


def test_spawned_function_must_not_keep_resources():
    resolved = load_program(
        """
        global c;
        keep() [emp] { c = new(); } [c |-> (_, _)]
        main() [emp] { spawn keep(); } [emp]
        """
    )

    status = {v.function: v.reason for v in verify_program(resolved).functions}
    assert status["keep"] is None
    assert status["main"] == Reason.SPAWN_LEAK.value


def test_close_needs_full_permission_on_both_ends():
    resolved = load_program(
        """
        contract T { states 1, 2; initial 1; final {1, 2}; 1 -!ping-> 2; }
        message ping [emp]
        global e, f;
        shut() [e ~>[1/2] (T<1>, f) * f ~> (~T<1>, e)] { close(e, f); } [emp]
        main() [emp] { skip; } [emp]
        """
    )

    verdict = verdicts(verify_program(resolved))["shut"]
    assert verdict.reason == Reason.CLOSE_PRECONDITION.value
    assert "full permission" in verdict.message


def test_two_channels_are_kept_apart():
    resolved = load_program(
        """
        contract C { states 1, 2; initial 1; final {1, 2}; 1 -!m-> 2; }
        message m [emp]
        main() [emp] {
          local a, b, c, d;
          (a, b) = open(C);
          (c, d) = open(C);
          send(m, a);
          receive(m, b);
          close(a, b);
          close(c, d);
        } [emp]
        """
    )

    (verdict,) = verify_program(resolved).functions
    assert verdict.accepted
