"""
Tests for the report builders, error conversion and settings.
"""

from tools.reports import check_report, explore_report, lint_report, run_report
from utils.error_handling import ParseError, ResolveError, SourceLocation, handle_error
from utils.settings import Settings


def test_check_report_on_parse_error():
    report = check_report("main() [emp] {", Settings(), "broken.cmp")

    assert report["exit_code"] == 3
    assert report["file"] == "broken.cmp"
    assert report["error"]["error"] == "Syntax Error"
    assert report["error"]["location"]["line"] == 1


def test_check_report_on_resolve_error():
    report = check_report("main() [emp] { x = 1; } [emp]", Settings())

    assert report["exit_code"] == 3
    assert report["error"]["kind"] == "unbound-variable"
    assert report["error"]["remediation"]


def test_run_report(corpus_source):
    report = run_report(corpus_source("example_1_1.cmp"), seed=1, settings=Settings())

    assert report["passed"]
    assert report["outcome"]["kind"] == "FinishedClean"
    assert report["steps"] == len(report["outcome"]["trace"])


def test_explore_report_lists_errors(corpus_source):
    report = explore_report(corpus_source("p0.cmp"), Settings())

    assert report["outcomes"] == ["Deadlock", "UnspecifiedReception"]
    assert report["errors"] == ["UnspecifiedReception"]
    assert report["exit_code"] == 2
    assert set(report["witnesses"]) == set(report["outcomes"])


def test_lint_report(corpus_source):
    report = lint_report(corpus_source("lock_4_1.cmp"), Settings())

    assert report["passed"]
    (lock,) = report["contracts"]
    assert lock["findings"][0]["severity"] == "warn"


def test_handle_error_shapes():
    located = handle_error(ParseError("unexpected token ';'", SourceLocation(3, 7), ["NAME"]))
    assert located["location"] == {"line": 3, "column": 7}
    assert located["expected"] == ["NAME"]

    resolved = handle_error(ResolveError("unknown-tag", "unknown message tag q"))
    assert resolved["error"] == "Resolution Error"
    assert resolved["location"] is None

    unexpected = handle_error(RuntimeError("boom"))
    assert unexpected["error"] == "Unexpected Error"
    assert unexpected["details"] == "boom"


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv("COPYLESS_LOOP_BOUND", "5")
    monkeypatch.setenv("COPYLESS_SINGSHARP", "yes")
    monkeypatch.setenv("COPYLESS_STRICT_CONTRACTS", "0")
    monkeypatch.setenv("COPYLESS_RECEPTION", "lookahead")

    settings = Settings.from_env()

    assert settings.loop_bound == 5
    assert settings.singsharp
    assert not settings.strict_contracts
    assert settings.reception == "lookahead"


def test_explore_report_with_lookahead_reception(corpus_source):
    settings = Settings(reception="lookahead")

    report = explore_report(corpus_source("p0.cmp"), settings)

    assert report["reception"] == "lookahead"
    assert report["outcomes"] == ["Deadlock"]
    assert report["exit_code"] == 0
