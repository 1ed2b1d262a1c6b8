"""
Tests for the command-line entry point and its exit codes.
"""

import json

import pytest

from cli import RunConfig, main


def path(corpus_dir, name: str) -> str:
    return str(corpus_dir / name)


@pytest.mark.parametrize(
    "argv,code",
    [
        (["check", "example_2_2.cmp"], 0),
        (["check", "invalid_sec3.cmp"], 1),
        (["check", "does_not_exist.cmp"], 3),
        (["explore", "p0.cmp"], 2),
        (["explore", "p1.cmp"], 0),
        (["explore", "p0.cmp", "--reception", "lookahead"], 0),
        (["run", "example_1_1.cmp", "--seed", "7"], 0),
        (["run", "leaky_1_1.cmp"], 2),
        (["lint", "contracts_only.cmp"], 0),
    ],
)
def test_exit_codes(corpus_dir, argv, code):
    command, name, *rest = argv
    assert main([command, path(corpus_dir, name), *rest]) == code


def test_multiple_files_exit_with_the_worst_code(corpus_dir):
    argv = ["check", path(corpus_dir, "example_1_1.cmp"), path(corpus_dir, "leaky_1_1.cmp")]
    assert main(argv) == 1


def test_usage_errors(corpus_dir):
    assert main([]) == 3
    assert main(["verify", path(corpus_dir, "p0.cmp")]) == 3
    assert main(["explore", path(corpus_dir, "p0.cmp"), "--loop-bound", "0"]) == 3
    assert main(["explore", path(corpus_dir, "p0.cmp"), "--reception", "lifo"]) == 3


def test_help_exits_cleanly():
    assert main(["--help"]) == 0


def test_parse_error_exits_with_usage_code(tmp_path):
    broken = tmp_path / "broken.cmp"
    broken.write_text("main() [emp] { skip } [emp]\n", encoding="utf-8")

    assert main(["check", str(broken)]) == 3


def test_nondeterministic_contract_fails_lint(tmp_path):
    source = tmp_path / "nondet.cmp"
    source.write_text(
        "contract D { states 1, 2; initial 1; final {2}; 1 -!a-> 1; 1 -!a-> 2; }\n"
        "main() [emp] { skip; } [emp]\n",
        encoding="utf-8",
    )

    assert main(["lint", str(source)]) == 1


def test_non_strict_contracts_downgrade_final_cycles(tmp_path):
    source = tmp_path / "cycle.cmp"
    source.write_text(
        "contract L { states 1; initial 1; final {1}; 1 -!a-> 1; }\n"
        "main() [emp] { skip; } [emp]\n",
        encoding="utf-8",
    )

    assert main(["lint", str(source)]) == 1
    assert main(["lint", str(source), "--no-strict-contracts"]) == 0


def test_json_report(corpus_dir, capsys):
    code = main(["check", "--json", path(corpus_dir, "example_1_1.cmp")])

    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["command"] == "check"
    assert payload["exit_code"] == 0
    (report,) = payload["files"]
    assert report["passed"]
    assert {f["function"] for f in report["functions"]} == {"put", "get", "main"}


def test_json_error_report(corpus_dir, capsys):
    main(["run", "--json", path(corpus_dir, "does_not_exist.cmp")])

    (report,) = json.loads(capsys.readouterr().out)["files"]
    assert report["error"]["error"] == "File Error"
    assert report["exit_code"] == 3


def test_text_report_names_rejected_function(corpus_dir, capsys):
    main(["check", path(corpus_dir, "nonexhaustive_1_2.cmp")])

    out = capsys.readouterr().out
    assert "get: rejected NonExhaustiveSwitch" in out


def test_explore_trace_output(corpus_dir, capsys):
    main(["explore", "--trace", path(corpus_dir, "p1.cmp")])

    out = capsys.readouterr().out
    assert "outcomes: {Deadlock}" in out
    assert "t0: (e, f) = open(P)" in out


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(command="run", paths=[])
    with pytest.raises(ValueError):
        RunConfig(command="run", paths=["a.cmp"], max_steps=0)
