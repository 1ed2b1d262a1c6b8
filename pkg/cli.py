"""
Command-line interface for the copyless verifier.

    copyless check   FILE...   verify annotated programs
    copyless run     FILE...   execute one seeded schedule
    copyless explore FILE...   explore every interleaving within bounds
    copyless lint    FILE...   check contracts only

Exit codes: 0 all pass, 1 verification or lint failure, 2 runtime error
outcome found, 3 usage, read or parse error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from tools.interpreter import RECEPTION_MODES
from tools.reports import (
    EXIT_USAGE,
    check_report,
    error_report,
    explore_report,
    lint_report,
    run_report,
)
from utils.logging_config import correlation, setup_logging
from utils.settings import Settings

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Validated command-line options."""

    command: Literal["check", "run", "explore", "lint"]
    paths: List[str] = Field(min_length=1)
    seed: int = 0
    max_steps: int = Field(default=10_000, gt=0)
    loop_bound: int = Field(default=2, gt=0)
    max_depth: int = Field(default=10_000, gt=0)
    state_budget: int = Field(default=1_000_000, gt=0)
    singsharp: bool = False
    strict_contracts: bool = True
    reception: Literal["fifo", "lookahead"] = "fifo"
    json_output: bool = False
    trace: bool = False

    def settings(self, base: Settings) -> Settings:
        return base.model_copy(
            update={
                "max_steps": self.max_steps,
                "loop_bound": self.loop_bound,
                "max_depth": self.max_depth,
                "state_budget": self.state_budget,
                "singsharp": self.singsharp,
                "strict_contracts": self.strict_contracts,
                "reception": self.reception,
            }
        )


class Report(BaseModel):
    command: str
    files: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return max((f.get("exit_code", 0) for f in self.files), default=0)


def build_parser(defaults: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copyless",
        description="Verify and run annotated copyless message-passing programs.",
    )
    parser.add_argument("--log-level", default=defaults.log_level, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("paths", nargs="+", metavar="FILE", help="Program files (.cmp)")
        cmd.add_argument("--json", dest="json_output", action="store_true", help="JSON report")
        cmd.add_argument(
            "--no-strict-contracts",
            dest="strict_contracts",
            action="store_false",
            default=defaults.strict_contracts,
            help="Report mixed choice and final cycles as warnings",
        )
        return cmd

    def add_reception(cmd: argparse.ArgumentParser) -> None:
        cmd.add_argument(
            "--reception",
            choices=RECEPTION_MODES,
            default=defaults.reception,
            help="lookahead lets a reception take a matching message from deeper in the queue",
        )

    check = add("check", "Verify every function against its annotations")
    check.add_argument(
        "--singsharp",
        action="store_true",
        default=defaults.singsharp,
        help="Only allow endpoints in sending states inside message footprints",
    )

    run = add("run", "Execute one schedule chosen by a seeded scheduler")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-steps", type=int, default=defaults.max_steps)
    run.add_argument("--trace", action="store_true", help="Print one line per step")
    add_reception(run)

    explore = add("explore", "Explore all interleavings within bounds")
    explore.add_argument("--loop-bound", type=int, default=defaults.loop_bound)
    explore.add_argument("--max-depth", type=int, default=defaults.max_depth)
    explore.add_argument("--state-budget", type=int, default=defaults.state_budget)
    explore.add_argument("--trace", action="store_true", help="Print witness traces")
    add_reception(explore)

    add("lint", "Check contracts for determinism, mixed choice and final cycles")
    return parser


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def run_command(config: RunConfig, settings: Settings) -> Report:
    """Run one command over every input file."""
    builders = {
        "check": lambda text, name: check_report(text, settings, name),
        "run": lambda text, name: run_report(text, config.seed, settings, name),
        "explore": lambda text, name: explore_report(text, settings, name),
        "lint": lambda text, name: lint_report(text, settings, name),
    }
    report = Report(command=config.command)
    for path in config.paths:
        try:
            text = _read(path)
        except OSError as e:
            report.files.append(error_report(config.command, e, path))
            continue
        report.files.append(builders[config.command](text, path))
    return report


# ---- human-readable output -----------------------------------------------------


def _where(location: Optional[Dict[str, int]]) -> str:
    if not location:
        return ""
    return f" at {location['line']}:{location['column']}"


def _format_error(entry: Dict[str, Any]) -> List[str]:
    error = entry["error"]
    lines = [f"  error: {error['error']}{_where(error.get('location'))}: {error['message']}"]
    lines += [f"    hint: {hint}" for hint in error.get("remediation", [])]
    return lines


def _format_contracts(contracts: List[Dict[str, Any]]) -> List[str]:
    lines = []
    for lint in contracts:
        checks = ", ".join(f"{k}={v}" for k, v in lint["checks"].items())
        lines.append(f"  contract {lint['contract']}: {checks}")
        for finding in lint["findings"]:
            lines.append(f"    {finding['severity']}: {finding['message']}")
    return lines


def _format_check(entry: Dict[str, Any]) -> List[str]:
    lines = _format_contracts(entry["contracts"])
    for footprint in entry["footprints"]:
        if not footprint["passed"]:
            lines.append(f"  message {footprint['tag']}: footprint fails its checks {footprint}")
    for verdict in entry["functions"]:
        if verdict["status"] == "accepted":
            lines.append(f"  {verdict['function']}: accepted")
        else:
            lines.append(
                f"  {verdict['function']}: rejected {verdict['reason']}"
                f"{_where(verdict['location'])}: {verdict['message']}"
            )
            if verdict.get("heap"):
                lines.append(f"    heap: {verdict['heap']}")
        for warning in verdict.get("warnings", []):
            lines.append(f"    warning{_where(warning.get('location'))}: {warning['message']}")
    return lines


def _format_outcome(outcome: Dict[str, Any], trace: bool) -> List[str]:
    lines = [f"  {outcome['kind']}{_where(outcome.get('location'))}: {outcome['message']}"]
    if trace:
        lines += [f"    {step}" for step in outcome.get("trace", [])]
    return lines


def format_report(report: Report, trace: bool = False) -> str:
    lines: List[str] = []
    for entry in report.files:
        lines.append(f"{entry.get('file') or '<input>'}:")
        if "error" in entry:
            lines += _format_error(entry)
        elif report.command == "check":
            lines += _format_check(entry)
        elif report.command == "lint":
            lines += _format_contracts(entry["contracts"])
        elif report.command == "run":
            lines.append(f"  seed {entry['seed']}, {entry['steps']} steps")
            lines += _format_outcome(entry["outcome"], trace)
        else:
            kinds = ", ".join(entry["outcomes"])
            partial = " (partial: state budget exhausted)" if entry["partial"] else ""
            lines.append(f"  outcomes: {{{kinds}}} over {entry['states']} states{partial}")
            for witness in entry["witnesses"].values():
                lines += _format_outcome(witness, trace)
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    defaults = Settings.from_env()
    parser = build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    setup_logging(args.log_level)
    values = {k: v for k, v in vars(args).items() if k != "log_level" and v is not None}
    try:
        config = RunConfig(**values)
    except ValidationError as e:
        print(f"copyless: invalid options: {e}", file=sys.stderr)
        return EXIT_USAGE

    with correlation():
        logger.info(f"Starting {config.command} on {len(config.paths)} file(s)")
        report = run_command(config, config.settings(defaults))
        if config.json_output:
            payload = {
                "command": report.command,
                "files": report.files,
                "exit_code": report.exit_code,
            }
            print(json.dumps(payload, indent=2, default=str))
        else:
            print(format_report(report, config.trace))
        logger.info(f"{config.command} finished with exit code {report.exit_code}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
