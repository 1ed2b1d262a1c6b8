"""
Static verifier.
Symbolically executes every function from its precondition and checks that
each reachable final state matches its postcondition exactly.
"""

import itertools
import logging
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

from pydantic import BaseModel, Field

from lang import ast
from lang.resolver import RESERVED_RET, RESERVED_SRC, ResolvedProgram
from logic.entailment import entails
from logic.heap import EndpointAtom, Term, Var, is_unsat, normalize, pure_part, star, substitute
from logic.predicates import check_precise, sending_state_violations
from tools.contracts import choices, is_sending_state, lint
from tools.symexec import (
    Disjunct,
    ProofContext,
    ProofFailure,
    Reason,
    SymState,
    dedupe,
    eval_expr,
    exec_close,
    exec_dispose,
    exec_new,
    exec_open,
    exec_read,
    exec_receive,
    exec_send,
    exec_write,
    receive_one,
    settle,
)
from utils.error_handling import BudgetExceeded, SourceLocation
from utils.settings import Settings

logger = logging.getLogger(__name__)

Outcome = Tuple[SymState, SymState]


class Verdict(BaseModel):
    """Result of verifying one function."""

    function: str
    status: str = "accepted"
    reason: Optional[str] = None
    message: Optional[str] = None
    location: Optional[Dict[str, int]] = None
    heap: Optional[str] = None
    warnings: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"


class ProgramReport(BaseModel):
    contracts: List[Dict[str, Any]] = Field(default_factory=list)
    footprints: List[Dict[str, Any]] = Field(default_factory=list)
    functions: List[Verdict] = Field(default_factory=list)
    passed: bool = True


# ---- syntactic variable sets ---------------------------------------------------


def _assertion_names(assertion: ast.Assertion) -> Set[str]:
    def terms(*items) -> Set[str]:
        return {t.name for t in items if isinstance(t, ast.TName)}

    if isinstance(assertion, ast.Star):
        return set().union(*(_assertion_names(p) for p in assertion.parts))
    if isinstance(assertion, ast.Exists):
        return _assertion_names(assertion.body) - set(assertion.names)
    if isinstance(assertion, ast.PointsTo):
        return terms(assertion.addr, assertion.f0, assertion.f1)
    if isinstance(assertion, ast.EndpointPred):
        return terms(assertion.addr, assertion.peer)
    if isinstance(assertion, (ast.PureEq, ast.PureNeq)):
        return terms(assertion.left, assertion.right)
    if isinstance(assertion, ast.PredApp):
        return terms(*assertion.args)
    return set()


def _exprs_vars(exprs) -> Set[str]:
    return {name for expr in exprs for name in ast.expr_vars(expr)}


def assigned_vars(command: ast.Command, resolved: ResolvedProgram) -> FrozenSet[str]:
    """Variables a command may assign, its own locals excepted."""
    if isinstance(command, (ast.Assign, ast.New, ast.FieldRead)):
        return frozenset({command.var})
    if isinstance(command, ast.Open):
        return frozenset({command.left, command.right})
    if isinstance(command, ast.Receive):
        return frozenset(command.binders)
    if isinstance(command, ast.Switch):
        out: Set[str] = set()
        for case in command.cases:
            out |= set(case.binders) | assigned_vars(case.body, resolved)
        return frozenset(out)
    if isinstance(command, ast.Call):
        out = set(resolved.modified_globals.get(command.func, frozenset()))
        if command.result:
            out.add(command.result)
        return frozenset(out)
    if isinstance(command, ast.Spawn):
        return resolved.modified_globals.get(command.func, frozenset())
    if isinstance(command, ast.Local):
        return assigned_vars(command.body, resolved) - set(command.names)
    out = set()
    for child in ast.children(command):
        out |= assigned_vars(child, resolved)
    return frozenset(out)


def occurring_vars(command: ast.Command, resolved: ResolvedProgram) -> FrozenSet[str]:
    """Variables a command mentions, its own locals excepted."""
    if isinstance(command, ast.Assign):
        return frozenset({command.var} | set(ast.expr_vars(command.expr)))
    if isinstance(command, (ast.New, ast.Dispose)):
        return frozenset({command.var})
    if isinstance(command, ast.FieldRead):
        return frozenset({command.var, command.source})
    if isinstance(command, ast.FieldWrite):
        return frozenset({command.target} | set(ast.expr_vars(command.expr)))
    if isinstance(command, (ast.Open, ast.Close)):
        return frozenset({command.left, command.right})
    if isinstance(command, ast.Send):
        return frozenset({command.endpoint} | _exprs_vars(command.args))
    if isinstance(command, ast.Receive):
        return frozenset({command.endpoint, *command.binders})
    if isinstance(command, ast.Switch):
        out: Set[str] = set()
        for case in command.cases:
            out |= {case.endpoint, *case.binders} | occurring_vars(case.body, resolved)
        return frozenset(out)
    if isinstance(command, ast.Par):
        out = set()
        for branch in command.branches:
            out |= _assertion_names(branch.pre) | occurring_vars(branch.body, resolved)
        return frozenset(out)
    if isinstance(command, ast.While):
        return frozenset(
            set(ast.cond_vars(command.cond))
            | _assertion_names(command.invariant)
            | occurring_vars(command.body, resolved)
        )
    if isinstance(command, ast.If):
        return frozenset(
            set(ast.cond_vars(command.cond))
            | occurring_vars(command.then, resolved)
            | occurring_vars(command.orelse, resolved)
        )
    if isinstance(command, ast.Local):
        return occurring_vars(command.body, resolved) - set(command.names)
    if isinstance(command, (ast.Call, ast.Spawn)):
        return _exprs_vars(command.args) | assigned_vars(command, resolved)
    if isinstance(command, ast.Return):
        return frozenset(ast.expr_vars(command.expr))
    out = set()
    for child in ast.children(command):
        out |= occurring_vars(child, resolved)
    return frozenset(out)


# ---- command walker ----------------------------------------------------------


class _Walker:
    def __init__(self, ctx: ProofContext):
        self.ctx = ctx
        self.resolved = ctx.resolved

    def run(self, command: ast.Command, state: SymState) -> Outcome:
        """Execute `command`; returns (states falling through, states that returned)."""
        if not state:
            return [], []
        loc = getattr(command, "loc", None)
        ctx = self.ctx
        if isinstance(command, ast.Seq):
            returned: SymState = []
            for sub in command.commands:
                state, ret = self.run(sub, state)
                returned += ret
            return state, returned
        if isinstance(command, ast.Skip):
            return state, []
        if isinstance(command, ast.Assign):
            out = []
            for d in state:
                env = d.env_dict()
                env[command.var] = eval_expr(ctx, command.expr, env)
                out.append(Disjunct(d.heap, tuple(sorted(env.items()))))
            return out, []
        if isinstance(command, ast.New):
            return exec_new(ctx, state, command.var, loc), []
        if isinstance(command, ast.Dispose):
            return exec_dispose(ctx, state, command.var, loc), []
        if isinstance(command, ast.FieldRead):
            return exec_read(ctx, state, command.var, command.source, command.field, loc), []
        if isinstance(command, ast.FieldWrite):
            return exec_write(ctx, state, command.target, command.field, command.expr, loc), []
        if isinstance(command, ast.Open):
            return exec_open(ctx, state, command.left, command.right, command.contract, loc), []
        if isinstance(command, ast.Close):
            return exec_close(ctx, state, command.left, command.right, loc), []
        if isinstance(command, ast.Send):
            return exec_send(ctx, state, command.tag, command.endpoint, command.args, loc), []
        if isinstance(command, ast.Receive):
            return exec_receive(ctx, state, command.binders, command.tag, command.endpoint, loc), []
        if isinstance(command, ast.Switch):
            return self.exec_switch(command, state)
        if isinstance(command, ast.Par):
            return self.exec_par(command, state), []
        if isinstance(command, ast.While):
            return self.exec_loop(command, state)
        if isinstance(command, ast.If):
            return self.exec_if(command, state)
        if isinstance(command, ast.Local):
            return self.exec_local(command, state)
        if isinstance(command, ast.Call):
            return self.exec_call(command, state), []
        if isinstance(command, ast.Spawn):
            return self.exec_spawn(command, state), []
        if isinstance(command, ast.Return):
            out = []
            for d in state:
                env = d.env_dict()
                env[RESERVED_RET] = eval_expr(ctx, command.expr, env)
                out.append(Disjunct(d.heap, tuple(sorted(env.items()))))
            return [], out
        raise TypeError(f"not a command: {command!r}")

    def _join(self, outcomes: List[Outcome]) -> Outcome:
        normal: SymState = []
        returned: SymState = []
        for n, r in outcomes:
            normal += n
            returned += r
        return dedupe(normal), dedupe(returned)

    def exec_if(self, command: ast.If, state: SymState) -> Outcome:
        # Conditions are not tracked: both branches are taken.
        return self._join([self.run(command.then, state), self.run(command.orelse, state)])

    def exec_switch(self, command: ast.Switch, state: SymState) -> Outcome:
        groups: Dict[str, List[ast.Case]] = {}
        for case in command.cases:
            groups.setdefault(case.endpoint, []).append(case)

        outcomes: List[Outcome] = []
        for d in state:
            for endpoint, cases in groups.items():
                term = d.lookup(endpoint)
                atom = d.heap.atom_at(term)
                if not isinstance(atom, EndpointAtom):
                    raise ProofFailure(
                        Reason.OWNERSHIP_MISSING,
                        f"switch on {endpoint}: no endpoint owned at {term}",
                        command.loc,
                        d.heap,
                    )
                offered = choices(self.resolved.contract(atom.contract), atom.state)
                listed = {case.tag for case in cases}
                missing = sorted(offered - listed)
                if missing:
                    raise ProofFailure(
                        Reason.NON_EXHAUSTIVE_SWITCH,
                        f"switch on {endpoint} in state {atom.contract}<{atom.state}> "
                        f"misses {', '.join(missing)}",
                        command.loc,
                        d.heap,
                    )
                for case in cases:
                    if offered and case.tag not in offered:
                        logger.debug(f"Case {case.tag} on {endpoint} cannot fire in {atom.state}")
                        continue
                    received = receive_one(
                        self.ctx, d, case.binders, case.tag, case.endpoint, case.loc
                    )
                    if received is not None:
                        outcomes.append(self.run(case.body, [received]))
        return self._join(outcomes)

    def _check_variables(self, command: ast.Par) -> None:
        assigned = [assigned_vars(b.body, self.resolved) for b in command.branches]
        occurring = [occurring_vars(b.body, self.resolved) for b in command.branches]
        occurring = [
            occ | _assertion_names(b.pre) for occ, b in zip(occurring, command.branches)
        ]
        for i, j in itertools.permutations(range(len(command.branches)), 2):
            clash = sorted(assigned[i] & occurring[j])
            if clash:
                raise ProofFailure(
                    Reason.VARIABLE_CONFLICT,
                    f"variable {clash[0]} is assigned in one parallel branch and used in another",
                    command.branches[j].loc,
                )

    def exec_par(self, command: ast.Par, state: SymState) -> SymState:
        self._check_variables(command)
        ctx = self.ctx
        assigned = [assigned_vars(b.body, self.resolved) for b in command.branches]
        out: SymState = []
        for d in state:
            env = d.env_dict()
            pres = [ctx.heap_of(b.pre, env) for b in command.branches]
            match = ctx.subtract(d.heap, star(*pres), "parallel split", command.loc)
            if is_unsat(match.frame):
                continue
            theta = {Var(name): term for name, term in match.theta.items()}

            results: List[SymState] = []
            for branch, pre in zip(command.branches, pres):
                own = star(substitute(pre, theta), pure_part(d.heap))
                start = settle(ctx, own, env, branch.loc)
                if start is None:
                    results.append([])
                    continue
                normal, _ = self.run(branch.body, [start])
                results.append(normal)

            for combination in itertools.product(*results):
                merged = dict(env)
                for names, branch_state in zip(assigned, combination):
                    branch_env = branch_state.env_dict()
                    merged.update({n: branch_env[n] for n in names if n in branch_env})
                heap = star(match.frame, *(b.heap for b in combination))
                joined = settle(ctx, heap, merged, command.loc)
                if joined is not None:
                    out.append(joined)
        return dedupe(out)

    def exec_loop(self, command: ast.While, state: SymState) -> Outcome:
        ctx = self.ctx
        modified = assigned_vars(command.body, self.resolved)
        normal: SymState = []
        returned: SymState = []
        for d in state:
            env = d.env_dict()
            entry = ctx.subtract(
                d.heap, ctx.heap_of(command.invariant, env), "loop invariant on entry", command.loc
            )
            if is_unsat(entry.frame):
                continue
            loop_env = {
                name: (ctx.fresh(name) if name in modified else term) for name, term in env.items()
            }
            start = settle(
                ctx, star(ctx.heap_of(command.invariant, loop_env), pure_part(d.heap)), loop_env
            )
            if start is not None:
                ends, rets = self.run(command.body, [start])
                returned += rets
                for end in ends:
                    invariant = ctx.heap_of(command.invariant, end.env_dict())
                    if not self.entails_exactly(end.heap, invariant, command.loc):
                        raise ProofFailure(
                            Reason.ENTAILMENT_FAILURE,
                            f"loop body does not re-establish the invariant {invariant}",
                            command.loc,
                            end.heap,
                        )
            after = settle(
                ctx, star(ctx.heap_of(command.invariant, loop_env), entry.frame), loop_env
            )
            if after is not None:
                normal.append(after)
        return dedupe(normal), dedupe(returned)

    def exec_local(self, command: ast.Local, state: SymState) -> Outcome:
        saved_states = []
        entered: SymState = []
        for d in state:
            env = d.env_dict()
            saved_states.append({n: env.get(n) for n in command.names})
            for name in command.names:
                env[name] = self.ctx.fresh(name)
            entered.append(Disjunct(d.heap, tuple(sorted(env.items()))))
        normal, returned = self.run(command.body, entered)

        # Locals are restored to their outer binding, or dropped.
        outer = {}
        for saved in saved_states:
            for name, term in saved.items():
                outer.setdefault(name, term)

        def leave(d: Disjunct) -> Disjunct:
            env = d.env_dict()
            for name in command.names:
                if outer.get(name) is None:
                    env.pop(name, None)
                else:
                    env[name] = outer[name]
            return Disjunct(d.heap, tuple(sorted(env.items())))

        return dedupe(leave(d) for d in normal), dedupe(leave(d) for d in returned)

    def _callee_names(self, callee: ast.FunctionDecl, args: List[Term], env) -> Dict[str, Term]:
        names = {g: env[g] for g in self.resolved.globals}
        names.update(zip(callee.params, args))
        return names

    def exec_call(self, command: ast.Call, state: SymState) -> SymState:
        ctx = self.ctx
        callee = self.resolved.functions.get(command.func)
        out: SymState = []
        for d in state:
            env = d.env_dict()
            if callee is None:
                # undeclared functions are opaque value producers
                if command.result:
                    env[command.result] = ctx.fresh(command.result)
                out.append(Disjunct(d.heap, tuple(sorted(env.items()))))
                continue
            args = [eval_expr(ctx, arg, env) for arg in command.args]
            pre = ctx.heap_of(callee.pre, self._callee_names(callee, args, env))
            match = ctx.subtract(d.heap, pre, f"precondition of {callee.name}", command.loc)
            if is_unsat(match.frame):
                continue
            for name in self.resolved.modified_globals.get(callee.name, frozenset()):
                env[name] = ctx.fresh(name)
            names = self._callee_names(callee, args, env)
            ret = ctx.fresh(RESERVED_RET)
            names[RESERVED_RET] = ret
            if command.result:
                env[command.result] = ret
            post = ctx.heap_of(callee.post, names)
            after = settle(ctx, star(match.frame, post), env, command.loc)
            if after is not None:
                out.append(after)
        return dedupe(out)

    def exec_spawn(self, command: ast.Spawn, state: SymState) -> SymState:
        ctx = self.ctx
        callee = self.resolved.functions[command.func]
        out: SymState = []
        for d in state:
            env = d.env_dict()
            args = [eval_expr(ctx, arg, env) for arg in command.args]
            names = self._callee_names(callee, args, env)
            pre = ctx.heap_of(callee.pre, names)
            match = ctx.subtract(d.heap, pre, f"precondition of {callee.name}", command.loc)
            names[RESERVED_RET] = ctx.fresh(RESERVED_RET)
            post = normalize(ctx.heap_of(callee.post, names))
            if not is_unsat(post) and post.spatial:
                raise ProofFailure(
                    Reason.SPAWN_LEAK,
                    f"spawned {callee.name} ends owning {post}; nothing can collect it",
                    command.loc,
                    d.heap,
                )
            if is_unsat(match.frame):
                continue
            for name in self.resolved.modified_globals.get(callee.name, frozenset()):
                env[name] = ctx.fresh(name)
            after = settle(ctx, match.frame, env, command.loc)
            if after is not None:
                out.append(after)
        return dedupe(out)

    def entails_exactly(self, heap, demand, loc) -> bool:
        try:
            return entails(heap, demand, self.ctx.search_budget)
        except BudgetExceeded as e:
            raise ProofFailure(Reason.ENTAILMENT_FAILURE, str(e), loc, heap) from e


# ---- entry points ------------------------------------------------------------


def _failure_verdict(function: ast.FunctionDecl, failure: ProofFailure) -> Verdict:
    location = failure.location or function.loc
    return Verdict(
        function=function.name,
        status="rejected",
        reason=failure.reason.value,
        message=failure.message,
        location=location.to_dict() if isinstance(location, SourceLocation) else None,
        heap=str(failure.heap) if failure.heap is not None else None,
    )


def verify_function(
    resolved: ResolvedProgram,
    function: ast.FunctionDecl,
    search_budget: int = 10_000,
    footprint_before_step: bool = False,
) -> Verdict:
    """
    Verify one function against its pre- and postcondition.

    Args:
        resolved: The checked program
        function: Function to verify
        search_budget: Step budget for each entailment search
        footprint_before_step: Subtract send footprints before the contract step

    Returns:
        Accepted verdict, or a rejection carrying the reason, site and heap
    """
    ctx = ProofContext(resolved, search_budget, footprint_before_step)
    env: Dict[str, Term] = {g: ctx.fresh(g) for g in resolved.globals}
    env.update({p: ctx.fresh(p) for p in function.params})
    walker = _Walker(ctx)
    try:
        start = settle(ctx, ctx.heap_of(function.pre, env), env, function.loc)
        normal, returned = walker.run(function.body, [start] if start else [])
        for d in normal + returned:
            names = d.env_dict()
            names.setdefault(RESERVED_RET, ctx.fresh(RESERVED_RET))
            post = ctx.heap_of(function.post, names)
            if not walker.entails_exactly(d.heap, post, function.loc):
                raise ProofFailure(
                    Reason.POST_MISMATCH,
                    f"{function.name} ends in a state that does not match its postcondition {post}",
                    function.loc,
                    d.heap,
                )
    except ProofFailure as failure:
        verdict = _failure_verdict(function, failure)
        verdict.warnings = list(ctx.warnings)
        logger.info(f"{function.name}: rejected ({verdict.reason}) {verdict.message}")
        return verdict

    logger.info(f"{function.name}: accepted")
    for warning in ctx.warnings:
        logger.warning(f"{function.name}: {warning['message']} at {warning['location']}")
    return Verdict(function=function.name, warnings=list(ctx.warnings))


def check_footprints(resolved: ResolvedProgram, singsharp: bool = False) -> List[Dict[str, Any]]:
    """Precision (and, when asked, the sending-state restriction) for every message footprint."""
    findings = []
    for tag, message in resolved.messages.items():
        names = {n: Var(n) for n in (*resolved.globals, RESERVED_SRC, *message.params)}
        footprint = ProofContext(resolved).heap_of(message.footprint, names)
        entry: Dict[str, Any] = {"tag": tag, "precise": check_precise(footprint)}
        if singsharp:

            def sending(contract: str, state: str) -> bool:
                return is_sending_state(resolved.contract(contract), state)

            entry["non_sending_states"] = [
                {"contract": c, "state": s} for c, s in sending_state_violations(footprint, sending)
            ]
        entry["passed"] = entry["precise"] and not entry.get("non_sending_states")
        if not entry["passed"]:
            logger.warning(f"Footprint of {tag} fails its checks: {entry}")
        findings.append(entry)
    return findings


def verify_program(
    resolved: ResolvedProgram,
    settings: Optional[Settings] = None,
    footprint_before_step: bool = False,
) -> ProgramReport:
    """
    Lint contracts, check footprints and verify every function.

    Args:
        resolved: The checked program
        settings: Budgets and opt-in lints (environment defaults when omitted)
        footprint_before_step: Regression knob for the send rule's order

    Returns:
        ProgramReport whose `passed` is True only when every check succeeds
    """
    settings = settings or Settings.from_env()
    contracts = [lint(c, resolved.lint_config) for c in resolved.contracts.declared()]
    footprints = check_footprints(resolved, settings.singsharp)
    verdicts = [
        verify_function(resolved, f, settings.search_budget, footprint_before_step)
        for f in resolved.functions.values()
    ]
    passed = (
        all(c["passed"] for c in contracts)
        and all(f["passed"] for f in footprints)
        and all(v.accepted for v in verdicts)
    )
    logger.info(
        f"Verified {len(verdicts)} functions: "
        f"{sum(v.accepted for v in verdicts)} accepted, passed={passed}"
    )
    return ProgramReport(
        contracts=contracts, footprints=footprints, functions=verdicts, passed=passed
    )
