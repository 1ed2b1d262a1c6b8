"""
Name resolution and static checks for parsed programs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx

from lang import ast
from tools.contracts import Contract, ContractTable, LintConfig
from utils.error_handling import ResolveError, SourceLocation

logger = logging.getLogger(__name__)

RESERVED_SRC = "src"
RESERVED_RET = "ret"


@dataclass(frozen=True)
class ResolvedProgram:
    """A checked program plus the tables the verifier and interpreter look things up in."""

    program: ast.SourceProgram
    lint_config: LintConfig
    contracts: ContractTable = field(compare=False, repr=False)
    messages: Dict[str, ast.MessageDecl] = field(compare=False, repr=False)
    predicates: Dict[str, ast.PredicateDecl] = field(compare=False, repr=False)
    functions: Dict[str, ast.FunctionDecl] = field(compare=False, repr=False)
    modified_globals: Dict[str, FrozenSet[str]] = field(compare=False, repr=False)
    opaque_calls: FrozenSet[str] = field(compare=False, repr=False)

    @property
    def globals(self) -> Tuple[str, ...]:
        return self.program.globals

    def contract(self, ref: Union[str, ast.ContractRef]) -> Contract:
        return self.contracts.get(str(ref))


class _AssertionChecker:
    """Checks one assertion against the names visible where it occurs."""

    def __init__(
        self,
        resolved_contracts: Dict[str, Contract],
        predicates: Dict[str, ast.PredicateDecl],
        location: SourceLocation,
        perm_vars: FrozenSet[str] = frozenset(),
    ):
        self.contracts = resolved_contracts
        self.predicates = predicates
        self.location = location
        self.perm_vars = perm_vars

    def check(self, assertion: ast.Assertion, scope: FrozenSet[str]) -> None:
        if isinstance(assertion, ast.Exists):
            self.check(assertion.body, scope | frozenset(assertion.names))
        elif isinstance(assertion, ast.Star):
            for part in assertion.parts:
                self.check(part, scope)
        elif isinstance(assertion, ast.PointsTo):
            self._perm(assertion.perm)
            self._terms((assertion.addr, assertion.f0, assertion.f1), scope)
        elif isinstance(assertion, ast.EndpointPred):
            self._perm(assertion.perm)
            self._terms((assertion.addr, assertion.peer), scope)
            contract = self.contracts.get(assertion.contract.name)
            if contract is None:
                raise ResolveError(
                    "unknown-contract", f"unknown contract {assertion.contract.name}", self.location
                )
            if assertion.state not in contract.states:
                raise ResolveError(
                    "unknown-state",
                    f"contract {contract.name} has no state {assertion.state}",
                    self.location,
                )
        elif isinstance(assertion, (ast.PureEq, ast.PureNeq)):
            self._terms((assertion.left, assertion.right), scope)
        elif isinstance(assertion, ast.PredApp):
            decl = self.predicates.get(assertion.name)
            if decl is None:
                raise ResolveError(
                    "unknown-predicate", f"unknown predicate {assertion.name}", self.location
                )
            if len(decl.params) != len(assertion.args) or len(decl.perm_params) != len(
                assertion.perms
            ):
                raise ResolveError(
                    "arity-mismatch",
                    f"predicate {decl.name} expects {len(decl.perm_params)} permission(s) and "
                    f"{len(decl.params)} argument(s)",
                    self.location,
                )
            for perm in assertion.perms:
                self._perm(perm)
            self._terms(assertion.args, scope)

    def _perm(self, perm: ast.PermExpr) -> None:
        if perm.var is not None and perm.var not in self.perm_vars:
            raise ResolveError(
                "unbound-variable", f"unbound permission variable {perm.var}", self.location
            )

    def _terms(self, terms: Iterable[ast.ATerm], scope: FrozenSet[str]) -> None:
        for term in terms:
            if isinstance(term, ast.TName) and term.name not in scope:
                raise ResolveError(
                    "unbound-variable", f"unbound variable {term.name}", self.location
                )


class _BodyChecker:
    """Walks one function body tracking variable scopes."""

    def __init__(self, resolver: "_Resolver", function: ast.FunctionDecl):
        self.resolver = resolver
        self.function = function
        self.params = frozenset(function.params)
        self.assigned_globals: Set[str] = set()
        self.callees: Set[str] = set()
        self.opaque: Set[str] = set()

    def run(self) -> None:
        scope = self.params | frozenset(self.resolver.globals)
        self.block(self.function.body, scope, in_par=False)

    # ---- helpers ---------------------------------------------------------

    def use(self, names: Iterable[str], scope: FrozenSet[str], loc: SourceLocation) -> None:
        for name in names:
            if name not in scope:
                raise ResolveError("unbound-variable", f"unbound variable {name}", loc)

    def assign(self, name: str, scope: FrozenSet[str], locals_: FrozenSet[str], loc) -> None:
        self.use((name,), scope, loc)
        if name in self.params and name not in locals_:
            raise ResolveError(
                "assigned-parameter", f"parameter {name} of {self.function.name} is assigned", loc
            )
        if name in self.resolver.globals and name not in locals_:
            self.assigned_globals.add(name)

    def exprs(self, exprs: Iterable[ast.Expr], scope: FrozenSet[str], loc) -> None:
        for expr in exprs:
            self.use(ast.expr_vars(expr), scope, loc)

    def assertion(self, assertion: ast.Assertion, scope: FrozenSet[str], loc) -> None:
        self.resolver.assertion_checker(loc).check(assertion, scope)

    def tag(self, tag: str, arity: int, loc: SourceLocation) -> None:
        decl = self.resolver.messages.get(tag)
        if decl is None:
            raise ResolveError("unknown-tag", f"unknown message tag {tag}", loc)
        if len(decl.params) != arity:
            raise ResolveError(
                "arity-mismatch",
                f"message {tag} carries {len(decl.params)} value(s), got {arity}",
                loc,
            )

    # ---- traversal -------------------------------------------------------

    def block(
        self,
        seq: ast.Seq,
        scope: FrozenSet[str],
        in_par: bool,
        locals_: FrozenSet[str] = frozenset(),
    ) -> None:
        for command in seq.commands:
            self.command(command, scope, in_par, locals_)

    def command(self, c: ast.Command, scope: FrozenSet[str], in_par: bool, locals_) -> None:
        loc = getattr(c, "loc", None)
        if isinstance(c, ast.Skip):
            return
        if isinstance(c, ast.Assign):
            self.exprs((c.expr,), scope, loc)
            self.assign(c.var, scope, locals_, loc)
        elif isinstance(c, ast.New):
            self.assign(c.var, scope, locals_, loc)
        elif isinstance(c, ast.Dispose):
            self.use((c.var,), scope, loc)
        elif isinstance(c, ast.FieldRead):
            self.use((c.source,), scope, loc)
            self.assign(c.var, scope, locals_, loc)
        elif isinstance(c, ast.FieldWrite):
            self.use((c.target,), scope, loc)
            self.exprs((c.expr,), scope, loc)
        elif isinstance(c, ast.Open):
            if c.contract not in self.resolver.contract_decls:
                raise ResolveError("unknown-contract", f"unknown contract {c.contract}", loc)
            if c.left == c.right:
                raise ResolveError("duplicate-name", "open needs two distinct variables", loc)
            self.assign(c.left, scope, locals_, loc)
            self.assign(c.right, scope, locals_, loc)
        elif isinstance(c, ast.Close):
            self.use((c.left, c.right), scope, loc)
        elif isinstance(c, ast.Send):
            self.tag(c.tag, len(c.args), loc)
            self.use((c.endpoint,), scope, loc)
            self.exprs(c.args, scope, loc)
        elif isinstance(c, ast.Receive):
            self.receive(c.binders, c.tag, c.endpoint, scope, locals_, loc)
        elif isinstance(c, ast.Switch):
            seen: Set[Tuple[str, str]] = set()
            for case in c.cases:
                if (case.endpoint, case.tag) in seen:
                    raise ResolveError(
                        "duplicate-name",
                        f"switch lists receive({case.tag}, {case.endpoint}) twice",
                        case.loc,
                    )
                seen.add((case.endpoint, case.tag))
                self.receive(case.binders, case.tag, case.endpoint, scope, locals_, case.loc)
                self.block(case.body, scope, in_par, locals_)
        elif isinstance(c, ast.Seq):
            self.block(c, scope, in_par, locals_)
        elif isinstance(c, ast.Par):
            for branch in c.branches:
                self.assertion(branch.pre, scope, branch.loc)
                self.block(branch.body, scope, True, locals_)
        elif isinstance(c, ast.While):
            self.use(ast.cond_vars(c.cond), scope, loc)
            self.assertion(c.invariant, scope, loc)
            self.block(c.body, scope, in_par, locals_)
        elif isinstance(c, ast.If):
            self.use(ast.cond_vars(c.cond), scope, loc)
            self.block(c.then, scope, in_par, locals_)
            self.block(c.orelse, scope, in_par, locals_)
        elif isinstance(c, ast.Local):
            for name in c.names:
                if name in (RESERVED_SRC, RESERVED_RET):
                    raise ResolveError("duplicate-name", f"{name} is a reserved name", loc)
            names = frozenset(c.names)
            self.block(c.body, scope | names, in_par, locals_ | names)
        elif isinstance(c, ast.Call):
            self.exprs(c.args, scope, loc)
            callee = self.resolver.functions.get(c.func)
            if callee is None:
                if c.result is None:
                    raise ResolveError("unknown-function", f"unknown function {c.func}", loc)
                self.opaque.add(c.func)
            else:
                self._arity(callee, c.args, loc)
                if c.result is not None and not callee.returns:
                    raise ResolveError(
                        "arity-mismatch", f"function {c.func} returns no value", loc
                    )
                self.callees.add(c.func)
            if c.result is not None:
                self.assign(c.result, scope, locals_, loc)
        elif isinstance(c, ast.Spawn):
            self.exprs(c.args, scope, loc)
            callee = self.resolver.functions.get(c.func)
            if callee is None:
                raise ResolveError("unknown-function", f"cannot spawn unknown function {c.func}", loc)
            self._arity(callee, c.args, loc)
        elif isinstance(c, ast.Return):
            if in_par:
                raise ResolveError("return-in-parallel", "return inside a parallel branch", loc)
            self.exprs((c.expr,), scope, loc)
        else:
            raise TypeError(f"not a command: {c!r}")

    def receive(self, binders, tag, endpoint, scope, locals_, loc) -> None:
        self.tag(tag, len(binders), loc)
        self.use((endpoint,), scope, loc)
        if len(set(binders)) != len(binders):
            raise ResolveError("duplicate-name", "a receive binds a variable twice", loc)
        for binder in binders:
            self.assign(binder, scope, locals_, loc)

    @staticmethod
    def _arity(callee: ast.FunctionDecl, args, loc) -> None:
        if len(callee.params) != len(args):
            raise ResolveError(
                "arity-mismatch",
                f"function {callee.name} takes {len(callee.params)} argument(s), got {len(args)}",
                loc,
            )


class _Resolver:
    def __init__(self, program: ast.SourceProgram, strict: bool):
        self.program = program
        self.strict = strict
        self.globals = frozenset(program.globals)
        self.contract_decls = {decl.name: decl for decl in program.contracts}
        self.messages = {decl.tag: decl for decl in program.messages}
        self.predicates = {decl.name: decl for decl in program.predicates}
        self.functions = {decl.name: decl for decl in program.functions}
        self.built: Dict[str, Contract] = {}

    def assertion_checker(
        self, loc: SourceLocation, perm_vars: FrozenSet[str] = frozenset()
    ) -> _AssertionChecker:
        return _AssertionChecker(self.built, self.predicates, loc, perm_vars)

    def run(self) -> ResolvedProgram:
        for decl in self.program.contracts:
            self.built[decl.name] = Contract.from_decl(decl)
        table = ContractTable(self.built.values())
        lint_config = LintConfig.for_program(self.program.lint, self.strict)

        self._check_reserved_globals()
        self._check_predicates()
        for message in self.program.messages:
            scope = frozenset(message.params) | {RESERVED_SRC} | self.globals
            self.assertion_checker(message.loc).check(message.footprint, scope)

        modified: Dict[str, FrozenSet[str]] = {}
        call_graph = nx.DiGraph()
        opaque: Set[str] = set()
        for function in self.program.functions:
            self._check_signature(function)
            checker = _BodyChecker(self, function)
            checker.run()
            modified[function.name] = frozenset(checker.assigned_globals)
            call_graph.add_node(function.name)
            call_graph.add_edges_from((function.name, callee) for callee in checker.callees)
            opaque |= checker.opaque

        transitive = {
            name: frozenset().union(
                direct, *(modified[callee] for callee in nx.descendants(call_graph, name))
            )
            for name, direct in modified.items()
        }

        resolved = ResolvedProgram(
            program=self.program,
            lint_config=lint_config,
            contracts=table,
            messages=self.messages,
            predicates=self.predicates,
            functions=self.functions,
            modified_globals=transitive,
            opaque_calls=frozenset(opaque),
        )
        logger.debug(
            f"Resolved program: {len(self.functions)} functions, opaque calls {sorted(opaque)}"
        )
        return resolved

    def _check_reserved_globals(self) -> None:
        for name in (RESERVED_SRC, RESERVED_RET):
            if name in self.globals:
                raise ResolveError("duplicate-name", f"{name} is a reserved name")

    def _check_predicates(self) -> None:
        graph = nx.DiGraph()
        for decl in self.program.predicates:
            graph.add_node(decl.name)
            scope = frozenset(decl.params) | self.globals
            self.assertion_checker(decl.loc, frozenset(decl.perm_params)).check(decl.body, scope)
            graph.add_edges_from((decl.name, used) for used in _predicates_used(decl.body))
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return
        name = cycle[0][0]
        raise ResolveError(
            "recursive-predicate",
            f"predicate {name} is recursive",
            self.predicates[name].loc,
        )

    def _check_signature(self, function: ast.FunctionDecl) -> None:
        if len(set(function.params)) != len(function.params):
            raise ResolveError(
                "duplicate-name", f"function {function.name} repeats a parameter", function.loc
            )
        for name in function.params:
            if name in (RESERVED_SRC, RESERVED_RET):
                raise ResolveError("duplicate-name", f"{name} is a reserved name", function.loc)
        scope = frozenset(function.params) | self.globals
        self.assertion_checker(function.loc).check(function.pre, scope)
        post_scope = scope | {RESERVED_RET} if function.returns else scope
        self.assertion_checker(function.loc).check(function.post, post_scope)


def _predicates_used(assertion: ast.Assertion) -> List[str]:
    if isinstance(assertion, ast.PredApp):
        return [assertion.name]
    if isinstance(assertion, ast.Star):
        return [name for part in assertion.parts for name in _predicates_used(part)]
    if isinstance(assertion, ast.Exists):
        return _predicates_used(assertion.body)
    return []


def resolve(
    program: Union[ast.SourceProgram, ResolvedProgram], strict: bool = True
) -> ResolvedProgram:
    """
    Check a parsed program and build its lookup tables.

    Args:
        program: A parsed program; an already resolved program is re-checked
        strict: Contract-check severities default to errors when True

    Returns:
        ResolvedProgram

    Raises:
        ResolveError: On unknown names, arity mismatches, recursive predicates,
            unbound variables or misplaced statements
        ContractError: On malformed contract declarations
    """
    if isinstance(program, ResolvedProgram):
        program = program.program
    return _Resolver(program, strict).run()


def entry_function(resolved: ResolvedProgram) -> Optional[ast.FunctionDecl]:
    return resolved.functions.get(resolved.program.entry)
