"""
Symbolic execution primitives.

A symbolic state is a list of disjuncts. Each disjunct pairs a normalized
symbolic heap with an environment mapping program variables to logical terms.
The rules here cover the commands that touch the heap or a channel; the
command walker in tools.verifier composes them.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from lang import ast
from lang.resolver import RESERVED_SRC, ResolvedProgram
from logic.entailment import DEFAULT_SEARCH_BUDGET, Match, subtract
from logic.heap import (
    CellAtom,
    Const,
    EndpointAtom,
    Heap,
    NameSupply,
    Neq,
    Peer,
    SymbolicHeap,
    Term,
    Var,
    is_unsat,
    normalize_with_reps,
    star,
    with_pure,
)
from logic.predicates import expand
from tools.contracts import Direction, successor
from utils.error_handling import BudgetExceeded, SourceLocation

logger = logging.getLogger(__name__)


class Reason(str, Enum):
    """Why a proof attempt failed."""

    OWNERSHIP_MISSING = "OwnershipMissing"
    PERMISSION_VIOLATION = "PermissionViolation"
    CONTRACT_VIOLATION = "ContractViolation"
    ENTAILMENT_FAILURE = "EntailmentFailure"
    NON_EXHAUSTIVE_SWITCH = "NonExhaustiveSwitch"
    CLOSE_PRECONDITION = "ClosePrecondition"
    SPAWN_LEAK = "SpawnLeak"
    POST_MISMATCH = "PostMismatch"
    VARIABLE_CONFLICT = "VariableConflict"
    UNSAT_ANNOTATION = "UnsatAnnotation"


class ProofFailure(Exception):
    """Raised by a rule whose premise does not hold."""

    def __init__(
        self,
        reason: Reason,
        message: str,
        location: Optional[SourceLocation] = None,
        heap: Optional[Heap] = None,
    ):
        super().__init__(message)
        self.reason = reason
        self.message = message
        self.location = location
        self.heap = heap


@dataclass(frozen=True)
class Disjunct:
    heap: SymbolicHeap
    env: Tuple[Tuple[str, Term], ...] = ()

    def env_dict(self) -> Dict[str, Term]:
        return dict(self.env)

    def lookup(self, name: str) -> Term:
        for key, value in self.env:
            if key == name:
                return value
        raise KeyError(name)

    def __str__(self) -> str:
        bindings = ", ".join(f"{name}={term}" for name, term in self.env)
        return f"{self.heap} [{bindings}]"


SymState = List[Disjunct]


def _freeze(env: Mapping[str, Term]) -> Tuple[Tuple[str, Term], ...]:
    return tuple(sorted(env.items()))


@dataclass
class ProofContext:
    """
    Everything one verification run shares.

    Attributes:
        resolved: The checked program
        search_budget: Step budget for each subtraction
        footprint_before_step: Subtract a send's footprint before advancing the
            contract state (the order that fails on self-transferring sends)
    """

    resolved: ResolvedProgram
    search_budget: int = DEFAULT_SEARCH_BUDGET
    footprint_before_step: bool = False
    supply: NameSupply = field(default_factory=lambda: NameSupply(""))
    warnings: List[Dict[str, object]] = field(default_factory=list)

    def fresh(self, hint: str) -> Var:
        return self.supply.fresh(hint)

    def heap_of(self, assertion: ast.Assertion, names: Mapping[str, Term]) -> SymbolicHeap:
        return expand(self.resolved.predicates, assertion, names, self.supply)

    def footprint(
        self, tag: str, source: Term, args: Sequence[Term], env: Mapping[str, Term]
    ) -> SymbolicHeap:
        """Footprint of message `tag` with `src` and its parameters instantiated."""
        message = self.resolved.messages[tag]
        names: Dict[str, Term] = {g: env[g] for g in self.resolved.globals if g in env}
        names[RESERVED_SRC] = source
        names.update(zip(message.params, args))
        return self.heap_of(message.footprint, names)

    def subtract(self, heap: SymbolicHeap, demand: Heap, what: str, loc) -> Match:
        try:
            match = subtract(heap, demand, self.search_budget)
        except BudgetExceeded as e:
            raise ProofFailure(Reason.ENTAILMENT_FAILURE, f"{what}: {e}", loc, heap) from e
        if match is None:
            raise ProofFailure(
                Reason.ENTAILMENT_FAILURE, f"{what}: cannot find {demand}", loc, heap
            )
        return match

    def warn_unsat(self, heap: Heap, loc: Optional[SourceLocation]) -> None:
        logger.debug(f"Dropping unsatisfiable state at {loc}: {heap}")
        self.warnings.append(
            {
                "reason": Reason.UNSAT_ANNOTATION.value,
                "message": "state became unsatisfiable; the rest of this path is unreachable",
                "location": loc.to_dict() if loc else None,
            }
        )


def settle(
    ctx: ProofContext, heap: Heap, env: Mapping[str, Term], loc=None
) -> Optional[Disjunct]:
    """Normalize a heap and move the environment onto representatives."""
    normal = normalize_with_reps(heap)
    if is_unsat(normal.heap):
        ctx.warn_unsat(heap, loc)
        return None
    return Disjunct(normal.heap, _freeze({k: normal.rep(v) for k, v in env.items()}))


def dedupe(state: Iterable[Disjunct]) -> SymState:
    seen = set()
    out: SymState = []
    for disjunct in state:
        if disjunct not in seen:
            seen.add(disjunct)
            out.append(disjunct)
    return out


def eval_expr(ctx: ProofContext, expr: ast.Expr, env: Mapping[str, Term]) -> Term:
    """Symbolic value of an expression; arithmetic on unknowns yields a fresh variable."""
    if isinstance(expr, ast.IntLit):
        return Const(expr.value)
    if isinstance(expr, ast.VarRef):
        return env[expr.name]
    left = eval_expr(ctx, expr.left, env)
    right = eval_expr(ctx, expr.right, env)
    if isinstance(left, Const) and isinstance(right, Const):
        value = left.value + right.value if expr.op == "+" else left.value - right.value
        return Const(value)
    return ctx.fresh("v")


def _apart_from(heap: SymbolicHeap, term: Term) -> Tuple[Neq, ...]:
    """Disequalities between a freshly allocated address and every known address."""
    known = {a.addr for a in heap.spatial} | {a.peer for a in heap.endpoints()}
    return tuple(Neq(term, other) for other in sorted(known, key=str) if other != term)


def _endpoint(disjunct: Disjunct, term: Term, what: str, loc) -> EndpointAtom:
    atom = disjunct.heap.atom_at(term)
    if not isinstance(atom, EndpointAtom):
        raise ProofFailure(
            Reason.OWNERSHIP_MISSING, f"{what}: no endpoint owned at {term}", loc, disjunct.heap
        )
    return atom


def _cell(disjunct: Disjunct, term: Term, what: str, loc) -> CellAtom:
    atom = disjunct.heap.atom_at(term)
    if not isinstance(atom, CellAtom):
        raise ProofFailure(
            Reason.OWNERSHIP_MISSING, f"{what}: no cell owned at {term}", loc, disjunct.heap
        )
    return atom


def _replace_atom(heap: SymbolicHeap, old, new) -> SymbolicHeap:
    spatial = list(heap.spatial)
    spatial[spatial.index(old)] = new
    return SymbolicHeap(heap.existentials, heap.pure, tuple(spatial))


def _remove_atoms(heap: SymbolicHeap, *atoms) -> SymbolicHeap:
    spatial = list(heap.spatial)
    for atom in atoms:
        spatial.remove(atom)
    return SymbolicHeap(heap.existentials, heap.pure, tuple(spatial))


# ---- heap cells --------------------------------------------------------------


def exec_new(ctx: ProofContext, state: SymState, var: str, loc) -> SymState:
    out = []
    for d in state:
        addr = ctx.fresh(var)
        f0, f1 = ctx.fresh("w"), ctx.fresh("w")
        cell = SymbolicHeap(
            frozenset({f0.name, f1.name}), frozenset(), (CellAtom(addr, Fraction(1), f0, f1),)
        )
        heap = with_pure(star(d.heap, cell), Neq(addr, Const(0)), *_apart_from(d.heap, addr))
        env = d.env_dict()
        env[var] = addr
        settled = settle(ctx, heap, env, loc)
        if settled:
            out.append(settled)
    return out


def exec_dispose(ctx: ProofContext, state: SymState, var: str, loc) -> SymState:
    out = []
    for d in state:
        cell = _cell(d, d.lookup(var), f"dispose({var})", loc)
        if cell.perm < 1:
            raise ProofFailure(
                Reason.PERMISSION_VIOLATION,
                f"dispose({var}) needs full permission, holds {cell.perm}",
                loc,
                d.heap,
            )
        out.append(Disjunct(_remove_atoms(d.heap, cell), d.env))
    return out


def exec_read(ctx: ProofContext, state: SymState, var: str, source: str, index: int, loc) -> SymState:
    out = []
    for d in state:
        cell = _cell(d, d.lookup(source), f"{var} = {source}.{index}", loc)
        env = d.env_dict()
        env[var] = cell.f0 if index == 0 else cell.f1
        out.append(Disjunct(d.heap, _freeze(env)))
    return out


def exec_write(
    ctx: ProofContext, state: SymState, target: str, index: int, expr: ast.Expr, loc
) -> SymState:
    out = []
    for d in state:
        cell = _cell(d, d.lookup(target), f"{target}.{index} = ...", loc)
        if cell.perm < 1:
            raise ProofFailure(
                Reason.PERMISSION_VIOLATION,
                f"writing {target}.{index} needs full permission, holds {cell.perm}",
                loc,
                d.heap,
            )
        value = eval_expr(ctx, expr, d.env_dict())
        updated = CellAtom(
            cell.addr, cell.perm, value if index == 0 else cell.f0, value if index == 1 else cell.f1
        )
        settled = settle(ctx, _replace_atom(d.heap, cell, updated), d.env_dict(), loc)
        if settled:
            out.append(settled)
    return out


# ---- channels ----------------------------------------------------------------


def exec_open(
    ctx: ProofContext, state: SymState, left: str, right: str, contract: str, loc
) -> SymState:
    """`(e, f) = open(C)`: two fresh endpoints in C's initial state, each the other's peer."""
    c = ctx.resolved.contract(contract)
    out = []
    for d in state:
        e, f = ctx.fresh(left), ctx.fresh(right)
        pair = SymbolicHeap(
            frozenset(),
            frozenset(),
            (
                EndpointAtom(e, Fraction(1), c.name, c.init, f),
                EndpointAtom(f, Fraction(1), f"~{c.name}", c.init, e),
            ),
        )
        heap = with_pure(star(d.heap, pair), *_apart_from(d.heap, e), *_apart_from(d.heap, f))
        env = d.env_dict()
        env[left], env[right] = e, f
        settled = settle(ctx, heap, env, loc)
        if settled:
            out.append(settled)
    return out


def exec_close(ctx: ProofContext, state: SymState, left: str, right: str, loc) -> SymState:
    """`close(e, f)`: both ends fully owned, mutual peers, same final state."""
    out = []
    for d in state:
        e, f = d.lookup(left), d.lookup(right)
        atoms = [d.heap.atom_at(e), d.heap.atom_at(f)]
        if not all(isinstance(a, EndpointAtom) for a in atoms):
            raise ProofFailure(
                Reason.CLOSE_PRECONDITION,
                f"close({left}, {right}): both endpoints must be owned",
                loc,
                d.heap,
            )
        a, b = atoms
        problem = None
        if a.peer != f or b.peer != e:
            problem = "the endpoints are not each other's peer"
        elif a.perm < 1 or b.perm < 1:
            problem = "full permission on both endpoints is required"
        elif a.state != b.state:
            problem = f"the endpoints are in different states {a.state} and {b.state}"
        elif a.state not in ctx.resolved.contract(a.contract).finals:
            problem = f"state {a.state} is not final for {a.contract}"
        if problem:
            raise ProofFailure(
                Reason.CLOSE_PRECONDITION, f"close({left}, {right}): {problem}", loc, d.heap
            )
        out.append(Disjunct(_remove_atoms(d.heap, a, b), d.env))
    return out


def contract_step(
    ctx: ProofContext, disjunct: Disjunct, endpoint: Term, direction: Direction, tag: str, loc
) -> Disjunct:
    """
    Advance the endpoint at `endpoint` along a contract transition.

    Raises:
        ProofFailure: ContractViolation when no transition exists,
            PermissionViolation when the state changes under partial permission
    """
    atom = _endpoint(disjunct, endpoint, f"{direction.value}{tag}", loc)
    contract = ctx.resolved.contract(atom.contract)
    target = successor(contract, atom.state, direction, tag)
    if target is None:
        raise ProofFailure(
            Reason.CONTRACT_VIOLATION,
            f"{atom.contract} has no transition {atom.state} -{direction.value}{tag}->",
            loc,
            disjunct.heap,
        )
    if target != atom.state and atom.perm < 1:
        raise ProofFailure(
            Reason.PERMISSION_VIOLATION,
            f"{direction.value}{tag} moves {endpoint} from {atom.state} to {target} "
            f"with only {atom.perm} permission",
            loc,
            disjunct.heap,
        )
    updated = EndpointAtom(atom.addr, atom.perm, atom.contract, target, atom.peer)
    return Disjunct(_replace_atom(disjunct.heap, atom, updated), disjunct.env)


def exec_send(
    ctx: ProofContext, state: SymState, tag: str, endpoint: str, args: Sequence[ast.Expr], loc
) -> SymState:
    """`send(tag, e, args)`: step the contract, then give up the footprint."""
    out = []
    for d in state:
        env = d.env_dict()
        e = env[endpoint]
        values = [eval_expr(ctx, arg, env) for arg in args]
        what = f"send({tag}, {endpoint})"
        if ctx.footprint_before_step:
            match = ctx.subtract(d.heap, ctx.footprint(tag, e, values, env), what, loc)
            if is_unsat(match.frame):
                continue
            framed = Disjunct(match.frame, d.env)
            heap = contract_step(ctx, framed, e, Direction.SEND, tag, loc).heap
        else:
            stepped = contract_step(ctx, d, e, Direction.SEND, tag, loc)
            match = ctx.subtract(stepped.heap, ctx.footprint(tag, e, values, env), what, loc)
            if is_unsat(match.frame):
                continue
            heap = match.frame
        settled = settle(ctx, heap, env, loc)
        if settled:
            out.append(settled)
    return out


def receive_one(
    ctx: ProofContext, d: Disjunct, binders: Sequence[str], tag: str, endpoint: str, loc
) -> Optional[Disjunct]:
    """
    `binders = receive(tag, e)` on a single disjunct.

    The footprint arrives first with `src` bound to the peer of `e`, so an
    endpoint may receive the very token that grants it ownership of itself.
    """
    env = d.env_dict()
    e = env[endpoint]
    source = ctx.fresh("src")
    fresh = [ctx.fresh(name) for name in binders]
    incoming = ctx.footprint(tag, source, fresh, env)
    heap = with_pure(star(d.heap, incoming), Peer(e, source))
    for name, term in zip(binders, fresh):
        env[name] = term
    normal = normalize_with_reps(heap)
    if is_unsat(normal.heap):
        ctx.warn_unsat(heap, loc)
        return None
    settled = Disjunct(normal.heap, _freeze({k: normal.rep(v) for k, v in env.items()}))
    return contract_step(ctx, settled, normal.rep(e), Direction.RECV, tag, loc)


def exec_receive(
    ctx: ProofContext, state: SymState, binders: Sequence[str], tag: str, endpoint: str, loc
) -> SymState:
    out = []
    for d in state:
        result = receive_one(ctx, d, binders, tag, endpoint, loc)
        if result is not None:
            out.append(result)
    return out
