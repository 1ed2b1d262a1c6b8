"""
Abstract syntax of annotated copyless programs.
All nodes are frozen dataclasses; source locations are excluded from equality
so that structurally equal programs compare equal wherever they came from.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple, Union

from utils.error_handling import SourceLocation

NOWHERE = SourceLocation(0, 0)


def _loc() -> SourceLocation:
    return field(default=NOWHERE, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Terms and assertions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TName:
    name: str


@dataclass(frozen=True)
class TInt:
    value: int


@dataclass(frozen=True)
class TWild:
    pass


ATerm = Union[TName, TInt, TWild]


@dataclass(frozen=True)
class PermExpr:
    """A permission `coef` or `var * coef` (the latter only inside predicate bodies)."""

    coef: Fraction = Fraction(1)
    var: Optional[str] = None


FULL = PermExpr()


@dataclass(frozen=True)
class ContractRef:
    name: str
    dual: bool = False

    def __str__(self) -> str:
        return f"~{self.name}" if self.dual else self.name


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class PointsTo:
    addr: ATerm
    perm: PermExpr
    f0: ATerm
    f1: ATerm


@dataclass(frozen=True)
class EndpointPred:
    addr: ATerm
    perm: PermExpr
    contract: ContractRef
    state: str
    peer: ATerm


@dataclass(frozen=True)
class PureEq:
    left: ATerm
    right: ATerm


@dataclass(frozen=True)
class PureNeq:
    left: ATerm
    right: ATerm


@dataclass(frozen=True)
class PredApp:
    name: str
    perms: Tuple[PermExpr, ...]
    args: Tuple[ATerm, ...]


@dataclass(frozen=True)
class Star:
    parts: Tuple["Assertion", ...]


@dataclass(frozen=True)
class Exists:
    names: Tuple[str, ...]
    body: "Assertion"


Assertion = Union[Emp, PointsTo, EndpointPred, PureEq, PureNeq, PredApp, Star, Exists]


def star(*parts: Assertion) -> Assertion:
    """Separating conjunction, flattened; `emp` for no parts."""
    flat = []
    for part in parts:
        if isinstance(part, Star):
            flat.extend(part.parts)
        else:
            flat.append(part)
    if not flat:
        return Emp()
    if len(flat) == 1:
        return flat[0]
    return Star(tuple(flat))


# ---------------------------------------------------------------------------
# Expressions and conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, VarRef, BinOp]


@dataclass(frozen=True)
class Nondet:
    pass


@dataclass(frozen=True)
class Opaque:
    """An uninterpreted test such as `good(price)`; nondeterministic."""

    name: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class Not:
    cond: "Condition"


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr


Condition = Union[Nondet, Opaque, Not, Compare]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Skip:
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class New:
    var: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Dispose:
    var: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class FieldRead:
    var: str
    source: str
    field: int
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class FieldWrite:
    target: str
    field: int
    expr: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Open:
    left: str
    right: str
    contract: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Close:
    left: str
    right: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Send:
    tag: str
    endpoint: str
    args: Tuple[Expr, ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Receive:
    binders: Tuple[str, ...]
    tag: str
    endpoint: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Case:
    binders: Tuple[str, ...]
    tag: str
    endpoint: str
    body: "Seq"
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Switch:
    cases: Tuple[Case, ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Seq:
    commands: Tuple["Command", ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Branch:
    pre: Assertion
    body: Seq
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Par:
    branches: Tuple[Branch, ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class While:
    cond: Condition
    invariant: Assertion
    body: Seq
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class If:
    cond: Condition
    then: Seq
    orelse: Seq
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Local:
    names: Tuple[str, ...]
    body: Seq
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple[Expr, ...]
    result: Optional[str] = None
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Spawn:
    func: str
    args: Tuple[Expr, ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Return:
    expr: Expr
    loc: SourceLocation = _loc()


Command = Union[
    Skip,
    Assign,
    New,
    Dispose,
    FieldRead,
    FieldWrite,
    Open,
    Close,
    Send,
    Receive,
    Switch,
    Seq,
    Par,
    While,
    If,
    Local,
    Call,
    Spawn,
    Return,
]


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionDecl:
    source: str
    direction: str  # "!" or "?"
    tag: str
    target: str


@dataclass(frozen=True)
class ContractDecl:
    name: str
    states: Tuple[str, ...]
    initial: str
    finals: Tuple[str, ...]
    transitions: Tuple[TransitionDecl, ...]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class MessageDecl:
    tag: str
    params: Tuple[str, ...]
    footprint: Assertion
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    perm_params: Tuple[str, ...]
    params: Tuple[str, ...]
    body: Assertion
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: Tuple[str, ...]
    pre: Assertion
    post: Assertion
    body: Seq
    returns: bool = False
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class LintSetting:
    check: str
    severity: str


@dataclass(frozen=True)
class SourceProgram:
    contracts: Tuple[ContractDecl, ...]
    messages: Tuple[MessageDecl, ...]
    predicates: Tuple[PredicateDecl, ...]
    globals: Tuple[str, ...]
    functions: Tuple[FunctionDecl, ...]
    lint: Tuple[LintSetting, ...] = ()
    entry: str = "main"

    def function(self, name: str) -> Optional[FunctionDecl]:
        for decl in self.functions:
            if decl.name == name:
                return decl
        return None


def contains_return(command: Command) -> bool:
    """True when `command` may execute `return`."""
    if isinstance(command, Return):
        return True
    for child in children(command):
        if contains_return(child):
            return True
    return False


def children(command: Command) -> Tuple[Command, ...]:
    """Immediate sub-commands of a command."""
    if isinstance(command, Seq):
        return command.commands
    if isinstance(command, Switch):
        return tuple(case.body for case in command.cases)
    if isinstance(command, Par):
        return tuple(branch.body for branch in command.branches)
    if isinstance(command, (While, Local)):
        return (command.body,)
    if isinstance(command, If):
        return (command.then, command.orelse)
    return ()


def expr_vars(expr: Expr) -> Tuple[str, ...]:
    if isinstance(expr, VarRef):
        return (expr.name,)
    if isinstance(expr, BinOp):
        return expr_vars(expr.left) + expr_vars(expr.right)
    return ()


def cond_vars(cond: Condition) -> Tuple[str, ...]:
    if isinstance(cond, Compare):
        return expr_vars(cond.left) + expr_vars(cond.right)
    if isinstance(cond, Not):
        return cond_vars(cond.cond)
    if isinstance(cond, Opaque):
        out: Tuple[str, ...] = ()
        for arg in cond.args:
            out += expr_vars(arg)
        return out
    return ()
