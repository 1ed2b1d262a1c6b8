"""
Parser for annotated copyless programs.
Turns `.cmp` source text into the frozen AST of lang.ast using a lark LALR
grammar; syntax errors are reported as ParseError with line, column and the
tokens the parser would have accepted.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from lang import ast
from utils.error_handling import ParseError, SourceLocation

logger = logging.getLogger(__name__)

_GRAMMAR_PATH = Path(__file__).with_name("grammar.lark")

# Lark instance cache
_parser: Optional[Lark] = None


def get_lark() -> Lark:
    """Get or create the shared LALR parser."""
    global _parser
    if _parser is None:
        _parser = Lark(
            _GRAMMAR_PATH.read_text(encoding="utf-8"),
            parser="lalr",
            propagate_positions=True,
            maybe_placeholders=True,
        )
        logger.debug("Grammar loaded")
    return _parser


def _where(meta: Any) -> SourceLocation:
    return SourceLocation(getattr(meta, "line", 1), getattr(meta, "column", 1))


def _token_location(token: Token) -> SourceLocation:
    return SourceLocation(token.line or 1, token.column or 1)


class _Names(tuple):
    pass


class _Params(tuple):
    pass


class _PermParams(tuple):
    pass


class _Binders(tuple):
    pass


class _PermArgs(tuple):
    pass


class _LocalMarker:
    def __init__(self, names: Tuple[str, ...], inits: Tuple[ast.Assign, ...], loc: SourceLocation):
        self.names = names
        self.inits = inits
        self.loc = loc


class _ContractItem:
    def __init__(self, kind: str, value: Any, loc: SourceLocation):
        self.kind = kind
        self.value = value
        self.loc = loc


def _present(children: Sequence[Any]) -> List[Any]:
    return [child for child in children if child is not None]


def _exprs(children: Sequence[Any]) -> Tuple[ast.Expr, ...]:
    return tuple(
        child for child in children if isinstance(child, (ast.IntLit, ast.VarRef, ast.BinOp))
    )


@v_args(meta=True)
class _ToAst(Transformer):
    """Builds lang.ast nodes bottom-up."""

    # ---- terms, permissions, assertions ----------------------------------

    def t_name(self, meta, children):
        return ast.TName(str(children[0]))

    def t_int(self, meta, children):
        return ast.TInt(int(children[0]))

    def t_wild(self, meta, children):
        return ast.TWild()

    def perm_value(self, meta, children):
        atom, denominator = children[0], children[1]
        divisor = Fraction(1) if denominator is None else Fraction(int(denominator))
        if divisor == 0:
            raise ParseError("permission denominator is zero", _where(meta))
        if atom.type == "NAME":
            return ast.PermExpr(Fraction(1) / divisor, str(atom))
        value = Fraction(str(atom)) / divisor
        if not 0 < value <= 1:
            raise ParseError(f"permission {value} outside (0, 1]", _where(meta))
        return ast.PermExpr(value)

    def perm(self, meta, children):
        return children[0]

    def perm_args(self, meta, children):
        return _PermArgs(children)

    def contract_ref(self, meta, children):
        tilde, name = children
        return ast.ContractRef(str(name), tilde is not None)

    def emp(self, meta, children):
        return ast.Emp()

    def points_to(self, meta, children):
        addr, perm, f0, f1 = children
        return ast.PointsTo(addr, perm or ast.FULL, f0, f1)

    def endpoint(self, meta, children):
        addr, perm, contract, state, peer = children
        return ast.EndpointPred(addr, perm or ast.FULL, contract, str(state), peer)

    def pure_eq(self, meta, children):
        return ast.PureEq(children[0], children[1])

    def pure_neq(self, meta, children):
        return ast.PureNeq(children[0], children[1])

    def pred_app(self, meta, children):
        name = str(children[0])
        rest = _present(children[1:])
        perms: Tuple[ast.PermExpr, ...] = ()
        if rest and isinstance(rest[0], _PermArgs):
            perms = tuple(rest[0])
            rest = rest[1:]
        return ast.PredApp(name, perms, tuple(rest))

    def star_a(self, meta, children):
        return ast.star(*children)

    def exists_a(self, meta, children):
        names = tuple(str(child) for child in children[:-1])
        return ast.Exists(names, children[-1])

    # ---- expressions and conditions --------------------------------------

    def int_lit(self, meta, children):
        return ast.IntLit(int(children[0]))

    def var_ref(self, meta, children):
        return ast.VarRef(str(children[0]))

    def add_op(self, meta, children):
        return str(children[0])

    def cmp_op(self, meta, children):
        return str(children[0])

    def binop(self, meta, children):
        left, op, right = children
        return ast.BinOp(op, left, right)

    def nondet(self, meta, children):
        return ast.Nondet()

    def not_(self, meta, children):
        return ast.Not(children[0])

    def opaque(self, meta, children):
        return ast.Opaque(str(children[0]), _exprs(children[1:]))

    def compare(self, meta, children):
        left, op, right = children
        return ast.Compare(op, left, right)

    # ---- commands --------------------------------------------------------

    def block(self, meta, children):
        commands: List[ast.Command] = []
        for child in reversed(children):
            if isinstance(child, _LocalMarker):
                body = ast.Seq(child.inits + tuple(commands), child.loc)
                commands = [ast.Local(child.names, body, child.loc)]
            else:
                commands.insert(0, child)
        return ast.Seq(tuple(commands), _where(meta))

    def skip(self, meta, children):
        return ast.Skip(_where(meta))

    def local_decl(self, meta, children):
        name, init = children
        return (str(name), init, _where(meta))

    def local(self, meta, children):
        names = tuple(name for name, _, _ in children)
        if len(set(names)) != len(names):
            raise ParseError("duplicate name in local declaration", _where(meta))
        inits = tuple(ast.Assign(name, init, loc) for name, init, loc in children if init is not None)
        return _LocalMarker(names, inits, _where(meta))

    def rhs_expr(self, meta, children):
        return ("expr", children[0])

    def rhs_new(self, meta, children):
        return ("new",)

    def rhs_field(self, meta, children):
        source, index = children
        return ("field", str(source), self._field_index(index))

    def rhs_receive(self, meta, children):
        return ("receive", str(children[0]), str(children[1]))

    def rhs_call(self, meta, children):
        return ("call", str(children[0]), _exprs(children[1:]))

    def rhs_open(self, meta, children):
        return ("open", str(children[0]))

    @staticmethod
    def _field_index(token: Token) -> int:
        index = int(token)
        if index not in (0, 1):
            raise ParseError(f"cells have fields 0 and 1, not {index}", _token_location(token))
        return index

    def assign(self, meta, children):
        var, rhs = str(children[0]), children[1]
        loc = _where(meta)
        kind = rhs[0]
        if kind == "expr":
            return ast.Assign(var, rhs[1], loc)
        if kind == "new":
            return ast.New(var, loc)
        if kind == "field":
            return ast.FieldRead(var, rhs[1], rhs[2], loc)
        if kind == "receive":
            return ast.Receive((var,), rhs[1], rhs[2], loc)
        return ast.Call(rhs[1], rhs[2], var, loc)

    def tuple_assign(self, meta, children):
        names = tuple(str(child) for child in children[:-1])
        rhs = children[-1]
        loc = _where(meta)
        if rhs[0] == "open":
            if len(names) != 2:
                raise ParseError("open binds exactly two endpoints", loc)
            return ast.Open(names[0], names[1], rhs[1], loc)
        return ast.Receive(names, rhs[1], rhs[2], loc)

    def field_write(self, meta, children):
        target, index, expr = children
        return ast.FieldWrite(str(target), self._field_index(index), expr, _where(meta))

    def receive0(self, meta, children):
        return ast.Receive((), str(children[0]), str(children[1]), _where(meta))

    def dispose(self, meta, children):
        return ast.Dispose(str(children[0]), _where(meta))

    def close(self, meta, children):
        return ast.Close(str(children[0]), str(children[1]), _where(meta))

    def send(self, meta, children):
        return ast.Send(str(children[0]), str(children[1]), _exprs(children[2:]), _where(meta))

    def binders(self, meta, children):
        return _Binders(str(child) for child in children)

    def case(self, meta, children):
        binders, tag, endpoint, body = children
        return ast.Case(tuple(binders or ()), str(tag), str(endpoint), body, _where(meta))

    def switch(self, meta, children):
        return ast.Switch(tuple(children), _where(meta))

    def branch(self, meta, children):
        return ast.Branch(children[0], children[1], _where(meta))

    def par(self, meta, children):
        return ast.Par(tuple(children), _where(meta))

    def while_(self, meta, children):
        cond, invariant, body = children
        return ast.While(cond, invariant, body, _where(meta))

    def if_(self, meta, children):
        cond, then, orelse = children
        return ast.If(cond, then, orelse if orelse is not None else ast.Seq(()), _where(meta))

    def call0(self, meta, children):
        return ast.Call(str(children[0]), _exprs(children[1:]), None, _where(meta))

    def spawn(self, meta, children):
        return ast.Spawn(str(children[0]), _exprs(children[1:]), _where(meta))

    def return_(self, meta, children):
        return ast.Return(children[0], _where(meta))

    # ---- declarations ----------------------------------------------------

    def states_decl(self, meta, children):
        return _ContractItem("states", tuple(str(child) for child in children), _where(meta))

    def initial_decl(self, meta, children):
        return _ContractItem("initial", str(children[0]), _where(meta))

    def final_decl(self, meta, children):
        return _ContractItem("final", tuple(str(child) for child in _present(children)), _where(meta))

    def transition(self, meta, children):
        source, direction, tag, target = children
        decl = ast.TransitionDecl(str(source), str(direction)[1], str(tag), str(target))
        return _ContractItem("transition", decl, _where(meta))

    def contract(self, meta, children):
        name = str(children[0])
        loc = _where(meta)
        states: Optional[Tuple[str, ...]] = None
        initial: Optional[str] = None
        finals: Tuple[str, ...] = ()
        transitions: List[ast.TransitionDecl] = []
        for item in children[1:]:
            if item.kind == "states":
                if states is not None:
                    raise ParseError(f"contract {name} declares its states twice", item.loc)
                states = item.value
            elif item.kind == "initial":
                if initial is not None:
                    raise ParseError(f"contract {name} declares two initial states", item.loc)
                initial = item.value
            elif item.kind == "final":
                finals = finals + item.value
            else:
                transitions.append(item.value)
        if initial is None:
            raise ParseError(f"contract {name} has no initial state", loc)
        if states is None:
            seen: Dict[str, None] = {initial: None}
            for decl in transitions:
                seen.setdefault(decl.source)
                seen.setdefault(decl.target)
            for state in finals:
                seen.setdefault(state)
            states = tuple(seen)
        return ast.ContractDecl(name, states, initial, finals, tuple(transitions), loc)

    def param_list(self, meta, children):
        return _Params(str(child) for child in _present(children))

    def perm_params(self, meta, children):
        return _PermParams(str(child) for child in children)

    def message(self, meta, children):
        tag, params, footprint = children
        return ast.MessageDecl(str(tag), tuple(params or ()), footprint, _where(meta))

    def predicate(self, meta, children):
        name, perm_params, params, body = children
        return ast.PredicateDecl(
            str(name), tuple(perm_params or ()), tuple(params), body, _where(meta)
        )

    def global_decl(self, meta, children):
        return _Names((str(child), _token_location(child)) for child in children)

    def lint_decl(self, meta, children):
        return ast.LintSetting(str(children[0]), str(children[1]))

    def function(self, meta, children):
        name, params, pre, body, post = children
        return ast.FunctionDecl(
            str(name), tuple(params), pre, post, body, ast.contains_return(body), _where(meta)
        )

    def start(self, meta, children):
        return list(children)


def _check_unique(names: Sequence[Tuple[str, SourceLocation]], namespace: str) -> None:
    seen: Dict[str, SourceLocation] = {}
    for name, loc in names:
        if name in seen:
            raise ParseError(f"duplicate {namespace} '{name}' (first declared at {seen[name]})", loc)
        seen[name] = loc


def _end_of(text: str) -> SourceLocation:
    lines = text.rstrip().split("\n")
    return SourceLocation(len(lines), len(lines[-1]) + 1)


def _assemble(items: List[Any], text: str) -> ast.SourceProgram:
    contracts = tuple(item for item in items if isinstance(item, ast.ContractDecl))
    messages = tuple(item for item in items if isinstance(item, ast.MessageDecl))
    predicates = tuple(item for item in items if isinstance(item, ast.PredicateDecl))
    functions = tuple(item for item in items if isinstance(item, ast.FunctionDecl))
    lint = tuple(item for item in items if isinstance(item, ast.LintSetting))
    declared = [pair for item in items if isinstance(item, _Names) for pair in item]
    _check_unique(declared, "global")
    globals_ = [name for name, _ in declared]

    _check_unique([(c.name, c.loc) for c in contracts], "contract")
    _check_unique([(m.tag, m.loc) for m in messages], "message")
    _check_unique([(p.name, p.loc) for p in predicates], "predicate")
    _check_unique([(f.name, f.loc) for f in functions], "function")

    if not any(f.name == "main" for f in functions):
        raise ParseError("program has no function named main", _end_of(text))

    return ast.SourceProgram(
        contracts=contracts,
        messages=messages,
        predicates=predicates,
        globals=tuple(globals_),
        functions=functions,
        lint=lint,
    )


def _syntax_error(error: UnexpectedInput, text: str) -> ParseError:
    if isinstance(error, UnexpectedEOF):
        return ParseError("unexpected end of input", _end_of(text), error.expected)
    location = SourceLocation(max(error.line, 1), max(error.column, 1))
    if isinstance(error, UnexpectedToken):
        if error.token.type == "$END":
            location = _end_of(text)
            return ParseError("unexpected end of input", location, error.expected)
        return ParseError(f"unexpected token '{error.token}'", location, error.expected)
    if isinstance(error, UnexpectedCharacters):
        return ParseError(f"unexpected character '{error.char}'", location, error.allowed or ())
    return ParseError("syntax error", location)


def parse(text: str) -> ast.SourceProgram:
    """
    Parse source text into a SourceProgram.

    Args:
        text: Contents of a `.cmp` file

    Returns:
        The program AST

    Raises:
        ParseError: On syntax errors, duplicate names or a missing main
    """
    try:
        tree = get_lark().parse(text)
        items = _ToAst().transform(tree)
    except UnexpectedInput as e:
        raise _syntax_error(e, text) from e
    except VisitError as e:
        if isinstance(e.orig_exc, ParseError):
            raise e.orig_exc from e
        raise
    program = _assemble(items, text)
    logger.debug(
        f"Parsed program: {len(program.functions)} functions, "
        f"{len(program.contracts)} contracts, {len(program.messages)} messages"
    )
    return program


def parse_file(path: str) -> ast.SourceProgram:
    """Read and parse a `.cmp` file."""
    return parse(Path(path).read_text(encoding="utf-8"))
