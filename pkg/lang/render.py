"""
Pretty-printer for annotated copyless programs.
The output is accepted by lang.parser and re-parses to an equal AST.
"""

from fractions import Fraction
from typing import Any, List

from lang import ast

_INDENT = "    "


def render_perm(perm: ast.PermExpr) -> str:
    if perm.var is None:
        return str(perm.coef)
    if perm.coef == 1:
        return perm.var
    # Only `p/d` is expressible for permission variables
    inverse = Fraction(1) / perm.coef
    return f"{perm.var}/{inverse.numerator}"


def _perm_suffix(perm: ast.PermExpr) -> str:
    if perm == ast.FULL:
        return ""
    return f"[{render_perm(perm)}]"


def render_term(term: ast.ATerm) -> str:
    if isinstance(term, ast.TName):
        return term.name
    if isinstance(term, ast.TInt):
        return str(term.value)
    return "_"


def render_assertion(assertion: ast.Assertion) -> str:
    """Render an assertion in concrete syntax."""
    if isinstance(assertion, ast.Emp):
        return "emp"
    if isinstance(assertion, ast.PointsTo):
        return (
            f"{render_term(assertion.addr)} |->{_perm_suffix(assertion.perm)} "
            f"({render_term(assertion.f0)}, {render_term(assertion.f1)})"
        )
    if isinstance(assertion, ast.EndpointPred):
        return (
            f"{render_term(assertion.addr)} ~>{_perm_suffix(assertion.perm)} "
            f"({assertion.contract}<{assertion.state}>, {render_term(assertion.peer)})"
        )
    if isinstance(assertion, ast.PureEq):
        return f"{render_term(assertion.left)} == {render_term(assertion.right)}"
    if isinstance(assertion, ast.PureNeq):
        return f"{render_term(assertion.left)} != {render_term(assertion.right)}"
    if isinstance(assertion, ast.PredApp):
        perms = ""
        if assertion.perms:
            perms = "[" + ", ".join(render_perm(p) for p in assertion.perms) + "]"
        args = ", ".join(render_term(arg) for arg in assertion.args)
        return f"{assertion.name}{perms}({args})"
    if isinstance(assertion, ast.Star):
        parts = []
        for part in assertion.parts:
            text = render_assertion(part)
            if isinstance(part, (ast.Exists, ast.Star)):
                text = f"({text})"
            parts.append(text)
        return " * ".join(parts)
    if isinstance(assertion, ast.Exists):
        return f"exists {', '.join(assertion.names)}. {render_assertion(assertion.body)}"
    raise TypeError(f"not an assertion: {assertion!r}")


def render_expr(expr: ast.Expr) -> str:
    if isinstance(expr, ast.IntLit):
        return str(expr.value)
    if isinstance(expr, ast.VarRef):
        return expr.name
    right = render_expr(expr.right)
    if isinstance(expr.right, ast.BinOp):
        right = f"({right})"
    return f"{render_expr(expr.left)} {expr.op} {right}"


def render_cond(cond: ast.Condition) -> str:
    if isinstance(cond, ast.Nondet):
        return "*"
    if isinstance(cond, ast.Not):
        return f"!{render_cond(cond.cond)}"
    if isinstance(cond, ast.Opaque):
        return f"{cond.name}({', '.join(render_expr(arg) for arg in cond.args)})"
    return f"{render_expr(cond.left)} {cond.op} {render_expr(cond.right)}"


def _args(exprs) -> str:
    return ", ".join(render_expr(expr) for expr in exprs)


def _binders(names) -> str:
    if len(names) == 1:
        return names[0]
    return f"({', '.join(names)})"


class _Printer:
    def __init__(self) -> None:
        self.lines: List[str] = []

    def emit(self, depth: int, text: str) -> None:
        self.lines.append(f"{_INDENT * depth}{text}")

    def block(self, depth: int, seq: ast.Seq, head: str = "", tail: str = "") -> None:
        self.emit(depth, f"{head}{{")
        self.commands(depth + 1, seq)
        self.emit(depth, f"}}{tail}")

    def commands(self, depth: int, seq: ast.Seq) -> None:
        for command in seq.commands:
            self.command(depth, command)

    def command(self, depth: int, c: ast.Command) -> None:
        if isinstance(c, ast.Skip):
            self.emit(depth, "skip;")
        elif isinstance(c, ast.Assign):
            self.emit(depth, f"{c.var} = {render_expr(c.expr)};")
        elif isinstance(c, ast.New):
            self.emit(depth, f"{c.var} = new();")
        elif isinstance(c, ast.Dispose):
            self.emit(depth, f"dispose({c.var});")
        elif isinstance(c, ast.FieldRead):
            self.emit(depth, f"{c.var} = {c.source}.{c.field};")
        elif isinstance(c, ast.FieldWrite):
            self.emit(depth, f"{c.target}.{c.field} = {render_expr(c.expr)};")
        elif isinstance(c, ast.Open):
            self.emit(depth, f"({c.left}, {c.right}) = open({c.contract});")
        elif isinstance(c, ast.Close):
            self.emit(depth, f"close({c.left}, {c.right});")
        elif isinstance(c, ast.Send):
            extra = f", {_args(c.args)}" if c.args else ""
            self.emit(depth, f"send({c.tag}, {c.endpoint}{extra});")
        elif isinstance(c, ast.Receive):
            call = f"receive({c.tag}, {c.endpoint});"
            self.emit(depth, f"{_binders(c.binders)} = {call}" if c.binders else call)
        elif isinstance(c, ast.Switch):
            self.emit(depth, "switch {")
            for case in c.cases:
                call = f"receive({case.tag}, {case.endpoint})"
                if case.binders:
                    call = f"{_binders(case.binders)} = {call}"
                self.block(depth + 1, case.body, head=f"case {call}: ")
            self.emit(depth, "}")
        elif isinstance(c, ast.Seq):
            self.block(depth, c)
        elif isinstance(c, ast.Par):
            self.emit(depth, "par {")
            for branch in c.branches:
                self.block(depth + 1, branch.body, head=f"[{render_assertion(branch.pre)}] ")
            self.emit(depth, "}")
        elif isinstance(c, ast.While):
            head = f"while ({render_cond(c.cond)}) [{render_assertion(c.invariant)}] "
            self.block(depth, c.body, head=head)
        elif isinstance(c, ast.If):
            self.emit(depth, f"if ({render_cond(c.cond)}) {{")
            self.commands(depth + 1, c.then)
            self.emit(depth, "} else {")
            self.commands(depth + 1, c.orelse)
            self.emit(depth, "}")
        elif isinstance(c, ast.Local):
            self.emit(depth, f"local {', '.join(c.names)};")
            self.commands(depth, c.body)
        elif isinstance(c, ast.Call):
            call = f"{c.func}({_args(c.args)});"
            self.emit(depth, f"{c.result} = {call}" if c.result else call)
        elif isinstance(c, ast.Spawn):
            self.emit(depth, f"spawn {c.func}({_args(c.args)});")
        elif isinstance(c, ast.Return):
            self.emit(depth, f"return {render_expr(c.expr)};")
        else:
            raise TypeError(f"not a command: {c!r}")


def _render_contract(printer: _Printer, decl: ast.ContractDecl) -> None:
    printer.emit(0, f"contract {decl.name} {{")
    printer.emit(1, f"states {', '.join(decl.states)};")
    printer.emit(1, f"initial {decl.initial};")
    printer.emit(1, f"final {{{', '.join(decl.finals)}}};")
    for t in decl.transitions:
        printer.emit(1, f"{t.source} -{t.direction}{t.tag}-> {t.target};")
    printer.emit(0, "}")


def render(program: Any) -> str:
    """
    Render a program back to source text.

    Args:
        program: A SourceProgram or a ResolvedProgram

    Returns:
        Source text that parses to an equal AST
    """
    source = getattr(program, "program", program)
    printer = _Printer()
    for setting in source.lint:
        printer.emit(0, f"lint {setting.check} = {setting.severity};")
    for decl in source.contracts:
        _render_contract(printer, decl)
    for message in source.messages:
        printer.emit(
            0,
            f"message {message.tag}({', '.join(message.params)}) "
            f"[{render_assertion(message.footprint)}]",
        )
    for pred in source.predicates:
        perms = f"[{', '.join(pred.perm_params)}]" if pred.perm_params else ""
        printer.emit(
            0,
            f"predicate {pred.name}{perms}({', '.join(pred.params)}) "
            f"[{render_assertion(pred.body)}]",
        )
    if source.globals:
        printer.emit(0, f"global {', '.join(source.globals)};")
    for function in source.functions:
        printer.emit(0, "")
        printer.emit(0, f"{function.name}({', '.join(function.params)}) [{render_assertion(function.pre)}]")
        printer.block(0, function.body, tail=f" [{render_assertion(function.post)}]")
    return "\n".join(printer.lines) + "\n"


def summarize(command: ast.Command) -> str:
    """One-line description of a command, as printed in traces."""
    printer = _Printer()
    printer.command(0, command)
    head = printer.lines[0] if printer.lines else ""
    return head.rstrip(" {").rstrip(";")
