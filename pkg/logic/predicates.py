"""
From source assertions to symbolic heaps.
Expands macro predicates, instantiates names and permission parameters, and
decides the syntactic precision condition on message footprints.
"""

import logging
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Set, Tuple

from lang import ast
from logic.heap import (
    CellAtom,
    Const,
    EndpointAtom,
    Eq,
    Neq,
    NameSupply,
    SymbolicHeap,
    Term,
    Var,
    normalize,
    is_unsat,
)
from utils.error_handling import LogicError

logger = logging.getLogger(__name__)


class _Expander:
    def __init__(self, predicates: Mapping[str, ast.PredicateDecl], supply: NameSupply):
        self.predicates = predicates
        self.supply = supply
        self.existentials: Set[str] = set()
        self.pure: Set = set()
        self.spatial: List = []
        self.depth = 0

    def term(self, term: ast.ATerm, names: Mapping[str, Term]) -> Term:
        if isinstance(term, ast.TInt):
            return Const(term.value)
        if isinstance(term, ast.TWild):
            var = self.supply.fresh("w")
            self.existentials.add(var.name)
            return var
        return names.get(term.name, Var(term.name))

    @staticmethod
    def perm(perm: ast.PermExpr, perms: Mapping[str, Fraction]) -> Fraction:
        if perm.var is None:
            return perm.coef
        if perm.var not in perms:
            raise LogicError(f"unbound permission variable {perm.var}")
        return perms[perm.var] * perm.coef

    def add(
        self,
        assertion: ast.Assertion,
        names: Mapping[str, Term],
        perms: Mapping[str, Fraction],
    ) -> None:
        if isinstance(assertion, ast.Emp):
            return
        if isinstance(assertion, ast.Star):
            for part in assertion.parts:
                self.add(part, names, perms)
        elif isinstance(assertion, ast.Exists):
            inner = dict(names)
            for name in assertion.names:
                var = self.supply.fresh(name)
                self.existentials.add(var.name)
                inner[name] = var
            self.add(assertion.body, inner, perms)
        elif isinstance(assertion, ast.PointsTo):
            self.spatial.append(
                CellAtom(
                    self.term(assertion.addr, names),
                    self.perm(assertion.perm, perms),
                    self.term(assertion.f0, names),
                    self.term(assertion.f1, names),
                )
            )
        elif isinstance(assertion, ast.EndpointPred):
            self.spatial.append(
                EndpointAtom(
                    self.term(assertion.addr, names),
                    self.perm(assertion.perm, perms),
                    str(assertion.contract),
                    assertion.state,
                    self.term(assertion.peer, names),
                )
            )
        elif isinstance(assertion, ast.PureEq):
            self.pure.add(Eq(self.term(assertion.left, names), self.term(assertion.right, names)))
        elif isinstance(assertion, ast.PureNeq):
            self.pure.add(Neq(self.term(assertion.left, names), self.term(assertion.right, names)))
        elif isinstance(assertion, ast.PredApp):
            self.macro(assertion, names, perms)
        else:
            raise TypeError(f"not an assertion: {assertion!r}")

    def macro(
        self,
        app: ast.PredApp,
        names: Mapping[str, Term],
        perms: Mapping[str, Fraction],
    ) -> None:
        decl = self.predicates.get(app.name)
        if decl is None:
            raise LogicError(f"unknown predicate {app.name}")
        if len(decl.params) != len(app.args) or len(decl.perm_params) != len(app.perms):
            raise LogicError(f"arity mismatch in use of predicate {app.name}")
        self.depth += 1
        if self.depth > len(self.predicates) + 1:
            raise LogicError(f"predicate {app.name} expands recursively")
        inner: Dict[str, Term] = dict(names)
        for param, arg in zip(decl.params, app.args):
            inner[param] = self.term(arg, names)
        inner_perms = {
            param: self.perm(value, perms) for param, value in zip(decl.perm_params, app.perms)
        }
        self.add(decl.body, inner, inner_perms)
        self.depth -= 1

    def heap(self) -> SymbolicHeap:
        return SymbolicHeap(frozenset(self.existentials), frozenset(self.pure), tuple(self.spatial))


def expand(
    predicates: Mapping[str, ast.PredicateDecl],
    assertion: ast.Assertion,
    names: Optional[Mapping[str, Term]] = None,
    supply: Optional[NameSupply] = None,
) -> SymbolicHeap:
    """
    Translate an assertion into a symbolic heap.

    Args:
        predicates: Macro definitions by name
        assertion: Source assertion
        names: Terms for the assertion's free names (others become variables of the same name)
        supply: Fresh-name source for existentials and wildcards

    Returns:
        The symbolic heap (not normalized); existentials and wildcards are fresh
        existential variables

    Raises:
        LogicError: On unknown predicates or arity mismatches
    """
    expander = _Expander(predicates, supply or NameSupply("_e"))
    expander.add(assertion, names or {}, {})
    return expander.heap()


def check_precise(footprint: SymbolicHeap) -> bool:
    """
    Syntactic precision test for a footprint.

    Free variables are determined up front. An atom can be placed once its
    address is determined, or, for an endpoint, once its peer is determined
    (each endpoint has exactly one peer). Placing an atom determines all of its
    terms; equalities propagate determination. The footprint is precise when
    every atom gets placed.
    """
    heap = normalize(footprint)
    if is_unsat(heap):
        return True

    determined: Set[Term] = set()

    def known(term: Term) -> bool:
        return isinstance(term, Const) or not heap.is_existential(term) or term in determined

    pending = list(heap.spatial)
    progress = True
    while pending and progress:
        progress = False
        for fact in heap.pure:
            if isinstance(fact, Eq):
                left, right = known(fact.left), known(fact.right)
                if left != right:
                    determined.update(fact.terms())
                    progress = True
        for atom in list(pending):
            via_peer = isinstance(atom, EndpointAtom) and known(atom.peer)
            if known(atom.addr) or via_peer:
                determined.update(atom.terms())
                pending.remove(atom)
                progress = True

    if pending:
        logger.debug(f"Imprecise footprint {heap}: undetermined {[str(a) for a in pending]}")
    return not pending


def sending_state_violations(
    footprint: SymbolicHeap, is_sending: Callable[[str, str], bool]
) -> List[Tuple[str, str]]:
    """Endpoint atoms of a footprint whose state is not a sending state."""
    return [
        (atom.contract, atom.state)
        for atom in footprint.endpoints()
        if not is_sending(atom.contract, atom.state)
    ]
