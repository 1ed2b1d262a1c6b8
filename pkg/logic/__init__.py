"""
Assertion logic: symbolic heaps with fractional permissions, normalization,
footprint subtraction, entailment and a brute-force model oracle.
"""

from logic.entailment import Match, entails, matches, subtract
from logic.heap import (
    EMP,
    NIL,
    UNSAT,
    CellAtom,
    Const,
    EndpointAtom,
    Eq,
    NameSupply,
    Neq,
    Peer,
    SymbolicHeap,
    Var,
    is_unsat,
    normalize,
    normalize_with_reps,
    star,
    substitute,
)
from logic.models import Universe, models, oracle_entails
from logic.predicates import check_precise, expand

__all__ = [
    "EMP",
    "NIL",
    "UNSAT",
    "CellAtom",
    "Const",
    "EndpointAtom",
    "Eq",
    "Match",
    "NameSupply",
    "Neq",
    "Peer",
    "SymbolicHeap",
    "Universe",
    "Var",
    "check_precise",
    "entails",
    "expand",
    "is_unsat",
    "matches",
    "models",
    "normalize",
    "normalize_with_reps",
    "oracle_entails",
    "star",
    "substitute",
    "subtract",
]
