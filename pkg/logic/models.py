"""
Brute-force model enumeration for symbolic heaps.

Used as a test oracle: enumerates every (stack, concrete heap) pair satisfying
a heap over a small finite universe.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from logic.heap import (
    CellAtom,
    Const,
    Eq,
    Heap,
    Neq,
    Peer,
    Term,
    Var,
    is_unsat,
)
from utils.error_handling import LogicError

logger = logging.getLogger(__name__)

MAX_CANDIDATES = 1_000_000


@dataclass(frozen=True)
class Universe:
    addresses: Tuple[int, ...] = (1, 2, 3, 4)
    values: Tuple[int, ...] = (0, 1, 2)
    permissions: Tuple[Fraction, ...] = (
        Fraction(1, 4),
        Fraction(1, 2),
        Fraction(3, 4),
        Fraction(1),
    )

    def domain(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.addresses) | set(self.values) | {0}))


@dataclass(frozen=True)
class ConcreteCell:
    perm: Fraction
    v0: int
    v1: int


@dataclass(frozen=True)
class ConcreteEndpoint:
    perm: Fraction
    contract: str
    state: str
    peer: int


ConcreteObject = Union[ConcreteCell, ConcreteEndpoint]


@dataclass(frozen=True)
class Model:
    stack: Tuple[Tuple[str, int], ...]
    heap: Tuple[Tuple[int, ConcreteObject], ...]

    def heap_dict(self) -> Dict[int, ConcreteObject]:
        return dict(self.heap)


def _value(term: Term, valuation: Dict[str, int]) -> int:
    if isinstance(term, Const):
        return term.value
    return valuation[term.name]


def _build_heap(heap, valuation: Dict[str, int], universe: Universe) -> Optional[Dict[int, ConcreteObject]]:
    objects: Dict[int, ConcreteObject] = {}
    addresses = set(universe.addresses)
    for atom in heap.spatial:
        addr = _value(atom.addr, valuation)
        if addr not in addresses:
            return None
        if isinstance(atom, CellAtom):
            obj: ConcreteObject = ConcreteCell(
                atom.perm, _value(atom.f0, valuation), _value(atom.f1, valuation)
            )
        else:
            obj = ConcreteEndpoint(atom.perm, atom.contract, atom.state, _value(atom.peer, valuation))
        existing = objects.get(addr)
        if existing is not None:
            if type(existing) is not type(obj):
                return None
            perm = existing.perm + obj.perm
            if perm > 1:
                return None
            if isinstance(obj, ConcreteCell):
                if (existing.v0, existing.v1) != (obj.v0, obj.v1):
                    return None
                obj = ConcreteCell(perm, obj.v0, obj.v1)
            else:
                if (existing.contract, existing.state, existing.peer) != (
                    obj.contract,
                    obj.state,
                    obj.peer,
                ):
                    return None
                obj = ConcreteEndpoint(perm, obj.contract, obj.state, obj.peer)
        objects[addr] = obj
    return objects


def _peers_consistent(objects: Dict[int, ConcreteObject], universe: Universe) -> bool:
    addresses = set(universe.addresses)
    peers_seen: Set[int] = set()
    for addr, obj in objects.items():
        if not isinstance(obj, ConcreteEndpoint):
            continue
        peer = obj.peer
        if peer == addr or peer not in addresses:
            return False
        if peer in peers_seen:
            return False
        peers_seen.add(peer)
        other = objects.get(peer)
        if isinstance(other, ConcreteCell):
            return False
        if isinstance(other, ConcreteEndpoint) and other.peer != addr:
            return False
    return True


def _pure_holds(heap, valuation: Dict[str, int], objects: Dict[int, ConcreteObject], universe: Universe) -> bool:
    addresses = set(universe.addresses)
    for fact in heap.pure:
        left, right = (_value(t, valuation) for t in fact.terms())
        if isinstance(fact, Eq) and left != right:
            return False
        if isinstance(fact, Neq) and left == right:
            return False
        if isinstance(fact, Peer):
            if left == right or left not in addresses or right not in addresses:
                return False
            obj_l, obj_r = objects.get(left), objects.get(right)
            if isinstance(obj_l, ConcreteCell) or isinstance(obj_r, ConcreteCell):
                return False
            if isinstance(obj_l, ConcreteEndpoint) and obj_l.peer != right:
                return False
            if isinstance(obj_r, ConcreteEndpoint) and obj_r.peer != left:
                return False
            # another endpoint of the heap already claims one of them as its peer
            for addr, obj in objects.items():
                if isinstance(obj, ConcreteEndpoint) and addr not in (left, right):
                    if obj.peer in (left, right):
                        return False
    return True


def models(
    heap: Heap,
    universe: Universe = Universe(),
    variables: Optional[Iterable[str]] = None,
) -> List[Model]:
    """
    Every model of `heap` over a finite universe.

    Args:
        heap: The heap to enumerate
        universe: Addresses and values variables may take
        variables: Names kept in each model's stack (defaults to the free variables)

    Returns:
        Distinct models, sorted

    Raises:
        LogicError: When more than a million valuations would be tried
    """
    if is_unsat(heap):
        return []
    kept = sorted(set(variables) if variables is not None else heap.free_variables())
    names = sorted(set(kept) | heap.variables())
    domain = universe.domain()
    candidates = len(domain) ** len(names)
    if candidates > MAX_CANDIDATES:
        raise LogicError(f"universe too large: {candidates} valuations")

    found: Set[Model] = set()
    for values in itertools.product(domain, repeat=len(names)):
        valuation = dict(zip(names, values))
        objects = _build_heap(heap, valuation, universe)
        if objects is None or not _peers_consistent(objects, universe):
            continue
        if not _pure_holds(heap, valuation, objects, universe):
            continue
        found.add(
            Model(
                tuple((name, valuation[name]) for name in kept),
                tuple(sorted(objects.items())),
            )
        )
    return sorted(found, key=lambda m: (m.stack, [(a, repr(o)) for a, o in m.heap]))


def oracle_entails(left: Heap, right: Heap, universe: Universe = Universe()) -> bool:
    """Semantic entailment checked by enumeration: every model of `left` is one of `right`."""
    if is_unsat(left):
        return True
    if is_unsat(right):
        return not models(left, universe)
    shared: FrozenSet[str] = left.free_variables() | right.free_variables()
    wanted = set(models(right, universe, shared))
    return all(model in wanted for model in models(left, universe, shared))
