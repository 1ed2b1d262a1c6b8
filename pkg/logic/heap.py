"""
Symbolic heaps with fractional permissions.

A heap is a set of pure facts (equalities, disequalities, peer facts) and a
multiset of spatial atoms (cells and endpoints). `normalize` applies the
equalities, merges atoms sharing an address, saturates the peer relation and
detects unsatisfiability.

Conventions: the constant 0 is nil and is never an allocated address; every
endpoint's peer is an allocated endpoint other than itself, and no two
endpoints share a peer.
"""

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


Term = Union[Var, Const]
NIL = Const(0)


def term_key(term: Term) -> Tuple[int, str, int]:
    if isinstance(term, Const):
        return (0, "", term.value)
    return (1, term.name, 0)


def _perm_text(perm: Fraction) -> str:
    return "" if perm == 1 else f"[{perm}]"


@dataclass(frozen=True)
class CellAtom:
    addr: Term
    perm: Fraction
    f0: Term
    f1: Term

    def terms(self) -> Tuple[Term, ...]:
        return (self.addr, self.f0, self.f1)

    def map(self, fn) -> "CellAtom":
        return CellAtom(fn(self.addr), self.perm, fn(self.f0), fn(self.f1))

    def __str__(self) -> str:
        return f"{self.addr} |->{_perm_text(self.perm)} ({self.f0}, {self.f1})"


@dataclass(frozen=True)
class EndpointAtom:
    addr: Term
    perm: Fraction
    contract: str
    state: str
    peer: Term

    def terms(self) -> Tuple[Term, ...]:
        return (self.addr, self.peer)

    def map(self, fn) -> "EndpointAtom":
        return EndpointAtom(fn(self.addr), self.perm, self.contract, self.state, fn(self.peer))

    def __str__(self) -> str:
        return f"{self.addr} ~>{_perm_text(self.perm)} ({self.contract}<{self.state}>, {self.peer})"


Atom = Union[CellAtom, EndpointAtom]


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term

    def terms(self) -> Tuple[Term, ...]:
        return (self.left, self.right)

    def map(self, fn) -> "Eq":
        return Eq(fn(self.left), fn(self.right))

    def __str__(self) -> str:
        return f"{self.left} == {self.right}"


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term

    def terms(self) -> Tuple[Term, ...]:
        return (self.left, self.right)

    def map(self, fn) -> "Neq":
        return Neq(fn(self.left), fn(self.right))

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True)
class Peer:
    """`endpoint` and `peer` are the two ends of one channel."""

    endpoint: Term
    peer: Term

    def terms(self) -> Tuple[Term, ...]:
        return (self.endpoint, self.peer)

    def map(self, fn) -> "Peer":
        return Peer(fn(self.endpoint), fn(self.peer))

    def __str__(self) -> str:
        return f"peer({self.endpoint}) == {self.peer}"


Pure = Union[Eq, Neq, Peer]


def _pure_key(fact: Pure) -> Tuple:
    return (type(fact).__name__,) + tuple(term_key(t) for t in fact.terms())


def _atom_key(atom: Atom) -> Tuple:
    if isinstance(atom, CellAtom):
        return (0, term_key(atom.addr), atom.perm, term_key(atom.f0), term_key(atom.f1))
    return (1, term_key(atom.addr), atom.perm, atom.contract, atom.state, term_key(atom.peer))


@dataclass(frozen=True)
class SymbolicHeap:
    existentials: FrozenSet[str] = frozenset()
    pure: FrozenSet[Pure] = frozenset()
    spatial: Tuple[Atom, ...] = ()

    def is_existential(self, term: Term) -> bool:
        return isinstance(term, Var) and term.name in self.existentials

    def variables(self) -> FrozenSet[str]:
        names = set()
        for item in itertools.chain(self.pure, self.spatial):
            names.update(t.name for t in item.terms() if isinstance(t, Var))
        return frozenset(names)

    def free_variables(self) -> FrozenSet[str]:
        return self.variables() - self.existentials

    def cells(self) -> List[CellAtom]:
        return [a for a in self.spatial if isinstance(a, CellAtom)]

    def endpoints(self) -> List[EndpointAtom]:
        return [a for a in self.spatial if isinstance(a, EndpointAtom)]

    def atom_at(self, addr: Term) -> Optional[Atom]:
        for atom in self.spatial:
            if atom.addr == addr:
                return atom
        return None

    def __str__(self) -> str:
        parts = [str(a) for a in sorted(self.spatial, key=_atom_key)]
        parts += [str(p) for p in sorted(self.pure, key=_pure_key)]
        body = " * ".join(parts) if parts else "emp"
        used = sorted(self.existentials & self.variables())
        if used:
            return f"exists {', '.join(used)}. {body}"
        return body


class Unsat:
    """The unsatisfiable heap."""

    _instance: Optional["Unsat"] = None

    def __new__(cls) -> "Unsat":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __str__(self) -> str:
        return "false"

    def __repr__(self) -> str:
        return "UNSAT"


UNSAT = Unsat()
Heap = Union[SymbolicHeap, Unsat]
EMP = SymbolicHeap()


def is_unsat(heap: Heap) -> bool:
    return isinstance(heap, Unsat)


class NameSupply:
    """Deterministic fresh logical variables."""

    def __init__(self, prefix: str = "_"):
        self.prefix = prefix
        self._counter = itertools.count(1)

    def fresh(self, hint: str = "v") -> Var:
        return Var(f"{self.prefix}{hint}#{next(self._counter)}")


def star(*heaps: Heap) -> Heap:
    """Separating conjunction without normalization."""
    if any(is_unsat(h) for h in heaps):
        return UNSAT
    existentials: FrozenSet[str] = frozenset()
    pure: FrozenSet[Pure] = frozenset()
    spatial: List[Atom] = []
    for heap in heaps:
        existentials |= heap.existentials
        pure |= heap.pure
        spatial.extend(heap.spatial)
    return SymbolicHeap(existentials, pure, tuple(spatial))


def substitute(heap: Heap, mapping: Mapping[Var, Term]) -> Heap:
    """Replace variables by terms; mapped variables stop being existential."""
    if is_unsat(heap) or not mapping:
        return heap

    def fn(term: Term) -> Term:
        return mapping.get(term, term) if isinstance(term, Var) else term

    existentials = frozenset(n for n in heap.existentials if Var(n) not in mapping)
    return SymbolicHeap(
        existentials,
        frozenset(p.map(fn) for p in heap.pure),
        tuple(a.map(fn) for a in heap.spatial),
    )


def with_pure(heap: Heap, *facts: Pure) -> Heap:
    if is_unsat(heap):
        return heap
    return replace(heap, pure=heap.pure | frozenset(facts))


def with_existentials(heap: Heap, names: Iterable[str]) -> Heap:
    if is_unsat(heap):
        return heap
    return replace(heap, existentials=heap.existentials | frozenset(names))


def drop_pure(heap: Heap) -> Heap:
    if is_unsat(heap):
        return heap
    return replace(heap, pure=frozenset())


def pure_part(heap: SymbolicHeap) -> SymbolicHeap:
    return SymbolicHeap(heap.existentials, heap.pure, ())


class _UnionFind:
    def __init__(self, existentials: FrozenSet[str]):
        self.parent: Dict[Term, Term] = {}
        self.existentials = existentials

    def rank(self, term: Term) -> Tuple:
        if isinstance(term, Const):
            return (0, "", term.value)
        return (2 if term.name in self.existentials else 1, term.name, 0)

    def find(self, term: Term) -> Term:
        root = term
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while term != root:
            parent = self.parent.get(term, term)
            self.parent[term] = root
            term = parent
        return root

    def union(self, a: Term, b: Term) -> bool:
        """Merge classes; False when two distinct constants meet."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return True
        if isinstance(ra, Const) and isinstance(rb, Const):
            return False
        if self.rank(rb) < self.rank(ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def mapping(self, terms: Iterable[Term]) -> Dict[Var, Term]:
        out = {}
        for term in terms:
            if isinstance(term, Var):
                rep = self.find(term)
                if rep != term:
                    out[term] = rep
        return out


def _merge(a: Atom, b: Atom) -> Optional[Tuple[Atom, List[Tuple[Term, Term]]]]:
    """Combine two atoms at the same address, or None when they cannot coexist."""
    if type(a) is not type(b):
        return None
    perm = a.perm + b.perm
    if perm > 1:
        return None
    if isinstance(a, CellAtom):
        return replace(a, perm=perm), [(a.f0, b.f0), (a.f1, b.f1)]
    if a.contract != b.contract or a.state != b.state:
        return None
    return replace(a, perm=perm), [(a.peer, b.peer)]


@dataclass(frozen=True)
class Normalized:
    heap: Heap
    reps: Dict[Var, Term] = field(default_factory=dict)

    def rep(self, term: Term) -> Term:
        return self.reps.get(term, term) if isinstance(term, Var) else term


def normalize_with_reps(heap: Heap) -> Normalized:
    """
    Normalize a heap and report the representative chosen for every variable.

    Args:
        heap: Any heap

    Returns:
        The normal form and a map from eliminated variables to representatives
    """
    if is_unsat(heap):
        return Normalized(UNSAT)

    uf = _UnionFind(heap.existentials)
    all_terms = set()
    for item in itertools.chain(heap.pure, heap.spatial):
        all_terms.update(item.terms())

    for fact in heap.pure:
        if isinstance(fact, Eq) and not uf.union(fact.left, fact.right):
            return Normalized(UNSAT)

    atoms: List[Atom] = list(heap.spatial)
    peer_facts = [f for f in heap.pure if isinstance(f, Peer)]

    while True:
        atoms = [atom.map(uf.find) for atom in atoms]
        groups: Dict[Term, List[Atom]] = defaultdict(list)
        for atom in atoms:
            groups[atom.addr].append(atom)

        merged: List[Atom] = []
        pending: List[Tuple[Term, Term]] = []
        for addr, group in groups.items():
            if addr == NIL:
                return Normalized(UNSAT)
            combined = group[0]
            for other in group[1:]:
                result = _merge(combined, other)
                if result is None:
                    return Normalized(UNSAT)
                combined, equations = result
                pending.extend(equations)
            if combined.perm > 1:
                return Normalized(UNSAT)
            merged.append(combined)

        peer_of: Dict[Term, Term] = {}
        constraints: List[Tuple[Term, Term]] = []
        for atom in merged:
            if isinstance(atom, EndpointAtom):
                constraints += [(atom.addr, atom.peer), (atom.peer, atom.addr)]
        for fact in peer_facts:
            e, p = uf.find(fact.endpoint), uf.find(fact.peer)
            constraints += [(e, p), (p, e)]
        for endpoint, peer in constraints:
            known = peer_of.get(endpoint)
            if known is None:
                peer_of[endpoint] = peer
            elif known != peer:
                pending.append((known, peer))

        progress = False
        for left, right in pending:
            if uf.find(left) != uf.find(right):
                if not uf.union(left, right):
                    return Normalized(UNSAT)
                progress = True
        atoms = merged
        if not progress:
            break

    cells = {atom.addr for atom in atoms if isinstance(atom, CellAtom)}
    endpoint_atoms = {atom.addr: atom for atom in atoms if isinstance(atom, EndpointAtom)}
    for endpoint, peer in peer_of.items():
        if peer == endpoint or peer == NIL or endpoint == NIL:
            return Normalized(UNSAT)
        if peer in cells or endpoint in cells:
            return Normalized(UNSAT)

    pure: set = set()
    for fact in heap.pure:
        if isinstance(fact, Neq):
            left, right = uf.find(fact.left), uf.find(fact.right)
            if left == right:
                return Normalized(UNSAT)
            if isinstance(left, Const) and isinstance(right, Const):
                continue
            if term_key(right) < term_key(left):
                left, right = right, left
            pure.add(Neq(left, right))

    for fact in peer_facts:
        e, p = uf.find(fact.endpoint), uf.find(fact.peer)
        atom_e, atom_p = endpoint_atoms.get(e), endpoint_atoms.get(p)
        if (atom_e is not None and atom_e.peer == p) or (atom_p is not None and atom_p.peer == e):
            continue
        if term_key(p) < term_key(e):
            e, p = p, e
        pure.add(Peer(e, p))

    reps = uf.mapping(all_terms)
    for var, rep in reps.items():
        if var.name not in heap.existentials:
            pure.add(Eq(var, rep))

    spatial = tuple(sorted(atoms, key=_atom_key))
    result = SymbolicHeap(frozenset(), frozenset(pure), spatial)
    result = replace(result, existentials=heap.existentials & result.variables())
    return Normalized(result, reps)


def normalize(heap: Heap) -> Heap:
    """Normal form of a heap, or UNSAT."""
    return normalize_with_reps(heap).heap


def rep_map(heap: SymbolicHeap) -> Dict[Var, Term]:
    """Representatives recorded by the equalities of a normalized heap."""
    return {
        fact.left: fact.right
        for fact in heap.pure
        if isinstance(fact, Eq) and isinstance(fact.left, Var)
    }


def peer_map(heap: SymbolicHeap) -> Dict[Term, Term]:
    """Known peers of a normalized heap, in both directions."""
    peers: Dict[Term, Term] = {}
    for atom in heap.endpoints():
        peers[atom.addr] = atom.peer
        peers.setdefault(atom.peer, atom.addr)
    for fact in heap.pure:
        if isinstance(fact, Peer):
            peers.setdefault(fact.endpoint, fact.peer)
            peers.setdefault(fact.peer, fact.endpoint)
    return peers


def must_differ(heap: SymbolicHeap, left: Term, right: Term) -> bool:
    """
    True when a normalized heap implies `left != right`.

    Sources: distinct constants, explicit disequalities, nil against an
    allocated address, atoms that could not share an address (contents
    included), the rule that no endpoint is its own peer, and the rule that
    no cell sits at an endpoint or a peer.
    """
    if left == right:
        return False
    if isinstance(left, Const) and isinstance(right, Const):
        return True
    if Neq(left, right) in heap.pure or Neq(right, left) in heap.pure:
        return True
    atom_l, atom_r = heap.atom_at(left), heap.atom_at(right)
    if (atom_l is not None and right == NIL) or (atom_r is not None and left == NIL):
        return True
    if atom_l is not None and atom_r is not None:
        merged = _merge(atom_l, atom_r)
        if merged is None:
            return True
        _, equations = merged
        if any(isinstance(a, Const) and isinstance(b, Const) and a != b for a, b in equations):
            return True
    peers = peer_map(heap)
    if peers.get(left) == right or peers.get(right) == left:
        return True
    # a cell never sits where an endpoint or its peer lives
    if isinstance(atom_l, CellAtom) and right in peers:
        return True
    if isinstance(atom_r, CellAtom) and left in peers:
        return True
    return False
