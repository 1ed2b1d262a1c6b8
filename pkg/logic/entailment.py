"""
Footprint subtraction (frame inference) and entailment between symbolic heaps.

Matching is a backtracking search over which atom of the left heap covers each
atom of the right heap, trying the right-hand atom with the fewest candidates
first. A covering atom may keep a permission residue that stays available to
later matches.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple

from logic.heap import (
    UNSAT,
    Atom,
    EndpointAtom,
    Eq,
    Heap,
    NameSupply,
    Neq,
    Peer,
    SymbolicHeap,
    Term,
    Var,
    _atom_key,
    is_unsat,
    must_differ,
    normalize,
    normalize_with_reps,
    peer_map,
    rep_map,
    substitute,
)
from utils.error_handling import BudgetExceeded

logger = logging.getLogger(__name__)

DEFAULT_SEARCH_BUDGET = 10_000


@dataclass(frozen=True)
class Match:
    """
    One way of carving the right heap out of the left one.

    Attributes:
        frame: What remains of the left heap
        theta: Instantiation of the right heap's existentials
        consumed: (left atom as it was before the split, permission taken)
    """

    frame: Heap
    theta: Dict[str, Term] = field(default_factory=dict)
    consumed: Tuple[Tuple[Atom, Fraction], ...] = ()


class _Search:
    def __init__(self, left: SymbolicHeap, right: SymbolicHeap, budget: int):
        self.left = left
        self.budget = budget
        self.steps = 0
        self.left_reps = rep_map(left)
        self.left_peers = peer_map(left)

        # Keep the right heap's existentials apart from the left heap's names
        taken = left.variables() | right.free_variables()
        supply = NameSupply("_g")
        self.renamed: Dict[str, str] = {}
        for name in sorted(right.existentials):
            new = name
            while new in taken:
                new = supply.fresh(name).name
            self.renamed[name] = new
        renaming = {Var(old): Var(new) for old, new in self.renamed.items() if old != new}
        right = substitute(right, renaming)
        right = replace(right, existentials=frozenset(self.renamed.values()))
        self.right = normalize_with_reps(right)

    # ---- term resolution ---------------------------------------------------

    def _is_existential(self, term: Term) -> bool:
        heap = self.right.heap
        return isinstance(term, Var) and term.name in heap.existentials

    def resolve(self, term: Term, theta: Dict[str, Term]) -> Optional[Term]:
        if self._is_existential(term):
            return theta.get(term.name)
        if isinstance(term, Var):
            return self.left_reps.get(term, term)
        return term

    def _bind(self, want: Term, have: Term, theta: Dict[str, Term]) -> Optional[Dict[str, Term]]:
        resolved = self.resolve(want, theta)
        if resolved is None:
            bound = dict(theta)
            bound[want.name] = have
            return bound
        return theta if resolved == have else None

    def unify(self, want: Atom, have: Atom, theta: Dict[str, Term]) -> Optional[Dict[str, Term]]:
        if type(want) is not type(have) or want.perm > have.perm:
            return None
        if isinstance(want, EndpointAtom):
            if want.contract != have.contract or want.state != have.state:
                return None
        current: Optional[Dict[str, Term]] = theta
        for w, h in zip(want.terms(), have.terms()):
            current = self._bind(w, h, current)
            if current is None:
                return None
        return current

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise BudgetExceeded(f"entailment search exceeded {self.budget} steps")

    # ---- spatial matching --------------------------------------------------

    def atoms(
        self,
        remaining: List[Atom],
        available: List[Atom],
        theta: Dict[str, Term],
        consumed: Tuple[Tuple[Atom, Fraction], ...],
    ) -> Iterator[Tuple[List[Atom], Dict[str, Term], Tuple[Tuple[Atom, Fraction], ...]]]:
        if not remaining:
            yield available, theta, consumed
            return

        best_index, best = -1, None
        for index, want in enumerate(remaining):
            candidates = [
                j for j, have in enumerate(available) if self.unify(want, have, theta) is not None
            ]
            if not candidates:
                return
            if best is None or len(candidates) < len(best):
                best_index, best = index, candidates

        want = remaining[best_index]
        rest = remaining[:best_index] + remaining[best_index + 1 :]
        for j in best:
            self._tick()
            have = available[j]
            bound = self.unify(want, have, theta)
            residue = have.perm - want.perm
            left_over = [replace(have, perm=residue)] if residue > 0 else []
            next_available = available[:j] + left_over + available[j + 1 :]
            yield from self.atoms(rest, next_available, bound, consumed + ((have, want.perm),))

    # ---- pure obligations --------------------------------------------------

    def pure(self, theta: Dict[str, Term]) -> Optional[Dict[str, Term]]:
        facts = list(self.right.heap.pure)
        theta = dict(theta)

        changed = True
        while changed:
            changed = False
            for fact in facts:
                a, b = self.resolve(fact.terms()[0], theta), self.resolve(fact.terms()[1], theta)
                if isinstance(fact, Eq):
                    if a is None and b is not None:
                        theta[fact.left.name] = b
                        changed = True
                    elif b is None and a is not None:
                        theta[fact.right.name] = a
                        changed = True
                elif isinstance(fact, Peer):
                    if a is None and b is not None and b in self.left_peers:
                        theta[fact.endpoint.name] = self.left_peers[b]
                        changed = True
                    elif b is None and a is not None and a in self.left_peers:
                        theta[fact.peer.name] = self.left_peers[a]
                        changed = True

        for fact in facts:
            a, b = self.resolve(fact.terms()[0], theta), self.resolve(fact.terms()[1], theta)
            if isinstance(fact, Eq):
                if a is None or b is None or a != b:
                    return None
            elif isinstance(fact, Neq):
                if a is None or b is None:
                    continue
                if not must_differ(self.left, a, b):
                    return None
            elif isinstance(fact, Peer):
                if a is None or b is None:
                    return None
                if self.left_peers.get(a) != b and self.left_peers.get(b) != a:
                    return None
        return theta

    # ---- driver ------------------------------------------------------------

    def matches(self) -> Iterator[Match]:
        right = self.right.heap
        if is_unsat(right):
            return
        for available, theta, consumed in self.atoms(
            list(right.spatial), list(self.left.spatial), {}, ()
        ):
            final = self.pure(theta)
            if final is None:
                continue
            frame_atoms = tuple(sorted(available, key=_atom_key))
            frame = SymbolicHeap(frozenset(), self.left.pure, frame_atoms)
            frame = replace(frame, existentials=self.left.existentials & frame.variables())
            yield Match(frame, self._original_theta(final), consumed)

    def _original_theta(self, theta: Dict[str, Term]) -> Dict[str, Term]:
        out: Dict[str, Term] = {}
        for original, renamed in self.renamed.items():
            term = self.right.rep(Var(renamed))
            value = self.resolve(term, theta)
            if value is not None:
                out[original] = value
        return out


def matches(left: Heap, right: Heap, budget: int = DEFAULT_SEARCH_BUDGET) -> Iterator[Match]:
    """
    Enumerate every way of subtracting `right` from `left`.

    Args:
        left: The heap owned
        right: The heap demanded; its existentials are instantiated by matching
        budget: Maximum number of atom-matching steps

    Raises:
        BudgetExceeded: When the search runs out of steps
    """
    left = normalize(left)
    if is_unsat(left):
        yield Match(UNSAT)
        return
    if is_unsat(right):
        return
    yield from _Search(left, right, budget).matches()


def subtract(left: Heap, right: Heap, budget: int = DEFAULT_SEARCH_BUDGET) -> Optional[Match]:
    """
    Carve `right` out of `left`.

    Returns:
        The first match found, or None when `left` does not contain `right`
    """
    for match in matches(left, right, budget):
        logger.debug(f"subtract: {right} from {left} leaves {match.frame}")
        return match
    return None


def entails(left: Heap, right: Heap, budget: int = DEFAULT_SEARCH_BUDGET) -> bool:
    """True when `right` matches all of `left`'s spatial part."""
    for match in matches(left, right, budget):
        if is_unsat(match.frame) or not match.frame.spatial:
            return True
    return False
