"""
Tests for symbolic heaps: normalization, subtraction, entailment, predicate
expansion and footprint precision.
"""

import random
from fractions import Fraction

import pytest

from logic.entailment import entails, subtract
from logic.heap import (
    EMP,
    NIL,
    CellAtom,
    Const,
    EndpointAtom,
    Eq,
    Neq,
    Peer,
    SymbolicHeap,
    Var,
    is_unsat,
    normalize,
)
from logic.models import models, oracle_entails
from logic.predicates import check_precise, expand
from utils.error_handling import BudgetExceeded

HALF = Fraction(1, 2)
x, y, a, b, e, f = (Var(n) for n in "xyabef")


def heap(*atoms, pure=(), exists=()) -> SymbolicHeap:
    return SymbolicHeap(frozenset(exists), frozenset(pure), tuple(atoms))


def cell(addr, f0=Const(0), f1=Const(0), perm=Fraction(1)) -> CellAtom:
    return CellAtom(addr, perm, f0, f1)


def endpoint(addr, state="1", peer=None, contract="C", perm=Fraction(1)) -> EndpointAtom:
    return EndpointAtom(addr, perm, contract, state, peer if peer is not None else Var("p"))


# ---- normalization -------------------------------------------------------------


def test_fractions_at_one_address_merge():
    result = normalize(heap(cell(x, a, b, HALF), cell(x, Const(1), Const(2), HALF)))

    assert not is_unsat(result)
    assert result.spatial == (cell(x, Const(1), Const(2)),)


def test_permission_above_one_is_unsat():
    assert is_unsat(normalize(heap(cell(x), cell(x, perm=HALF))))


def test_cell_at_nil_is_unsat():
    assert is_unsat(normalize(heap(cell(NIL))))


def test_aliased_cells_are_unsat():
    assert is_unsat(normalize(heap(cell(x), cell(y), pure=[Eq(x, y)])))


def test_disequality_of_equal_terms_is_unsat():
    assert is_unsat(normalize(heap(pure=[Eq(x, y), Neq(x, y)])))


def test_distinct_constants_are_unsat():
    assert is_unsat(normalize(heap(pure=[Eq(x, Const(1)), Eq(x, Const(2))])))


def test_endpoint_cannot_be_its_own_peer():
    assert is_unsat(normalize(heap(endpoint(e, peer=e))))


def test_endpoint_and_cell_cannot_share_an_address():
    assert is_unsat(normalize(heap(cell(e), endpoint(e, peer=f))))


def test_peer_fact_identifies_peers():
    result = normalize(heap(endpoint(e, peer=a, perm=HALF), pure=[Peer(e, f)], exists=["a"]))

    assert result.spatial == (endpoint(e, peer=f, perm=HALF),)


def test_mismatched_endpoint_states_are_unsat():
    assert is_unsat(
        normalize(heap(endpoint(e, "1", f, perm=HALF), endpoint(e, "2", f, perm=HALF)))
    )


# ---- subtraction ---------------------------------------------------------------


def test_subtract_instantiates_existentials():
    owned = heap(cell(x, Const(1), Const(2)))
    demand = heap(cell(x, a, Const(2)), exists=["a"])

    match = subtract(owned, demand)

    assert match is not None
    assert match.theta == {"a": Const(1)}
    assert not match.frame.spatial


def test_subtract_conserves_permissions():
    owned = heap(cell(x, Const(1), Const(2)), endpoint(e, peer=f))
    for taken in (Fraction(1, 4), HALF, Fraction(3, 4)):
        match = subtract(owned, heap(cell(x, Const(1), Const(2), taken)))

        assert match is not None
        left = [atom for atom in match.frame.spatial if atom.addr == x]
        assert [atom.perm for atom in left] == [1 - taken]
        assert sum(perm for _, perm in match.consumed) == taken
        assert endpoint(e, peer=f) in match.frame.spatial


def test_subtract_missing_atom():
    assert subtract(heap(cell(x)), heap(cell(y))) is None


def test_subtract_too_much_permission():
    assert subtract(heap(cell(x, perm=HALF)), heap(cell(x))) is None


def test_subtract_budget():
    owned = heap(*(cell(Var(f"c{i}")) for i in range(8)))
    demand = heap(*(cell(Var(f"d{i}")) for i in range(9)), exists=[f"d{i}" for i in range(9)])

    with pytest.raises(BudgetExceeded):
        subtract(owned, demand, budget=5)


# ---- entailment ----------------------------------------------------------------


@pytest.mark.parametrize(
    "left,right",
    [
        (heap(cell(x, Const(1), Const(2))), heap(cell(x, a, Const(2)), exists=["a"])),
        (heap(cell(x, a, b, HALF), cell(x, a, b, HALF)), heap(cell(x, a, b))),
        (heap(cell(x), cell(y)), heap(cell(y), cell(x))),
        (heap(cell(x), cell(y)), heap(cell(x), cell(y), pure=[Neq(x, y)])),
        (heap(cell(x, y), pure=[Eq(y, Const(1))]), heap(cell(x, Const(1)))),
        (EMP, EMP),
    ],
)
def test_entailment_holds(left, right):
    assert entails(left, right)
    assert oracle_entails(left, right)


@pytest.mark.parametrize(
    "left,right",
    [
        (heap(cell(x)), heap(cell(x, perm=HALF))),
        (heap(cell(x)), EMP),
        (EMP, heap(cell(x))),
        (heap(cell(x, Const(1))), heap(cell(x, Const(2)))),
        (heap(cell(x), cell(y)), heap(cell(x), pure=[Eq(x, y)])),
    ],
)
def test_entailment_fails(left, right):
    assert not entails(left, right)
    assert not oracle_entails(left, right)


def test_endpoint_entailment_abstracts_peer():
    owned = heap(endpoint(e, "2", f))
    assert entails(owned, heap(endpoint(e, "2", a), exists=["a"]))
    assert not entails(owned, heap(endpoint(e, "1", a), exists=["a"]))


RANDOM_PAIRS = 10_000
PERMS = (Fraction(1, 4), HALF, Fraction(3, 4), Fraction(1))
NAMES = (x, y, e, f)


def _random_atom(rng: random.Random, existential: bool):
    values = [x, y, Const(1), Const(2)] + ([a] if existential else [])
    perm = rng.choice(PERMS)
    if rng.random() < 0.5:
        return cell(rng.choice([x, y]), rng.choice(values), rng.choice(values), perm)
    peers = [e, f] + ([a] if existential else [])
    return endpoint(rng.choice([e, f]), rng.choice("12"), rng.choice(peers), perm=perm)


def _random_fact(rng: random.Random):
    kind = rng.choice([Eq, Neq, Peer])
    if kind is Peer:
        return Peer(e, f)
    left, right = rng.sample(NAMES, 2)
    return kind(left, right)


def _random_heap(rng: random.Random, existential: bool) -> SymbolicHeap:
    atoms = [_random_atom(rng, existential) for _ in range(rng.randint(0, 3))]
    pure = [_random_fact(rng) for _ in range(rng.choice([0, 0, 1, 2]))]
    return heap(*atoms, pure=pure, exists=["a"] if existential else [])


@pytest.mark.slow
def test_entailment_agrees_with_models():
    rng = random.Random(7)
    unsound, incomplete = [], []
    for _ in range(RANDOM_PAIRS):
        left = _random_heap(rng, existential=False)
        right = _random_heap(rng, existential=True)
        proved, holds = entails(left, right), oracle_entails(left, right)
        if proved and not holds:
            unsound.append(f"{left} |- {right}")
        elif holds and not proved:
            incomplete.append(f"{left} |- {right}")

    assert unsound == []
    assert incomplete == []


def test_normalize_is_idempotent():
    rng = random.Random(11)
    for _ in range(2_000):
        original = _random_heap(rng, existential=rng.random() < 0.5)
        once = normalize(original)

        assert normalize(once) == once, str(original)


def _with_neq(h: SymbolicHeap, left, right) -> SymbolicHeap:
    return heap(*h.spatial, pure=set(h.pure) | {Neq(left, right)})


def test_disequality_from_conflicting_contents():
    left = heap(cell(x, Const(1), Const(1), HALF), cell(y, Const(2), Const(1), HALF))

    assert entails(left, _with_neq(left, x, y))
    assert oracle_entails(left, _with_neq(left, x, y))


def test_disequality_between_cell_and_peer():
    left = heap(cell(x), endpoint(e, peer=f, perm=HALF))

    assert entails(left, _with_neq(left, x, f))
    assert oracle_entails(left, _with_neq(left, x, f))


def test_models_of_a_half_cell():
    found = models(heap(cell(x, Const(1), Const(2), HALF)))

    assert found
    for model in found:
        (addr, obj), = model.heap
        assert dict(model.stack)["x"] == addr
        assert obj.perm == HALF


# ---- predicates and precision ----------------------------------------------------


def test_expand_fractional_predicate(load_corpus):
    resolved = load_corpus("lock_4_1.cmp")
    acquire = resolved.functions["acquire"]

    expanded = expand(resolved.predicates, acquire.pre)

    (atom,) = expanded.spatial
    assert isinstance(atom, CellAtom)
    assert atom.addr == Var("lk")
    assert atom.perm == Fraction(1, 4)


def test_expand_merges_to_three_quarters(load_corpus):
    resolved = load_corpus("lock_4_1.cmp")
    release = resolved.functions["release"]

    expanded = normalize(expand(resolved.predicates, release.pre))

    lock_cells = [atom for atom in expanded.cells() if atom.addr == Var("lk")]
    assert [atom.perm for atom in lock_cells] == [Fraction(3, 4)]
    assert len(expanded.endpoints()) == 2
    assert any(atom.addr == Var("d") for atom in expanded.cells())


def test_expand_binds_names(load_corpus):
    resolved = load_corpus("lock_4_1.cmp")
    pre = resolved.functions["acquire"].pre

    expanded = expand(resolved.predicates, pre, {"lk": Const(7)})

    assert expanded.spatial[0].addr == Const(7)


def test_precise_footprints():
    src = Var("src")
    assert check_precise(heap(cell(x)))
    assert check_precise(heap(endpoint(a, peer=src), exists=["a"]))
    assert check_precise(heap(cell(x, b), cell(b), exists=["b"]))
    assert check_precise(EMP)


def test_imprecise_footprint():
    assert not check_precise(heap(cell(a), exists=["a"]))
