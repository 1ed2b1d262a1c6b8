"""
Tests for the concrete interpreter and the bounded explorer.
"""

import pytest

from tools.explorer import explore
from tools.interpreter import (
    CLOSE_ERROR,
    CONTRACT_VIOLATION,
    DATA_RACE,
    DEADLOCK,
    FINISHED_CLEAN,
    FINISHED_LEAK,
    FIFO,
    GLOBAL_FRAME,
    INCONCLUSIVE,
    LOOKAHEAD,
    MEMORY_VIOLATION,
    ORPHAN_MESSAGE,
    TRUNCATED,
    UNSPECIFIED_RECEPTION,
    Endpoint,
    Message,
    initial_config,
    run,
    step,
)
from tools.reports import load_program

RACY = """
global c;
main() [emp] {
  c = new();
  par {
    [c |->[1/2] (_, _)] { c.0 = 1; }
    [c |->[1/2] (_, _)] { c.0 = 2; }
  }
  dispose(c);
} [emp]
"""

DOUBLE_FREE = """
global c;
main() [emp] {
  c = new();
  dispose(c);
  dispose(c);
} [emp]
"""

SPINNING = """
main() [emp] {
  while (*) [emp] { skip; }
} [emp]
"""

WRONG_CLOSE = """
contract C { states 1, 2; initial 1; final {2}; 1 -!m-> 2; }
message m [emp]
main() [emp] {
  local a, b, c, d;
  (a, b) = open(C);
  (c, d) = open(C);
  close(a, d);
} [emp]
"""

IN_ORDER = """
contract F { states 1, 2, 3; initial 1; final {3}; 1 -!m-> 2; 2 -!m-> 3; }
message m(v) [emp]
global e, f, first, second;
main() [emp] {
  (e, f) = open(F);
  send(m, e, 1);
  send(m, e, 2);
  first = receive(m, f);
  second = receive(m, f);
  close(e, f);
} [emp]
"""

TWO_CHANNELS = """
contract C { states 1, 2; initial 1; final {1, 2}; 1 -!m-> 2; }
message m [emp]
global a, b, c, d;
main() [emp] {
  (a, b) = open(C);
  (c, d) = open(C);
  close(a, b);
  close(c, d);
} [emp]
"""

OUT_OF_ORDER = """
contract R {
  states 1, 2, 3;
  initial 1;
  final {3};
  1 -!a-> 2;
  1 -!b-> 2;
  2 -!a-> 3;
  2 -!b-> 3;
}
message a(v) [emp]
message b(v) [emp]
global e, f, first, second;
main() [emp] {
  (e, f) = open(R);
  send(a, e, 1);
  send(b, e, 2);
  first = receive(b, f);
  second = receive(a, f);
  close(e, f);
} [emp]
"""

LOOP_FREE = [
    "p0.cmp",
    "p1.cmp",
    "p0_unblocked.cmp",
    "example_1_1.cmp",
    "example_2_2.cmp",
    "fig3_producers.cmp",
    "close_mismatch.cmp",
    "leaky_1_1.cmp",
    "invalid_sec3.cmp",
]


def drive(resolved, steps=None, reception=FIFO):
    """Step the single thread of a sequential program."""
    config = initial_config(resolved)
    taken = 0
    while config.threads and (steps is None or taken < steps):
        (tid,) = config.tids()
        ((config, _),) = step(resolved, config, tid, None, reception).successors
        taken += 1
    return config


def global_value(config, name):
    return dict(config.store)[(GLOBAL_FRAME, name)]


@pytest.mark.parametrize(
    "name,expected",
    [
        ("p0.cmp", {UNSPECIFIED_RECEPTION, DEADLOCK}),
        ("p1.cmp", {DEADLOCK}),
        ("p0_unblocked.cmp", {UNSPECIFIED_RECEPTION, FINISHED_CLEAN}),
        ("example_1_1.cmp", {FINISHED_CLEAN}),
        ("example_2_2.cmp", {FINISHED_CLEAN}),
        ("fig3_producers.cmp", {FINISHED_CLEAN}),
    ],
)
def test_explored_outcomes(load_corpus, name, expected):
    exploration = explore(load_corpus(name))

    assert exploration.kinds == expected
    assert not exploration.partial


def test_every_outcome_has_a_witness_trace(load_corpus):
    exploration = explore(load_corpus("p0.cmp"))

    for outcome in exploration.outcomes.values():
        assert outcome.trace
        assert all(line.startswith("t") for line in outcome.trace)
    assert exploration.outcomes[DEADLOCK].blocked


@pytest.mark.parametrize(
    "name,kind",
    [
        ("leaky_1_1.cmp", FINISHED_LEAK),
        ("close_mismatch.cmp", ORPHAN_MESSAGE),
        ("invalid_sec3.cmp", CONTRACT_VIOLATION),
        ("p0.cmp", UNSPECIFIED_RECEPTION),
        ("p1.cmp", DEADLOCK),
        ("example_1_1.cmp", FINISHED_CLEAN),
    ],
)
def test_seeded_run_outcome(load_corpus, name, kind):
    resolved = load_corpus(name)
    for seed in range(5):
        assert run(resolved, seed).outcome.kind == kind


def test_leak_reports_remaining_addresses(load_corpus):
    result = run(load_corpus("leaky_1_1.cmp"), seed=3)

    assert result.outcome.remaining
    assert result.outcome.is_error


def test_same_seed_same_trace(load_corpus):
    resolved = load_corpus("fig3_producers.cmp")

    first = run(resolved, seed=7)
    second = run(resolved, seed=7)

    assert first.trace == second.trace
    assert first.steps == second.steps
    assert first.outcome.kind == FINISHED_CLEAN


def test_step_limit_is_inconclusive(load_corpus):
    result = run(load_corpus("example_1_1.cmp"), seed=0, max_steps=1)

    assert result.outcome.kind == INCONCLUSIVE
    assert not result.outcome.is_error


def test_data_race():
    resolved = load_program(RACY)

    assert run(resolved, seed=0).outcome.kind == DATA_RACE
    assert DATA_RACE in explore(resolved).kinds


def test_double_dispose_is_a_memory_violation():
    outcome = run(load_program(DOUBLE_FREE)).outcome

    assert outcome.kind == MEMORY_VIOLATION
    assert outcome.location is not None
    assert outcome.location.line == 6


def test_closing_non_peers():
    assert run(load_program(WRONG_CLOSE)).outcome.kind == CLOSE_ERROR


def test_loops_are_cut_off_at_the_bound():
    exploration = explore(load_program(SPINNING), loop_bound=3)

    assert exploration.kinds == {FINISHED_CLEAN, TRUNCATED}


def test_state_budget_gives_partial_result(load_corpus):
    exploration = explore(load_corpus("fig3_producers.cmp"), state_budget=3)

    assert exploration.partial


def test_initial_configuration(load_corpus):
    config = initial_config(load_corpus("example_1_1.cmp"))

    assert config.tids() == (0,)
    assert not config.heap


@pytest.mark.parametrize("name", LOOP_FREE)
def test_run_outcomes_are_explored(load_corpus, name):
    resolved = load_corpus(name)
    kinds = explore(resolved).kinds

    for seed in range(10):
        assert run(resolved, seed).outcome.kind in kinds


def test_messages_queue_in_send_order():
    resolved = load_program(IN_ORDER)

    config = drive(resolved, steps=3)

    queue = config.heap_dict()[global_value(config, "f")].queue
    assert queue == (Message("m", (1,)), Message("m", (2,)))


def test_messages_are_received_in_send_order():
    config = drive(load_program(IN_ORDER))

    assert global_value(config, "first") == 1
    assert global_value(config, "second") == 2
    assert not config.heap


def test_each_open_yields_fresh_endpoints():
    resolved = load_program(TWO_CHANNELS)

    config = drive(resolved, steps=2)

    ends = [global_value(config, name) for name in "abcd"]
    assert len(set(ends)) == 4
    heap = config.heap_dict()
    assert all(isinstance(heap[addr], Endpoint) for addr in ends)
    assert heap[ends[0]].peer == ends[1] and heap[ends[1]].peer == ends[0]
    assert heap[ends[2]].peer == ends[3] and heap[ends[3]].peer == ends[2]
    assert run(resolved).outcome.kind == FINISHED_CLEAN


@pytest.mark.parametrize(
    "name,expected",
    [
        ("p0.cmp", {DEADLOCK}),
        ("p0_unblocked.cmp", {FINISHED_CLEAN}),
        ("p1.cmp", {DEADLOCK}),
    ],
)
def test_lookahead_switch_waits_for_a_listed_message(load_corpus, name, expected):
    exploration = explore(load_corpus(name), reception=LOOKAHEAD)

    assert exploration.kinds == expected
    assert not exploration.partial


def test_lookahead_receive_skips_earlier_messages():
    config = drive(load_program(OUT_OF_ORDER), reception=LOOKAHEAD)

    assert global_value(config, "first") == 2
    assert global_value(config, "second") == 1
    assert not config.heap


def test_fifo_receive_waits_behind_the_head():
    resolved = load_program(OUT_OF_ORDER)

    assert run(resolved).outcome.kind == DEADLOCK
    assert run(resolved, reception=LOOKAHEAD).outcome.kind == FINISHED_CLEAN
