"""
Concrete interpreter.

Executes programs over a real heap whose endpoints carry FIFO queues and a
runtime contract state. Reception normally takes the head of a queue; in
look-ahead mode it may take a matching message from deeper in the queue. Configurations are immutable and hashable so the
explorer can enumerate interleavings with a visited set; `run` follows one
seeded schedule.
"""

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from lang import ast
from lang.render import summarize
from lang.resolver import ResolvedProgram, entry_function
from tools.contracts import Direction, successor
from utils.error_handling import SourceLocation

logger = logging.getLogger(__name__)

GLOBAL_FRAME = -1
HAVOC_VALUES = (0, 1)

# Reception modes: FIFO only ever takes the head of a queue; LOOKAHEAD takes the
# first message with a wanted tag anywhere in the queue and never faults.
FIFO = "fifo"
LOOKAHEAD = "lookahead"
RECEPTION_MODES = (FIFO, LOOKAHEAD)

# Outcome kinds
FINISHED_CLEAN = "FinishedClean"
FINISHED_LEAK = "FinishedLeak"
DEADLOCK = "Deadlock"
TRUNCATED = "Truncated"
INCONCLUSIVE = "Inconclusive"
MEMORY_VIOLATION = "MemoryViolation"
DATA_RACE = "DataRace"
ORPHAN_MESSAGE = "OrphanMessageAtClose"
UNSPECIFIED_RECEPTION = "UnspecifiedReception"
CONTRACT_VIOLATION = "ContractRuntimeViolation"
CLOSE_ERROR = "CloseError"

ERROR_KINDS = frozenset(
    {
        MEMORY_VIOLATION,
        DATA_RACE,
        ORPHAN_MESSAGE,
        UNSPECIFIED_RECEPTION,
        CONTRACT_VIOLATION,
        CLOSE_ERROR,
        FINISHED_LEAK,
    }
)


# ---- runtime objects ---------------------------------------------------------


@dataclass(frozen=True)
class Message:
    tag: str
    values: Tuple[int, ...] = ()

    def __str__(self) -> str:
        return f"{self.tag}({', '.join(map(str, self.values))})"


@dataclass(frozen=True)
class Cell:
    v0: int = 0
    v1: int = 0


@dataclass(frozen=True)
class Endpoint:
    peer: int
    contract: str
    state: str
    queue: Tuple[Message, ...] = ()


HeapObject = Union[Cell, Endpoint]
VarKey = Tuple[int, str]
Scope = Tuple[int, ...]


# ---- continuation items ------------------------------------------------------


@dataclass(frozen=True)
class Exec:
    command: ast.Command
    scope: Scope


@dataclass(frozen=True)
class LoopAt:
    command: ast.While
    scope: Scope
    iteration: int = 0


@dataclass(frozen=True)
class Join:
    children: Tuple[int, ...]
    loc: SourceLocation


@dataclass(frozen=True)
class Unlocal:
    frame: int
    saved: Tuple[Tuple[str, Optional[int]], ...]


@dataclass(frozen=True)
class ReturnTo:
    frame: int
    result: Optional[str] = None
    caller: Optional[Scope] = None


@dataclass(frozen=True)
class Drop:
    frame: int


Item = Union[Exec, LoopAt, Join, Unlocal, ReturnTo, Drop]


@dataclass(frozen=True)
class Thread:
    tid: int
    stack: Tuple[Item, ...]

    def top(self) -> Optional[Item]:
        return self.stack[0] if self.stack else None


@dataclass(frozen=True)
class RuntimeConfig:
    heap: Tuple[Tuple[int, HeapObject], ...] = ()
    store: Tuple[Tuple[VarKey, int], ...] = ()
    threads: Tuple[Thread, ...] = ()
    next_addr: int = 1
    next_frame: int = 1
    next_tid: int = 1

    def heap_dict(self) -> Dict[int, HeapObject]:
        return dict(self.heap)

    def thread(self, tid: int) -> Optional[Thread]:
        for thread in self.threads:
            if thread.tid == tid:
                return thread
        return None

    def tids(self) -> Tuple[int, ...]:
        return tuple(t.tid for t in self.threads)


@dataclass(frozen=True)
class Fault:
    kind: str
    tid: int
    message: str
    location: Optional[SourceLocation] = None


@dataclass
class StepResult:
    """
    What one thread can do next.

    Attributes:
        successors: (configuration, trace label) pairs, one per nondeterministic choice
        faults: Errors the step runs into
        blocked: The thread waits on a reception or a join
        truncated: A loop iteration past the unrolling bound was cut off
    """

    successors: List[Tuple[RuntimeConfig, str]] = field(default_factory=list)
    faults: List[Fault] = field(default_factory=list)
    blocked: bool = False
    truncated: bool = False


@dataclass
class Outcome:
    kind: str
    message: str = ""
    thread: Optional[int] = None
    location: Optional[SourceLocation] = None
    remaining: Tuple[int, ...] = ()
    blocked: Tuple[int, ...] = ()
    trace: List[str] = field(default_factory=list)

    @property
    def is_error(self) -> bool:
        return self.kind in ERROR_KINDS

    def to_dict(self) -> Dict:
        out = {"kind": self.kind, "message": self.message, "trace": list(self.trace)}
        if self.thread is not None:
            out["thread"] = f"t{self.thread}"
        if self.location is not None:
            out["location"] = self.location.to_dict()
        if self.remaining:
            out["remaining"] = list(self.remaining)
        if self.blocked:
            out["blocked"] = [f"t{t}" for t in self.blocked]
        return out


class _Fault(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


class _Blocked(Exception):
    pass


# ---- mutable working copy ------------------------------------------------------


class _World:
    """A mutable copy of a configuration, frozen again once a step is done."""

    def __init__(self, resolved: ResolvedProgram, config: RuntimeConfig):
        self.resolved = resolved
        self.heap: Dict[int, HeapObject] = dict(config.heap)
        self.store: Dict[VarKey, int] = dict(config.store)
        self.threads: Dict[int, Tuple[Item, ...]] = {t.tid: t.stack for t in config.threads}
        self.next_addr = config.next_addr
        self.next_frame = config.next_frame
        self.next_tid = config.next_tid

    def freeze(self) -> RuntimeConfig:
        return RuntimeConfig(
            heap=tuple(sorted(self.heap.items())),
            store=tuple(sorted(self.store.items())),
            threads=tuple(Thread(tid, stack) for tid, stack in sorted(self.threads.items())),
            next_addr=self.next_addr,
            next_frame=self.next_frame,
            next_tid=self.next_tid,
        )

    # variables

    def locate(self, scope: Scope, name: str) -> VarKey:
        for frame in scope:
            if (frame, name) in self.store:
                return (frame, name)
        return (GLOBAL_FRAME, name)

    def read(self, scope: Scope, name: str) -> int:
        return self.store.get(self.locate(scope, name), 0)

    def write(self, scope: Scope, name: str, value: int) -> None:
        self.store[self.locate(scope, name)] = value

    def eval(self, expr: ast.Expr, scope: Scope) -> int:
        if isinstance(expr, ast.IntLit):
            return expr.value
        if isinstance(expr, ast.VarRef):
            return self.read(scope, expr.name)
        left, right = self.eval(expr.left, scope), self.eval(expr.right, scope)
        return left + right if expr.op == "+" else left - right

    def test(self, cond: ast.Condition, scope: Scope) -> Tuple[bool, ...]:
        """Possible truth values of a condition."""
        if isinstance(cond, (ast.Nondet, ast.Opaque)):
            return (True, False)
        if isinstance(cond, ast.Not):
            return tuple(not value for value in self.test(cond.cond, scope))
        left, right = self.eval(cond.left, scope), self.eval(cond.right, scope)
        return (_COMPARE[cond.op](left, right),)

    # frames and threads

    def new_frame(self, params: Iterable[str] = (), values: Iterable[int] = ()) -> int:
        frame = self.next_frame
        self.next_frame += 1
        for name, value in zip(params, values):
            self.store[(frame, name)] = value
        return frame

    def drop_frame(self, frame: int) -> None:
        for key in [k for k in self.store if k[0] == frame]:
            del self.store[key]

    def fork(self, stack: Tuple[Item, ...]) -> int:
        tid = self.next_tid
        self.next_tid += 1
        self.threads[tid] = stack
        return tid

    # heap

    def alloc(self, obj: HeapObject) -> int:
        addr = self.next_addr
        self.next_addr += 1
        self.heap[addr] = obj
        return addr

    def cell(self, addr: int, what: str) -> Cell:
        obj = self.heap.get(addr)
        if not isinstance(obj, Cell):
            state = "dangling" if obj is None else "an endpoint"
            raise _Fault(MEMORY_VIOLATION, f"{what}: address {addr} is {state}, not a cell")
        return obj

    def endpoint(self, addr: int, what: str) -> Endpoint:
        obj = self.heap.get(addr)
        if not isinstance(obj, Endpoint):
            state = "dangling" if obj is None else "a cell"
            raise _Fault(MEMORY_VIOLATION, f"{what}: address {addr} is {state}, not an endpoint")
        return obj

    def contract_step(self, addr: int, direction: Direction, tag: str) -> Endpoint:
        obj = self.endpoint(addr, f"{direction.value}{tag}")
        target = successor(self.resolved.contract(obj.contract), obj.state, direction, tag)
        if target is None:
            raise _Fault(
                CONTRACT_VIOLATION,
                f"{obj.contract} has no transition {obj.state} -{direction.value}{tag}->",
            )
        return replace(obj, state=target)


_COMPARE = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


# ---- silent bookkeeping ----------------------------------------------------------


def _settle_thread(world: _World, tid: int) -> None:
    """Process structural items until the thread faces an observable action."""
    while tid in world.threads:
        stack = world.threads[tid]
        if not stack:
            del world.threads[tid]
            return
        item, rest = stack[0], stack[1:]
        if isinstance(item, Exec):
            command = item.command
            if isinstance(command, ast.Seq):
                world.threads[tid] = tuple(Exec(c, item.scope) for c in command.commands) + rest
            elif isinstance(command, ast.Skip):
                world.threads[tid] = rest
            elif isinstance(command, ast.Local):
                frame = item.scope[0]
                saved = tuple((n, world.store.get((frame, n))) for n in command.names)
                for name in command.names:
                    world.store[(frame, name)] = 0
                world.threads[tid] = (Exec(command.body, item.scope), Unlocal(frame, saved)) + rest
            else:
                return
        elif isinstance(item, Unlocal):
            for name, value in item.saved:
                if value is None:
                    world.store.pop((item.frame, name), None)
                else:
                    world.store[(item.frame, name)] = value
            world.threads[tid] = rest
        elif isinstance(item, ReturnTo):
            if item.result is not None and item.caller is not None:
                world.write(item.caller, item.result, 0)
            world.drop_frame(item.frame)
            world.threads[tid] = rest
        elif isinstance(item, Drop):
            world.drop_frame(item.frame)
            world.threads[tid] = rest
        elif isinstance(item, Join):
            if any(child in world.threads for child in item.children):
                return
            world.threads[tid] = rest
        else:
            return


def settle(resolved: ResolvedProgram, config: RuntimeConfig) -> RuntimeConfig:
    world = _World(resolved, config)
    # A thread finishing may release a parent's join, so repeat until stable.
    while True:
        before = world.freeze()
        for tid in sorted(world.threads):
            _settle_thread(world, tid)
        if world.freeze() == before:
            return before


def initial_config(resolved: ResolvedProgram) -> RuntimeConfig:
    """Globals at 0, empty heap, one thread running the entry function."""
    main = entry_function(resolved)
    world = _World(resolved, RuntimeConfig())
    for name in resolved.globals:
        world.store[(GLOBAL_FRAME, name)] = 0
    frame = world.new_frame(main.params, [0] * len(main.params))
    world.threads[0] = (Exec(main.body, (frame,)), ReturnTo(frame))
    return settle(resolved, world.freeze())


# ---- one step ----------------------------------------------------------------------


def label(tid: int, command: ast.Command) -> str:
    loc = getattr(command, "loc", None)
    return f"t{tid}: {summarize(command)} @ {loc}"


def step(
    resolved: ResolvedProgram,
    config: RuntimeConfig,
    tid: int,
    loop_bound: Optional[int] = None,
    reception: str = FIFO,
) -> StepResult:
    """
    Every way thread `tid` can take its next action.

    Args:
        resolved: The program
        config: A settled configuration
        tid: Thread to step
        loop_bound: Iterations after which loops are cut off (None for no bound)
        reception: FIFO or LOOKAHEAD

    Returns:
        StepResult with successors, faults and the blocked/truncated flags
    """
    thread = config.thread(tid)
    result = StepResult()
    if thread is None or not thread.stack:
        return result
    item = thread.top()
    if isinstance(item, Join):
        result.blocked = True
        return result

    command = item.command
    text = label(tid, command)

    try:
        for world in _execute(resolved, config, tid, item, loop_bound, result, reception):
            result.successors.append((settle(resolved, world.freeze()), text))
    except _Fault as fault:
        result.successors = []
        result.faults.append(Fault(fault.kind, tid, fault.message, command.loc))
    except _Blocked:
        result.successors = []
        result.blocked = True
    return result


def _branch(resolved, config, tid) -> Tuple[_World, Tuple[Item, ...]]:
    world = _World(resolved, config)
    return world, world.threads[tid][1:]


def _execute(
    resolved: ResolvedProgram,
    config: RuntimeConfig,
    tid: int,
    item: Union[Exec, LoopAt],
    loop_bound: Optional[int],
    result: StepResult,
    reception: str = FIFO,
) -> Iterable[_World]:
    c = item.command
    scope = item.scope
    world, rest = _branch(resolved, config, tid)

    if isinstance(item, LoopAt):
        for value in world.test(c.cond, scope):
            w, rest = _branch(resolved, config, tid)
            if not value:
                w.threads[tid] = rest
                yield w
            elif loop_bound is not None and item.iteration >= loop_bound:
                result.truncated = True
            else:
                again = LoopAt(c, scope, item.iteration + 1)
                w.threads[tid] = (Exec(c.body, scope), again) + rest
                yield w
        return

    if isinstance(c, ast.While):
        world.threads[tid] = (LoopAt(c, scope),) + rest
        yield world
    elif isinstance(c, ast.If):
        for value in world.test(c.cond, scope):
            w, rest = _branch(resolved, config, tid)
            w.threads[tid] = (Exec(c.then if value else c.orelse, scope),) + rest
            yield w
    elif isinstance(c, ast.Assign):
        world.write(scope, c.var, world.eval(c.expr, scope))
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.New):
        world.write(scope, c.var, world.alloc(Cell()))
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Dispose):
        addr = world.read(scope, c.var)
        world.cell(addr, f"dispose({c.var})")
        del world.heap[addr]
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.FieldRead):
        cell = world.cell(world.read(scope, c.source), f"{c.source}.{c.field}")
        world.write(scope, c.var, cell.v0 if c.field == 0 else cell.v1)
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.FieldWrite):
        addr = world.read(scope, c.target)
        cell = world.cell(addr, f"{c.target}.{c.field}")
        value = world.eval(c.expr, scope)
        world.heap[addr] = replace(cell, v0=value) if c.field == 0 else replace(cell, v1=value)
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Open):
        contract = resolved.contract(c.contract)
        a = world.alloc(Endpoint(0, contract.name, contract.init))
        b = world.alloc(Endpoint(a, f"~{contract.name}", contract.init))
        world.heap[a] = replace(world.heap[a], peer=b)
        world.write(scope, c.left, a)
        world.write(scope, c.right, b)
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Close):
        yield _close(world, scope, c, tid, rest)
    elif isinstance(c, ast.Send):
        addr = world.read(scope, c.endpoint)
        stepped = world.contract_step(addr, Direction.SEND, c.tag)
        peer = world.endpoint(stepped.peer, f"send({c.tag}, {c.endpoint}) to the peer")
        values = tuple(world.eval(arg, scope) for arg in c.args)
        world.heap[addr] = stepped
        world.heap[stepped.peer] = replace(peer, queue=peer.queue + (Message(c.tag, values),))
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Receive):
        addr = world.read(scope, c.endpoint)
        obj = world.endpoint(addr, f"receive({c.tag}, {c.endpoint})")
        index = _find(obj.queue, {c.tag}, reception)
        if index is None:
            raise _Blocked()
        _pop(world, addr, c.tag, c.binders, scope, index)
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Switch):
        yield from _switch(resolved, config, tid, c, scope, result, reception)
    elif isinstance(c, ast.Par):
        children = []
        for branch in c.branches:
            frame = world.new_frame()
            children.append(world.fork((Exec(branch.body, (frame,) + scope), Drop(frame))))
        world.threads[tid] = (Join(tuple(children), c.loc),) + rest
        yield world
    elif isinstance(c, ast.Call):
        yield from _call(resolved, config, tid, c, scope)
    elif isinstance(c, ast.Spawn):
        callee = resolved.functions[c.func]
        values = [world.eval(arg, scope) for arg in c.args]
        frame = world.new_frame(callee.params, values)
        world.fork((Exec(callee.body, (frame,)), ReturnTo(frame)))
        world.threads[tid] = rest
        yield world
    elif isinstance(c, ast.Return):
        value = world.eval(c.expr, scope)
        stack = rest
        while stack and not isinstance(stack[0], ReturnTo):
            stack = stack[1:]
        if stack:
            marker, stack = stack[0], stack[1:]
            if marker.result is not None and marker.caller is not None:
                world.write(marker.caller, marker.result, value)
            world.drop_frame(marker.frame)
        world.threads[tid] = stack
        yield world
    else:
        raise TypeError(f"not an action: {c!r}")


def _find(queue: Tuple[Message, ...], tags, reception: str) -> Optional[int]:
    """Position of the message a reception wanting `tags` takes, or None."""
    if reception == LOOKAHEAD:
        for index, message in enumerate(queue):
            if message.tag in tags:
                return index
        return None
    return 0 if queue and queue[0].tag in tags else None


def _pop(world: _World, addr: int, tag: str, binders, scope: Scope, index: int = 0) -> None:
    obj = world.endpoint(addr, f"receive({tag})")
    message = obj.queue[index]
    stepped = world.contract_step(addr, Direction.RECV, tag)
    world.heap[addr] = replace(stepped, queue=obj.queue[:index] + obj.queue[index + 1 :])
    for name, value in zip(binders, message.values):
        world.write(scope, name, value)


def _close(world: _World, scope: Scope, c: ast.Close, tid: int, rest) -> _World:
    a, b = world.read(scope, c.left), world.read(scope, c.right)
    what = f"close({c.left}, {c.right})"
    left, right = world.endpoint(a, what), world.endpoint(b, what)
    if a == b or left.peer != b or right.peer != a:
        raise _Fault(CLOSE_ERROR, f"{what}: the endpoints are not peers of each other")
    if left.queue or right.queue:
        pending = ", ".join(str(m) for m in left.queue + right.queue)
        raise _Fault(ORPHAN_MESSAGE, f"{what}: messages left in the channel: {pending}")
    if left.state != right.state:
        raise _Fault(
            CONTRACT_VIOLATION, f"{what}: endpoints in different states {left.state}, {right.state}"
        )
    if left.state not in world.resolved.contract(left.contract).finals:
        raise _Fault(CONTRACT_VIOLATION, f"{what}: state {left.state} is not final")
    del world.heap[a]
    del world.heap[b]
    world.threads[tid] = rest
    return world


def _switch(
    resolved, config, tid, c: ast.Switch, scope: Scope, result: StepResult, reception: str
):
    view = _World(resolved, config)
    tags_by_endpoint: Dict[int, List[str]] = {}
    for case in c.cases:
        addr = view.read(scope, case.endpoint)
        view.endpoint(addr, f"switch on {case.endpoint}")
        tags_by_endpoint.setdefault(addr, []).append(case.tag)

    fired = False
    for case in c.cases:
        addr = view.read(scope, case.endpoint)
        queue = view.heap[addr].queue
        index = _find(queue, tags_by_endpoint[addr], reception)
        if index is not None and queue[index].tag == case.tag:
            world, rest = _branch(resolved, config, tid)
            _pop(world, addr, case.tag, case.binders, scope, index)
            world.threads[tid] = (Exec(case.body, scope),) + rest
            fired = True
            yield world

    for addr, tags in tags_by_endpoint.items():
        queue = view.heap[addr].queue
        if reception == FIFO and queue and queue[0].tag not in tags:
            result.faults.append(
                Fault(
                    UNSPECIFIED_RECEPTION,
                    tid,
                    f"switch cannot handle {queue[0]} at the head of endpoint {addr}",
                    c.loc,
                )
            )
    if not fired:
        result.blocked = True


def _call(resolved, config, tid, c: ast.Call, scope: Scope):
    callee = resolved.functions.get(c.func)
    if callee is None:
        # undeclared functions return an arbitrary small value
        for value in HAVOC_VALUES:
            world, rest = _branch(resolved, config, tid)
            if c.result:
                world.write(scope, c.result, value)
            world.threads[tid] = rest
            yield world
        return
    world, rest = _branch(resolved, config, tid)
    values = [world.eval(arg, scope) for arg in c.args]
    frame = world.new_frame(callee.params, values)
    world.threads[tid] = (Exec(callee.body, (frame,)), ReturnTo(frame, c.result, scope)) + rest
    yield world


# ---- races -------------------------------------------------------------------------


def accesses(
    resolved: ResolvedProgram, config: RuntimeConfig, tid: int
) -> Tuple[FrozenSet, FrozenSet]:
    """(reads, writes) of a thread's next action, over variables and addresses."""
    thread = config.thread(tid)
    if thread is None or not isinstance(thread.top(), (Exec, LoopAt)):
        return frozenset(), frozenset()
    item = thread.top()
    world = _World(resolved, config)
    c, scope = item.command, item.scope
    reads, writes = set(), set()

    def var(name: str):
        return ("var",) + world.locate(scope, name)

    def expr_reads(exprs) -> None:
        for expr in exprs:
            reads.update(var(n) for n in ast.expr_vars(expr))

    def addr_of(name: str):
        return ("addr", world.read(scope, name))

    if isinstance(item, LoopAt) or isinstance(c, ast.If):
        reads.update(var(n) for n in ast.cond_vars(c.cond))
    elif isinstance(c, ast.Assign):
        writes.add(var(c.var))
        expr_reads([c.expr])
    elif isinstance(c, ast.New):
        writes.add(var(c.var))
    elif isinstance(c, ast.Dispose):
        reads.add(var(c.var))
        writes.add(addr_of(c.var))
    elif isinstance(c, ast.FieldRead):
        writes.add(var(c.var))
        reads.update({var(c.source), addr_of(c.source)})
    elif isinstance(c, ast.FieldWrite):
        reads.add(var(c.target))
        writes.add(addr_of(c.target))
        expr_reads([c.expr])
    elif isinstance(c, ast.Open):
        writes.update({var(c.left), var(c.right)})
    elif isinstance(c, ast.Close):
        reads.update({var(c.left), var(c.right)})
        writes.update({addr_of(c.left), addr_of(c.right)})
    elif isinstance(c, ast.Send):
        reads.update({var(c.endpoint), addr_of(c.endpoint)})
        expr_reads(c.args)
    elif isinstance(c, ast.Receive):
        reads.update({var(c.endpoint), addr_of(c.endpoint)})
        writes.update(var(n) for n in c.binders)
    elif isinstance(c, ast.Switch):
        for case in c.cases:
            reads.update({var(case.endpoint), addr_of(case.endpoint)})
            writes.update(var(n) for n in case.binders)
    elif isinstance(c, (ast.Call, ast.Spawn)):
        expr_reads(c.args)
    elif isinstance(c, ast.Return):
        expr_reads([c.expr])
    return frozenset(reads), frozenset(writes)


def find_race(
    resolved: ResolvedProgram, config: RuntimeConfig, enabled: Optional[Iterable[int]] = None
) -> Optional[Fault]:
    """Two enabled threads whose next actions touch a common location, at least one writing."""
    tids = config.tids() if enabled is None else enabled
    sets = {tid: accesses(resolved, config, tid) for tid in tids}
    tids = sorted(sets)
    for i, first in enumerate(tids):
        r1, w1 = sets[first]
        for second in tids[i + 1 :]:
            r2, w2 = sets[second]
            common = (w1 & (r2 | w2)) | (w2 & r1)
            if common:
                where = sorted(common)[0]
                item = config.thread(second).top()
                return Fault(
                    DATA_RACE,
                    second,
                    f"t{first} and t{second} both access {where[1:]} and one of them writes",
                    getattr(item.command, "loc", None),
                )
    return None


def finished(config: RuntimeConfig) -> Outcome:
    if config.heap:
        remaining = tuple(addr for addr, _ in config.heap)
        message = f"heap not empty at exit: {list(remaining)}"
        return Outcome(FINISHED_LEAK, message, remaining=remaining)
    return Outcome(FINISHED_CLEAN, "all threads finished with an empty heap")


# ---- seeded run --------------------------------------------------------------------


@dataclass
class RunResult:
    outcome: Outcome
    steps: int
    seed: int

    @property
    def trace(self) -> List[str]:
        return self.outcome.trace


def run(
    resolved: ResolvedProgram, seed: int = 0, max_steps: int = 10_000, reception: str = FIFO
) -> RunResult:
    """
    Execute one schedule chosen by a seeded generator.

    Args:
        resolved: The program
        seed: Scheduler seed; equal seeds give equal traces
        max_steps: Steps after which the run is declared inconclusive
        reception: FIFO or LOOKAHEAD

    Returns:
        RunResult with the outcome and its trace
    """
    rng = random.Random(seed)
    config = initial_config(resolved)
    trace: List[str] = []

    def done(outcome: Outcome, steps: int) -> RunResult:
        outcome.trace = trace
        logger.info(f"Run with seed {seed} ended after {steps} steps: {outcome.kind}")
        return RunResult(outcome, steps, seed)

    for steps in range(max_steps):
        if not config.threads:
            return done(finished(config), steps)
        results = {tid: step(resolved, config, tid, None, reception) for tid in config.tids()}
        candidates = [tid for tid, r in sorted(results.items()) if is_enabled(r)]
        race = find_race(resolved, config, candidates)
        if race:
            return done(_error(race), steps)
        if not candidates:
            unspecified = [f for r in results.values() for f in r.faults]
            if unspecified:
                return done(_error(unspecified[0]), steps)
            blocked = tuple(sorted(results))
            return done(Outcome(DEADLOCK, "every thread is blocked", blocked=blocked), steps)
        tid = rng.choice(candidates)
        chosen = results[tid]
        if not chosen.successors:
            return done(_error(chosen.faults[0]), steps)
        config, text = rng.choice(chosen.successors)
        trace.append(text)
        logger.debug(text)

    return done(Outcome(INCONCLUSIVE, f"no verdict within {max_steps} steps"), max_steps)


def is_enabled(result: StepResult) -> bool:
    return bool(result.successors) or (bool(result.faults) and not result.blocked)


def _error(fault: Fault) -> Outcome:
    return Outcome(fault.kind, fault.message, thread=fault.tid, location=fault.location)
