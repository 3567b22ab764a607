"""Deterministic scheduler, schedule exploration and execution traces.

An actor runs a script of operations.  Scheduling an actor for one step
means: invoke its next operation if it is idle, run local code up to the
next shared access, perform that access, then keep running local code until
the access after it is about to happen or the operation returns.  So a
step holds at most one invocation, one access and one response, and an
operation with no shared access (a silent increment) still costs one
scheduler step but zero counted steps.

Crashes are schedule truncation: an actor that is never scheduled again
leaves its operation pending.
"""

from __future__ import annotations

import io
import json
import math
import sys
import threading
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .counters import ATOMIC, INC, READ, REGISTERS, construct, normalize_mode
from .errors import BudgetExceeded, ContractViolation
from .exact import make_exact_counter
from .maxreg import make_max_register
from .rational import format_rational, parse_k
from .registers import NATIVE, SIMULATED, Memory, Register, StepCounter, drive

REGISTER_STEP = "register-step"
BLOCK_STEP = "block-step"

#: Exhaustive exploration guard for atomic-blocks workloads.
MAX_ACTORS = 3
MAX_OPS = 6
MAX_TRACES = 10**6


def _normalize_script(script) -> tuple[tuple[str, Any], ...]:
    out = []
    for op in script:
        if isinstance(op, str):
            out.append((op, None))
        else:
            name, *rest = op
            out.append((name, rest[0] if rest else None))
    return tuple(out)


def _granularity(mode: str) -> str:
    return REGISTER_STEP if mode == REGISTERS else BLOCK_STEP


@dataclass(frozen=True)
class Schedule:
    """Sequence of actor ids, one per scheduler step."""

    actors: tuple[int, ...]
    granularity: str = REGISTER_STEP

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        if self.granularity not in (REGISTER_STEP, BLOCK_STEP):
            raise ValueError(f"unknown granularity {self.granularity!r}")


@dataclass
class WorkloadSpec:
    """An approximate counter plus one operation script per actor."""

    algorithm: int
    n: int
    m: int
    k: Any
    scripts: list
    mode: str = REGISTERS

    def __post_init__(self):
        self.k = parse_k(self.k)
        self.mode = normalize_mode(self.mode)
        self.scripts = [_normalize_script(s) for s in self.scripts]
        if len(self.scripts) != self.n:
            raise ValueError(f"{len(self.scripts)} scripts for n={self.n} actors")
        for script in self.scripts:
            for name, _ in script:
                if name not in (INC, READ):
                    raise ValueError(f"counter scripts hold {INC!r}/{READ!r} only, got {name!r}")
        incs = sum(name == INC for s in self.scripts for name, _ in s)
        if incs > self.m:
            raise ContractViolation(f"scripts hold {incs} increments but m={self.m}")

    @property
    def granularity(self) -> str:
        return _granularity(self.mode)

    def build(self, memory: Memory):
        return construct(self.algorithm, self.n, self.m, self.k, self.mode, memory)

    def describe(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "m": self.m,
            "k": format_rational(self.k),
            "mode": self.mode,
            "scripts": [[list(op) for op in s] for s in self.scripts],
        }


class _BlockTarget:
    """Adapter that exposes a single building block to the scheduler."""

    def __init__(self, obj, ops: dict[str, Callable]):
        self.obj = obj
        self._ops = ops

    def start(self, actor, op, arg=None):
        try:
            fn = self._ops[op]
        except KeyError:
            raise ValueError(f"unsupported operation {op!r}") from None
        return fn(actor, arg)

    def final_state(self):
        return {getattr(self.obj, "name", "obj"): self.obj.peek()}

    def step_bounds(self) -> dict[str, int]:
        obj = self.obj
        if isinstance(obj, Register):
            return {"read": 1, "write": 1}
        if hasattr(obj, "max_write"):
            b = obj.step_bound()
            return {"max_read": b, "max_write": b}
        return {INC: obj.increment_bound(), READ: obj.read_bound()}


@dataclass
class BlockWorkload:
    """Scripts run directly against one building block.

    ``kind`` is ``"register"`` (ops read/write), ``"max_register"``
    (max_read/max_write) or ``"exact_counter"`` (inc/read).
    """

    kind: str
    n: int
    scripts: list
    mode: str = REGISTERS
    bound: int = 4
    initial: int = 0

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        self.scripts = [_normalize_script(s) for s in self.scripts]
        if len(self.scripts) != self.n:
            raise ValueError(f"{len(self.scripts)} scripts for n={self.n} actors")
        if self.kind not in ("register", "max_register", "exact_counter"):
            raise ValueError(f"unknown block kind {self.kind!r}")

    @property
    def granularity(self) -> str:
        return _granularity(self.mode)

    def build(self, memory: Memory):
        atomic = self.mode == ATOMIC
        if self.kind == "register":
            reg = Register(memory, bound=self.bound, initial=self.initial, name="R")
            return _BlockTarget(reg, {"read": lambda a, _: reg.read(), "write": lambda a, v: reg.write(v)})
        if self.kind == "max_register":
            mr = make_max_register(memory, self.bound, self.initial, atomic=atomic, name="M")
            return _BlockTarget(mr, {"max_read": lambda a, _: mr.max_read(a), "max_write": mr.max_write})
        ctr = make_exact_counter(memory, self.n, self.bound, atomic=atomic, name="C")
        return _BlockTarget(ctr, {INC: lambda a, _: ctr.increment(a), READ: lambda a, _: ctr.read(a)})

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "mode": self.mode,
            "bound": self.bound,
            "initial": self.initial,
            "scripts": [[list(op) for op in s] for s in self.scripts],
        }


# -- traces -----------------------------------------------------------------

INVOKE = "invoke"
ACCESS = "access"
RESPOND = "respond"


@dataclass(frozen=True, slots=True)
class Event:
    index: int
    actor: int
    kind: str
    seq: int
    op: str
    arg: Any = None
    obj: int | None = None
    name: str | None = None
    ret: Any = None
    changed: bool | None = None
    result: Any = None

    def to_record(self) -> dict:
        rec = {"i": self.index, "actor": self.actor, "kind": self.kind, "seq": self.seq, "op": self.op}
        if self.kind == INVOKE:
            rec["arg"] = self.arg
        elif self.kind == ACCESS:
            rec.update(obj=self.obj, name=self.name, arg=self.arg, ret=self.ret, changed=self.changed)
        else:
            rec["result"] = _encode(self.result)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> Event:
        kind = rec["kind"]
        common = dict(index=rec["i"], actor=rec["actor"], kind=kind, seq=rec["seq"], op=rec["op"])
        if kind == INVOKE:
            return cls(**common, arg=rec.get("arg"))
        if kind == ACCESS:
            return cls(**common, arg=rec.get("arg"), obj=rec["obj"], name=rec["name"], ret=rec["ret"], changed=rec["changed"])
        return cls(**common, result=_decode(rec.get("result")))


def _encode(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    return value


def _decode(value):
    if isinstance(value, str):
        return Fraction(value)
    return value


@dataclass
class ExecutionTrace:
    """Ordered events of one run plus per-operation step tallies."""

    events: list[Event]
    steps: dict[tuple[int, int], int]
    final: dict[str, Any]
    schedule: tuple[int, ...]
    meta: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def ops(self) -> dict[tuple[int, int], dict]:
        """Per-operation summary keyed by ``(actor, seq)``, in invocation order."""
        out: dict[tuple[int, int], dict] = {}
        for e in self.events:
            key = (e.actor, e.seq)
            if e.kind == INVOKE:
                out[key] = {"actor": e.actor, "seq": e.seq, "op": e.op, "arg": e.arg,
                            "invoke": e.index, "respond": None, "result": None, "steps": 0}
            elif e.kind == ACCESS:
                out[key]["steps"] += 1
            else:
                out[key]["respond"] = e.index
                out[key]["result"] = e.result
        return out

    def to_jsonl(self) -> str:
        buf = io.StringIO()
        dump_trace(self, buf)
        return buf.getvalue()

    @classmethod
    def from_jsonl(cls, text: str) -> ExecutionTrace:
        return load_trace(io.StringIO(text))


def dump_trace(trace: ExecutionTrace, fp) -> None:
    """Write a trace as line-delimited JSON: meta, events, tallies, final state."""
    fp.write(json.dumps({"kind": "meta", "schedule": list(trace.schedule), **trace.meta}) + "\n")
    for e in trace.events:
        fp.write(json.dumps(e.to_record()) + "\n")
    for (actor, seq), steps in sorted(trace.steps.items()):
        fp.write(json.dumps({"kind": "tally", "actor": actor, "seq": seq, "steps": steps}) + "\n")
    fp.write(json.dumps({"kind": "final", "state": trace.final}) + "\n")


def load_trace(fp) -> ExecutionTrace:
    events, steps, final, meta, schedule = [], {}, {}, {}, ()
    for line in fp:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        kind = rec["kind"]
        if kind == "meta":
            schedule = tuple(rec.pop("schedule", ()))
            rec.pop("kind")
            meta = rec
        elif kind == "tally":
            steps[(rec["actor"], rec["seq"])] = rec["steps"]
        elif kind == "final":
            final = rec["state"]
        else:
            events.append(Event.from_record(rec))
    return ExecutionTrace(events, steps, final, schedule, meta)


# -- the engine -------------------------------------------------------------


class _Run:
    """One simulated execution that can be advanced actor by actor."""

    def __init__(self, workload, monitor: Callable | None = None):
        self.workload = workload
        self.memory = Memory(SIMULATED)
        self.target = workload.build(self.memory)
        self.scripts = [list(s) for s in workload.scripts]
        n = len(self.scripts)
        self.pos = [0] * n
        self.gen: list = [None] * n
        self.pending: list = [None] * n
        self.seq = [0] * n
        self.events: list[Event] = []
        self.steps = StepCounter()
        self.taken: list[int] = []
        self.monitor = monitor(self.target) if monitor is not None else None

    def enabled(self) -> list[int]:
        return [a for a in range(len(self.scripts)) if self.gen[a] is not None or self.pos[a] < len(self.scripts[a])]

    def _emit(self, **kw) -> None:
        self.events.append(Event(index=len(self.events), **kw))

    def _respond(self, a: int, op: str, result) -> None:
        self._emit(actor=a, kind=RESPOND, seq=self.seq[a], op=op, result=result)
        self.gen[a] = None
        self.pending[a] = None

    def step(self, a: int) -> None:
        self.taken.append(a)
        if self.gen[a] is None:
            op, arg = self.scripts[a][self.pos[a]]
            self.seq[a] = self.pos[a]
            self.pos[a] += 1
            self._emit(actor=a, kind=INVOKE, seq=self.seq[a], op=op, arg=arg)
            gen = self.target.start(a, op, arg)
            self.gen[a] = gen
            try:
                req = next(gen)
            except StopIteration as stop:
                self._respond(a, op, stop.value)
                self._observe(a)
                return
        else:
            req = self.pending[a]
        op = self.scripts[a][self.seq[a]][0]
        with self.memory.granted():
            ret, changed = self.memory.perform(req)
        self.steps.tick(a, self.seq[a])
        obj = req.obj
        self._emit(actor=a, kind=ACCESS, seq=self.seq[a], op=req.op, arg=req.arg,
                   obj=obj.id, name=obj.name, ret=ret, changed=changed)
        try:
            self.pending[a] = self.gen[a].send(ret)
        except StopIteration as stop:
            self._respond(a, op, stop.value)
        self._observe(a)

    def _observe(self, a: int) -> None:
        if self.monitor is not None:
            self.monitor.after_step(a)

    def run_solo(self, a: int) -> None:
        while self.gen[a] is not None or self.pos[a] < len(self.scripts[a]):
            self.step(a)

    def probe(self) -> None:
        """Once quiescent, let every actor run one Read in turn."""
        for a in range(len(self.scripts)):
            self.scripts[a].append((READ, None))
            self.run_solo(a)

    def trace(self) -> ExecutionTrace:
        violations = list(self.monitor.violations) if self.monitor is not None else []
        meta = {"workload": self.workload.describe()}
        return ExecutionTrace(list(self.events), dict(self.steps.tally), self.target.final_state(),
                              tuple(self.taken), meta, violations)


def _check_schedule(workload, sched: Schedule) -> None:
    if sched.granularity != workload.granularity:
        raise ValueError(
            f"{sched.granularity} schedules need "
            f"{'register-level' if sched.granularity == REGISTER_STEP else 'atomic-blocks'} mode, "
            f"workload is {workload.mode}"
        )
    for a in sched.actors:
        if not 0 <= a < workload.n:
            raise ValueError(f"schedule names actor {a} but the workload has {workload.n}")


def run_schedule(workload, sched: Schedule, monitor: Callable | None = None) -> ExecutionTrace:
    """Replay ``sched``; actors whose scripts are exhausted are skipped."""
    _check_schedule(workload, sched)
    run = _Run(workload, monitor)
    for a in sched.actors:
        if run.gen[a] is not None or run.pos[a] < len(run.scripts[a]):
            run.step(a)
    return run.trace()


def op_step_bounds(workload) -> dict[str, int]:
    return workload.build(Memory(SIMULATED)).step_bounds()


def schedule_length_bound(workload) -> list[int]:
    """Per-actor upper bound on scheduler steps for the whole script."""
    bounds = op_step_bounds(workload)
    return [sum(max(1, bounds[name]) for name, _ in s) for s in workload.scripts]


def estimate_interleavings(workload) -> int:
    """Multinomial upper bound on the number of maximal interleavings."""
    lengths = schedule_length_bound(workload)
    total = math.factorial(sum(lengths))
    for x in lengths:
        total //= math.factorial(x)
    return total


def _guard(workload, max_traces: int) -> None:
    if workload.mode == ATOMIC:
        ops = sum(len(s) for s in workload.scripts)
        if workload.n > MAX_ACTORS or ops > MAX_OPS:
            raise BudgetExceeded(
                f"exhaustive runs allow n <= {MAX_ACTORS} and <= {MAX_OPS} operations; got n={workload.n}, ops={ops}"
            )
    est = estimate_interleavings(workload)
    if est > max_traces:
        raise BudgetExceeded(f"up to {est} interleavings exceeds the budget of {max_traces}")


def _replay(workload, prefix, monitor) -> _Run:
    run = _Run(workload, monitor)
    for a in prefix:
        run.step(a)
    return run


def explore_exhaustive(workload, max_depth: int | None = None, *, crash: bool = False,
                       monitor: Callable | None = None, max_traces: int = MAX_TRACES) -> Iterator[ExecutionTrace]:
    """Yield every maximal interleaving once, in canonical DFS order.

    With ``crash=True`` every non-empty proper prefix is yielded as well
    (the executions where the unfinished actors crashed).  ``max_depth``
    cuts schedules after that many steps.
    """
    _guard(workload, max_traces)
    yield from _dfs(workload, [], _Run(workload, monitor), max_depth, crash, monitor)


def _dfs(workload, prefix, run, max_depth, crash, monitor):
    enabled = run.enabled()
    if not enabled or (max_depth is not None and len(prefix) >= max_depth):
        yield run.trace()
        return
    if crash and prefix:
        yield run.trace()
    last = len(enabled) - 1
    for i, a in enumerate(enabled):
        child = run if i == last else _replay(workload, prefix, monitor)
        child.step(a)
        prefix.append(a)
        yield from _dfs(workload, prefix, child, max_depth, crash, monitor)
        prefix.pop()


def run_draws(workload, draws: np.ndarray, *, probe: bool = False, monitor: Callable | None = None) -> ExecutionTrace:
    """Run with ``enabled[draws[t] % len(enabled)]`` chosen at step ``t``.

    Draws are reused cyclically if the run outlives them.  The flat-array
    kernels use the same rule, so equal draws give equal executions.
    """
    run = _Run(workload, monitor)
    t, size = 0, len(draws)
    while True:
        enabled = run.enabled()
        if not enabled:
            break
        run.step(enabled[int(draws[t % size]) % len(enabled)])
        t += 1
    if probe:
        run.probe()
    return run.trace()


def draw_horizon(workload) -> int:
    return max(1, sum(schedule_length_bound(workload)))


def explore_random(workload, seed: int, trials: int, *, probe: bool = False,
                   monitor: Callable | None = None) -> Iterator[ExecutionTrace]:
    """Yield ``trials`` seeded pseudo-random schedules; same seed, same stream."""
    rng = np.random.default_rng(seed)
    horizon = draw_horizon(workload)
    for _ in range(trials):
        draws = rng.integers(0, 2**31 - 1, size=horizon)
        yield run_draws(workload, draws, probe=probe, monitor=monitor)


# -- real threads -------------------------------------------------------------


def stress_native(workload, *, repeats: int = 1, switch_interval: float = 1e-6) -> list[dict]:
    """Run each actor's script in its own OS thread on native memory.

    No scheduler is involved, so only quiescent properties can be checked:
    after all threads join, every actor performs one more Read in turn.
    Returns one summary per repeat with the total increments and the
    quiescent read results.
    """
    if workload.mode == ATOMIC:
        raise ValueError("native stress runs use register-level building blocks")
    old = sys.getswitchinterval()
    sys.setswitchinterval(switch_interval)
    try:
        out = []
        for _ in range(repeats):
            memory = Memory(NATIVE)
            target = workload.build(memory)
            errors: list[BaseException] = []

            def body(a):
                try:
                    for seq, (op, arg) in enumerate(workload.scripts[a]):
                        drive(target.start(a, op, arg), None, a, seq)
                except BaseException as exc:  # surfaced in the summary
                    errors.append(exc)

            threads = [threading.Thread(target=body, args=(a,)) for a in range(workload.n)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            if errors:
                raise errors[0]
            reads = [drive(target.start(a, READ)) for a in range(workload.n)]
            incs = sum(name == INC for s in workload.scripts for name, _ in s)
            out.append({"increments": incs, "reads": reads, "final": target.final_state()})
        return out
    finally:
        sys.setswitchinterval(old)


__all__ = [
    "BLOCK_STEP",
    "REGISTER_STEP",
    "BlockWorkload",
    "Event",
    "ExecutionTrace",
    "Schedule",
    "WorkloadSpec",
    "draw_horizon",
    "dump_trace",
    "estimate_interleavings",
    "explore_exhaustive",
    "explore_random",
    "load_trace",
    "op_step_bounds",
    "run_draws",
    "run_schedule",
    "stress_native",
]
