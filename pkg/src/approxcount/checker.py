"""Brute-force linearizability checking against sequential specifications.

The search is Wing & Gong's: repeatedly pick an operation that may go
next (no pending-free operation responded before it was invoked), apply
it to the specification state and recurse, backtracking on rejection.
Failed ``(linearized set, state)`` pairs are memoized, so each is
explored once.

Pending operations may be completed or dropped.  A pending operation that
cannot change the state (a read) is simply dropped.  By default a pending
increment whose MaxWrite on ``logNumIncrems`` visibly changed it must be
completed, since readers may already have observed it; pass
``complete_visible=False`` to relax that to the textbook rule.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .counters import INC, READ
from .harness import ACCESS, INVOKE, RESPOND, BlockWorkload, ExecutionTrace, WorkloadSpec
from .rational import format_rational, parse_k

YES = "yes"
NO = "no"
INCONCLUSIVE = "inconclusive"

PENDING = object()

DEFAULT_BUDGET = 200_000


class SequentialSpec:
    """Sequential object: ``apply`` returns the next state or ``None`` to reject.

    ``result`` is :data:`PENDING` for an operation that never responded,
    meaning any response is acceptable.
    """

    name = "spec"
    initial: Any = 0
    updates: frozenset[str] = frozenset()

    def apply(self, state, op: str, arg, result):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"spec": self.name}


class RegisterSpec(SequentialSpec):
    name = "register"
    updates = frozenset({"write"})

    def __init__(self, initial: int = 0):
        self.initial = initial

    def apply(self, state, op, arg, result):
        if op == "write":
            return arg
        if op == "read":
            return state if result is PENDING or result == state else None
        raise ValueError(op)


class MaxRegisterSpec(SequentialSpec):
    name = "max_register"
    updates = frozenset({"max_write"})

    def __init__(self, initial: int = 0):
        self.initial = initial

    def apply(self, state, op, arg, result):
        if op == "max_write":
            return max(state, arg)
        if op == "max_read":
            return state if result is PENDING or result == state else None
        raise ValueError(op)


class ExactCounterSpec(SequentialSpec):
    name = "exact_counter"
    updates = frozenset({INC})
    initial = 0

    def apply(self, state, op, arg, result):
        if op == INC:
            return state + 1
        if op == READ:
            return state if result is PENDING or result == state else None
        raise ValueError(op)


class ApproxCounterSpec(SequentialSpec):
    """Read may return any ``x`` with ``v/k <= x <= k*v``, ``v`` = increments so far."""

    name = "approx_counter"
    updates = frozenset({INC})
    initial = 0

    def __init__(self, k):
        self.k = parse_k(k)

    def accepts(self, v: int, x) -> bool:
        x = Fraction(x)
        return Fraction(v) / self.k <= x <= self.k * v

    def apply(self, state, op, arg, result):
        if op == INC:
            return state + 1
        if op == READ:
            return state if result is PENDING or self.accepts(state, result) else None
        raise ValueError(op)

    def describe(self):
        return {"spec": self.name, "k": format_rational(self.k)}


def spec_for(workload) -> SequentialSpec:
    if isinstance(workload, WorkloadSpec):
        return ApproxCounterSpec(workload.k)
    if isinstance(workload, BlockWorkload):
        if workload.kind == "register":
            return RegisterSpec(workload.initial)
        if workload.kind == "max_register":
            return MaxRegisterSpec(workload.initial)
        return ExactCounterSpec()
    raise TypeError(f"no specification for {type(workload).__name__}")


@dataclass(frozen=True)
class Operation:
    actor: int
    seq: int
    op: str
    arg: Any
    result: Any
    invoke: int
    respond: int | None
    visible: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.actor, self.seq)

    @property
    def pending(self) -> bool:
        return self.respond is None


@dataclass(frozen=True)
class History:
    """Operations of one execution ordered by invocation."""

    ops: tuple[Operation, ...]

    @classmethod
    def from_trace(cls, trace: ExecutionTrace, visible_object: str = "logNumIncrems") -> History:
        rows: dict[tuple[int, int], dict] = {}
        for e in trace.events:
            key = (e.actor, e.seq)
            if e.kind == INVOKE:
                rows[key] = dict(actor=e.actor, seq=e.seq, op=e.op, arg=e.arg, result=None,
                                 invoke=e.index, respond=None, visible=False)
            elif e.kind == ACCESS:
                if e.op == "max_write" and e.name == visible_object and e.changed:
                    rows[key]["visible"] = True
            elif e.kind == RESPOND:
                rows[key]["respond"] = e.index
                rows[key]["result"] = e.result
        return cls(tuple(Operation(**r) for r in rows.values()))

    @classmethod
    def from_ops(cls, rows: Iterable[tuple]) -> History:
        """Build from ``(actor, op, arg, result, invoke, respond)`` tuples; ``respond=None`` is pending."""
        ops, seqs = [], {}
        for actor, op, arg, result, inv, resp in sorted(rows, key=lambda r: r[4]):
            seq = seqs.get(actor, 0)
            seqs[actor] = seq + 1
            ops.append(Operation(actor, seq, op, arg, result, inv, resp))
        return cls(tuple(ops))

    def signature(self) -> tuple:
        """Order-only fingerprint: equal signatures have equal verdicts."""
        marks = []
        for o in self.ops:
            marks.append((o.invoke, 0, o.key))
            if o.respond is not None:
                marks.append((o.respond, 1, o.key))
        marks.sort()
        by_key = {o.key: o for o in self.ops}
        out = []
        for _, kind, key in marks:
            o = by_key[key]
            out.append((kind, key, o.op, o.arg, o.result if kind else None, o.visible))
        return tuple(out)


@dataclass
class Verdict:
    status: str
    witness: tuple[tuple[int, int], ...] | None = None
    explored: int = 0

    @property
    def ok(self) -> bool:
        return self.status == YES

    def to_record(self) -> dict:
        return {
            "status": self.status,
            "witness": [list(k) for k in self.witness] if self.witness is not None else None,
            "explored": self.explored,
        }


class _OutOfBudget(Exception):
    pass


def check_linearizable(history: History, spec: SequentialSpec, *, budget: int = DEFAULT_BUDGET,
                       complete_visible: bool = True) -> Verdict:
    """Search for a linearization; ``inconclusive`` when the budget runs out."""
    ops = [o for o in history.ops if not (o.pending and o.op not in spec.updates)]
    inf = float("inf")
    inv = [o.invoke for o in ops]
    resp = [inf if o.pending else o.respond for o in ops]
    res = [PENDING if o.pending else o.result for o in ops]
    required = 0
    for i, o in enumerate(ops):
        if not o.pending or (complete_visible and o.visible):
            required |= 1 << i
    count = len(ops)
    failed: set = set()
    explored = 0

    def dfs(mask: int, state):
        nonlocal explored
        if mask & required == required:
            return []
        if (mask, state) in failed:
            return None
        explored += 1
        if explored > budget:
            raise _OutOfBudget
        free = [i for i in range(count) if not mask >> i & 1]
        horizon = min(resp[i] for i in free)
        for i in free:
            if inv[i] > horizon:
                continue
            o = ops[i]
            nxt = spec.apply(state, o.op, o.arg, res[i])
            if nxt is None:
                continue
            rest = dfs(mask | 1 << i, nxt)
            if rest is not None:
                return [i, *rest]
        failed.add((mask, state))
        return None

    try:
        order = dfs(0, spec.initial)
    except _OutOfBudget:
        return Verdict(INCONCLUSIVE, None, explored)
    if order is None:
        return Verdict(NO, None, explored)
    return Verdict(YES, tuple(ops[i].key for i in order), explored)


def validate_witness(history: History, spec: SequentialSpec, order, *, complete_visible: bool = True) -> bool:
    """Independently confirm a witness: coverage, real-time order, spec acceptance."""
    by_key = {o.key: o for o in history.ops}
    order = [tuple(k) for k in order]
    if len(set(order)) != len(order) or any(k not in by_key for k in order):
        return False
    chosen = set(order)
    for o in history.ops:
        if o.key not in chosen and not o.pending:
            return False
        if o.key not in chosen and complete_visible and o.visible and o.op in spec.updates:
            return False
    position = {k: i for i, k in enumerate(order)}
    for a in order:
        for b in order:
            oa, ob = by_key[a], by_key[b]
            if oa.respond is not None and oa.respond < ob.invoke and position[a] > position[b]:
                return False
    state = spec.initial
    for k in order:
        o = by_key[k]
        state = spec.apply(state, o.op, o.arg, PENDING if o.pending else o.result)
        if state is None:
            return False
    return True


@dataclass
class StreamSummary:
    checked: int = 0
    passed: int = 0
    inconclusive: int = 0
    counterexample: tuple[int, ExecutionTrace, Verdict] | None = None
    distinct_histories: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.counterexample is None and self.inconclusive == 0

    def to_record(self) -> dict:
        rec = {
            "checked": self.checked,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "distinct_histories": self.distinct_histories,
            "counterexample": None,
        }
        if self.counterexample is not None:
            idx, trace, verdict = self.counterexample
            rec["counterexample"] = {"trace_index": idx, "schedule": list(trace.schedule), **verdict.to_record()}
        return rec


def check_stream(traces: Iterable[ExecutionTrace], spec: SequentialSpec, **kw) -> StreamSummary:
    """Check each trace in turn; stop at the first non-linearizable one."""
    summary = StreamSummary()
    cache: dict[tuple, Verdict] = {}
    for idx, trace in enumerate(traces):
        history = History.from_trace(trace)
        sig = history.signature()
        verdict = cache.get(sig)
        if verdict is None:
            verdict = check_linearizable(history, spec, **kw)
            cache[sig] = verdict
        summary.checked += 1
        if verdict.status == YES:
            summary.passed += 1
        elif verdict.status == INCONCLUSIVE:
            summary.inconclusive += 1
        else:
            summary.counterexample = (idx, trace, verdict)
            break
    summary.distinct_histories = len(cache)
    return summary
