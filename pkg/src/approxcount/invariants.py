"""Executable versions of the correctness lemmas.

:class:`LemmaMonitor` watches a counter after every scheduler step (it
peeks at shared state without taking steps); the ``check_*`` functions
inspect finished traces.  Everything reports violations as strings, so a
clean run is an empty list.
"""

from __future__ import annotations

from fractions import Fraction

from .counters import INC, READ
from .harness import ExecutionTrace


class LemmaMonitor:
    """Track ``logNumIncrems``, bucket contents and per-actor locals.

    Checks, at every step:

    * the sequence of distinct ``logNumIncrems`` values increases, with no
      gaps at all for algorithm 1 and no gaps above ``cln`` for algorithm 3;
    * no bucket exceeds its bound (``ceil((X+1)n)`` / ``2N``);
    * each actor's bucket index only ever grows by exactly one;
    * thresholds follow their closed forms.
    """

    def __init__(self, counter):
        self.counter = counter
        self.log_values = [counter.log_num.peek()]
        self.indexes = [getattr(s, "index", 0) for s in counter.locals]
        self.violations: list[str] = []

    def _flag(self, msg: str) -> None:
        if len(self.violations) < 50:
            self.violations.append(msg)

    def after_step(self, actor: int) -> None:
        c = self.counter
        value = c.log_num.peek()
        last = self.log_values[-1]
        if value != last:
            if value < last:
                self._flag(f"logNumIncrems decreased {last} -> {value}")
            elif c.algorithm == 1 and value != last + 1:
                self._flag(f"logNumIncrems skipped from {last} to {value}")
            elif c.algorithm == 3 and value > c.cln and value != last + 1:
                self._flag(f"logNumIncrems reached {value} > cln={c.cln} without {value - 1}")
            self.log_values.append(value)
        s = c.locals[actor]
        if c.buckets:
            idx = s.index
            prev = self.indexes[actor]
            if idx not in (prev, prev + 1):
                self._flag(f"actor {actor} index moved {prev} -> {idx}")
            self.indexes[actor] = idx
            for i in {min(idx, len(c.buckets) - 1), max(idx - 1, 0)}:
                held = c.buckets[i].peek()
                if held > c.bucket_bound:
                    self._flag(f"Bucket[{i}] holds {held} > bound {c.bucket_bound}")
        if c.algorithm == 1:
            want = 1 if s.next_val <= 1 else 2 ** (s.next_val - 1)
            if s.threshold != want or not 0 <= s.lcounter <= s.threshold:
                self._flag(f"actor {actor} threshold {s.threshold}, lcounter {s.lcounter}, nextVal {s.next_val}")
        elif c.algorithm == 3:
            want = 1 if s.index == 0 else (c.kk - 1) * c.kk ** (s.index - 1)
            if s.threshold != want or not 0 <= s.lcounter <= s.threshold:
                self._flag(f"actor {actor} threshold {s.threshold} at index {s.index}")


def quiescent_reads(trace: ExecutionTrace) -> list[tuple[Fraction, int]]:
    """``(result, completed increments)`` for each Read overlapping no Increment."""
    ops = list(trace.ops().values())
    incs = [o for o in ops if o["op"] == INC]
    out = []
    for r in ops:
        if r["op"] != READ or r["respond"] is None:
            continue
        lo, hi = r["invoke"], r["respond"]
        overlapping = any(
            i["invoke"] < hi and (i["respond"] is None or i["respond"] > lo) for i in incs
        )
        if not overlapping:
            done = sum(1 for i in incs if i["respond"] is not None and i["respond"] < lo)
            out.append((Fraction(r["result"]), done))
    return out


def check_quiescent_accuracy(trace: ExecutionTrace, k) -> list[str]:
    k = Fraction(k)
    bad = []
    for x, v in quiescent_reads(trace):
        if not Fraction(v) / k <= x <= k * v:
            bad.append(f"quiescent read returned {x} with v={v}")
    return bad


def check_read_monotonicity(trace: ExecutionTrace) -> list[str]:
    """A Read that starts after another finished never returns less."""
    reads = [o for o in trace.ops().values() if o["op"] in (READ, "max_read") and o["respond"] is not None]
    bad = []
    for a in reads:
        for b in reads:
            if a["respond"] < b["invoke"] and Fraction(b["result"]) < Fraction(a["result"]):
                bad.append(f"read {b['actor']}:{b['seq']} got {b['result']} after {a['result']}")
    return bad


def check_step_bounds(trace: ExecutionTrace, bounds: dict[str, int]) -> list[str]:
    """Every operation, finished or not, stays within its closed-form bound."""
    bad = []
    for o in trace.ops().values():
        if o["steps"] > bounds[o["op"]]:
            bad.append(f"{o['op']} by actor {o['actor']} took {o['steps']} > {bounds[o['op']]} steps")
    return bad


def check_tallies(trace: ExecutionTrace) -> list[str]:
    """Tallied steps equal the accesses recorded in the trace."""
    bad = []
    for key, o in trace.ops().items():
        if trace.steps.get(key, 0) != o["steps"]:
            bad.append(f"op {key}: tally {trace.steps.get(key, 0)} != {o['steps']} accesses")
    return bad
