import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxcount.checker import ApproxCounterSpec, check_stream
from approxcount.errors import BudgetExceeded, ContractViolation
from approxcount.harness import (
    ACCESS,
    BLOCK_STEP,
    INVOKE,
    REGISTER_STEP,
    RESPOND,
    BlockWorkload,
    ExecutionTrace,
    Schedule,
    WorkloadSpec,
    estimate_interleavings,
    explore_exhaustive,
    explore_random,
    run_schedule,
    stress_native,
)
from approxcount.invariants import LemmaMonitor, check_quiescent_accuracy, check_step_bounds, check_tallies
from approxcount.registers import Memory

DATA = Path(__file__).parent / "data"


def well_formed(trace: ExecutionTrace) -> bool:
    state = {}
    for e in trace.events:
        busy = state.get(e.actor)
        if e.kind == INVOKE:
            if busy is not None:
                return False
            state[e.actor] = e.seq
        elif busy != e.seq:
            return False
        elif e.kind == RESPOND:
            state[e.actor] = None
    return True


def test_serial_schedule_is_sequential_composition():
    w = WorkloadSpec(2, 2, 8, 2, [["inc", "inc", "read"], ["inc", "read"]])
    serial = run_schedule(w, Schedule((0,) * 200 + (1,) * 200))
    c = w.build(Memory())
    h0, h1 = c.handle(0), c.handle(1)
    h0.increment(), h0.increment()
    expected = [h0.read()]
    h1.increment()
    expected.append(h1.read())
    got = [o["result"] for o in serial.ops().values() if o["op"] == "read"]
    assert got == expected


def test_replay_is_deterministic():
    w = WorkloadSpec(3, 2, 8, 2, [["inc"] * 3 + ["read"], ["inc", "read", "inc"]])
    sched = Schedule((0, 1, 1, 0, 1, 0, 0, 1) * 10)
    assert run_schedule(w, sched).to_jsonl() == run_schedule(w, sched).to_jsonl()


def test_single_actor_alg1_reads_four():
    w = WorkloadSpec(1, 1, 1, 4, [["inc", "read"]])
    for t in explore_exhaustive(w):
        assert [o["result"] for o in t.ops().values() if o["op"] == "read"] == [4]


def test_two_single_ops_have_two_interleavings():
    # an algorithm 1 first increment is a single atomic MaxWrite
    w = WorkloadSpec(1, 2, 2, 2, [["inc"], ["inc"]], mode="atomic")
    assert len(list(explore_exhaustive(w))) == 2


def test_two_and_one_steps_give_three_interleavings():
    w = BlockWorkload("register", 2, [[("write", 1), "read"], [("write", 0)]], bound=1)
    assert len(list(explore_exhaustive(w))) == math.comb(3, 1)


@pytest.mark.parametrize("lengths", [(1, 1, 1), (2, 2), (3, 1, 1), (2, 2, 1)])
def test_exhaustive_count_is_multinomial(lengths):
    w = BlockWorkload("register", len(lengths), [["read"] * x for x in lengths], bound=1)
    count = math.factorial(sum(lengths))
    for x in lengths:
        count //= math.factorial(x)
    traces = list(explore_exhaustive(w))
    assert len(traces) == count == estimate_interleavings(w)
    assert len({t.schedule for t in traces}) == count


def test_crash_prefixes_are_added():
    w = BlockWorkload("register", 2, [["read"], ["read"]], bound=1)
    # full: 01, 10; proper non-empty prefixes: 0, 1
    assert sorted(t.schedule for t in explore_exhaustive(w, crash=True)) == [(0,), (0, 1), (1,), (1, 0)]


def test_alg2_pair_of_increments_passes_checker():
    w = WorkloadSpec(2, 2, 2, 2, [["inc"], ["inc"]], mode="atomic")
    traces = list(explore_exhaustive(w, crash=True))
    assert check_stream(traces, ApproxCounterSpec(2)).passed == len(traces)


def test_exhaustive_covers_serial_schedules_and_is_well_formed():
    w = WorkloadSpec(3, 2, 4, 2, [["inc", "read"], ["read", "inc"]], mode="atomic")
    traces = list(explore_exhaustive(w))
    schedules = {t.schedule for t in traces}
    for first in (0, 1):
        run = run_schedule(w, Schedule((first,) * 50 + (1 - first,) * 50, BLOCK_STEP))
        assert run.schedule in schedules
    assert all(well_formed(t) for t in traces)
    assert all(not check_tallies(t) for t in traces)


def test_random_streams_repeat_by_seed():
    w = WorkloadSpec(2, 3, 12, "3/2", [["inc", "read"] * 2] * 3)
    a = next(explore_random(w, 7, 1)).to_jsonl()
    b = next(explore_random(w, 7, 1)).to_jsonl()
    assert a == b
    assert len(list(explore_random(w, 7, 100))) == 100


def test_alg3_random_traces_have_no_invariant_violations():
    w = WorkloadSpec(3, 4, 256, 2, [["inc"] * 60 + ["read"], ["inc", "read"] * 30, ["inc"] * 64, ["read"] + ["inc"] * 60])
    bounds = w.build(Memory()).step_bounds()
    for t in explore_random(w, 11, 500, probe=True, monitor=LemmaMonitor):
        assert t.violations == []
        assert check_quiescent_accuracy(t, 2) == []
        assert check_step_bounds(t, bounds) == []


def test_guard_refuses_large_instances():
    w = WorkloadSpec(2, 4, 8, 2, [["inc"], ["inc"], ["inc"], ["inc"]], mode="atomic")
    with pytest.raises(BudgetExceeded):
        next(explore_exhaustive(w))
    w = WorkloadSpec(2, 2, 8, 2, [["inc"] * 4, ["inc"] * 3], mode="atomic")
    with pytest.raises(BudgetExceeded):
        next(explore_exhaustive(w))


def test_granularity_must_match_mode():
    w = WorkloadSpec(2, 2, 2, 2, [["inc"], ["inc"]], mode="atomic")
    with pytest.raises(ValueError):
        run_schedule(w, Schedule((0, 1), REGISTER_STEP))
    with pytest.raises(ValueError):
        run_schedule(w, Schedule((0, 2), BLOCK_STEP))


def test_scripts_respect_m():
    with pytest.raises(ContractViolation):
        WorkloadSpec(2, 2, 2, 2, [["inc", "inc"], ["inc"]])


def test_trace_serialization_matches_golden_file():
    # hand-run: MaxWrite(0) on the {-1,0,1} register reads the root switch (0)
    # and sets the left switch; the Read sees root 0, left 1, so r=0 and k*2^0=2
    w = WorkloadSpec(1, 1, 2, 2, [["inc", "read"]])
    text = run_schedule(w, Schedule((0, 0, 0, 0))).to_jsonl()
    assert text == (DATA / "alg1_n1_inc_read.jsonl").read_text()
    again = ExecutionTrace.from_jsonl(text)
    assert again.to_jsonl() == text
    assert again.ops()[(0, 1)]["result"] == Fraction(2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_traces_round_trip(seed):
    w = WorkloadSpec(2, 2, 6, "3/2", [["inc", "read", "inc"], ["read", "inc", "inc"]])
    trace = next(explore_random(w, seed, 1))
    assert ExecutionTrace.from_jsonl(trace.to_jsonl()).to_jsonl() == trace.to_jsonl()
    assert well_formed(trace)
    assert sum(o["steps"] for o in trace.ops().values()) == sum(e.kind == ACCESS for e in trace.events)


@pytest.mark.parametrize("alg, n, k", [(1, 2, 2), (2, 4, "3/2"), (3, 4, 2)])
def test_native_threads_quiescent_accuracy(alg, n, k):
    w = WorkloadSpec(alg, n, 400, k, [["inc"] * 100 for _ in range(n)])
    for summary in stress_native(w, repeats=2):
        v = summary["increments"]
        for x in summary["reads"]:
            assert Fraction(v) / Fraction(k) <= x <= Fraction(k) * v
