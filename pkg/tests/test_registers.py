import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from approxcount.errors import ContractViolation, HarnessViolation
from approxcount.harness import BlockWorkload, Schedule, run_schedule
from approxcount.registers import NATIVE, SIMULATED, Memory, Register, StepCounter, drive, reg_read, reg_write


def test_fresh_register_reads_initial_value():
    reg = Register(Memory())
    assert reg_read(reg) == 0


def test_read_returns_latest_write():
    reg = Register(Memory())
    reg_write(reg, 0, 1)
    assert reg_read(reg) == 1


def test_write_zero_to_fresh_register():
    reg = Register(Memory())
    reg_write(reg, 0, 0)
    assert reg_read(reg) == 0


def test_one_bit_register_bounds():
    bit = Register(Memory(), bound=1)
    reg_write(bit, 0, 1)
    assert reg_read(bit) == 1
    with pytest.raises(ContractViolation):
        reg_write(bit, 0, 2)
    with pytest.raises(ContractViolation):
        reg_write(bit, 0, -1)


def test_two_actor_schedule_hand_run():
    # A writes 1, B writes 0, A reads: sequential register semantics give 0.
    w = BlockWorkload("register", 2, [[("write", 1), "read"], [("write", 0)]], bound=1)
    trace = run_schedule(w, Schedule((0, 1, 0)))
    reads = [o for o in trace.ops().values() if o["op"] == "read"]
    assert [r["result"] for r in reads] == [0]


def test_simulated_access_needs_a_grant():
    memory = Memory(SIMULATED)
    reg = Register(memory)
    gen = reg.read()
    req = next(gen)
    with pytest.raises(HarnessViolation):
        memory.perform(req)
    with memory.granted():
        assert memory.perform(req) == (0, False)


def test_step_counter_counts_each_access():
    memory = Memory()
    reg = Register(memory)
    steps = StepCounter()
    reg_write(reg, 3, 5, steps)
    reg_read(reg, 3, steps)
    reg_read(reg, 4, steps)
    assert steps.tally == {(3, 0): 2, (4, 0): 1}
    assert steps.total() == 3


def test_ids_come_from_a_monotone_arena():
    memory = Memory()
    regs = [Register(memory) for _ in range(5)]
    assert [r.id for r in regs] == list(range(5))
    assert memory.census() == {"register": 5}


@given(st.lists(st.one_of(st.none(), st.integers(0, 7)), max_size=30))
def test_single_actor_reads_see_most_recent_write(ops):
    memory = Memory()
    reg = Register(memory, bound=7)
    last = 0
    for op in ops:
        if op is None:
            assert reg_read(reg) == last
        else:
            reg_write(reg, 0, op)
            last = op


@given(st.lists(st.tuples(st.integers(0, 2), st.one_of(st.none(), st.integers(0, 9))), max_size=40))
def test_backends_agree_on_a_fixed_access_order(ops):
    results = {}
    for backend in (SIMULATED, NATIVE):
        memory = Memory(backend)
        regs = [Register(memory, bound=9) for _ in range(3)]
        out = []
        for idx, value in ops:
            if value is None:
                out.append(drive(regs[idx].read()))
            else:
                drive(regs[idx].write(value))
        results[backend] = (out, [r.peek() for r in regs])
    assert results[SIMULATED] == results[NATIVE]


def test_native_backend_under_threads():
    memory = Memory(NATIVE)
    regs = [Register(memory) for _ in range(4)]

    def writer(a):
        for v in range(1, 500):
            reg_write(regs[a], a, v)

    threads = [threading.Thread(target=writer, args=(a,)) for a in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [reg_read(r) for r in regs] == [499] * 4
