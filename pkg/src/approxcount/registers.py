"""Read/write registers, the only true base objects, plus step accounting.

Every shared-memory operation in the package is written as a generator
that *yields* an :class:`Access` request right before touching a base
object and receives the access result back through ``send``.  Whoever
drives the generator decides when the access happens:

* the simulation harness grants one access per scheduled step
  (``simulated`` backend), which is how interleavings are explored;
* :func:`drive` performs each access immediately (``native`` backend),
  which is how the objects are used directly or from real threads.

Register ids come from a monotone per-memory arena, so two runs that
build the same object graph assign the same ids and produce byte-identical
traces.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from collections.abc import Generator
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

from .errors import ContractViolation, HarnessViolation

READ = "read"
WRITE = "write"

SIMULATED = "simulated"
NATIVE = "native"

#: Bound used for "machine word" registers.
WORD = 2**63 - 1

Step = Generator["Access", Any, Any]


@dataclass(frozen=True, slots=True)
class Access:
    """A request to apply ``op(arg)`` to one shared object."""

    obj: SharedObject
    op: str
    arg: Any = None


class SharedObject:
    """Something that lives in a :class:`Memory` arena and can be accessed.

    Subclasses implement :meth:`apply` (the effect of one access) and
    :meth:`peek` (a monitor-only snapshot that is never counted as a step).
    """

    kind = "object"

    def __init__(self, memory: Memory, name: str = ""):
        self.memory = memory
        self.id = memory.allocate(self)
        self.name = name or f"{self.kind}{self.id}"

    def apply(self, op: str, arg: Any) -> Any:
        raise NotImplementedError

    def peek(self) -> Any:
        raise NotImplementedError


class Register(SharedObject):
    """Single-word linearizable register holding an integer in ``[0, bound]``.

    A register with ``bound=1`` is a 1-bit register.
    """

    kind = "register"

    def __init__(self, memory: Memory, bound: int = WORD, initial: int = 0, name: str = ""):
        if not 0 <= initial <= bound:
            raise ContractViolation(f"initial value {initial} outside [0, {bound}]")
        super().__init__(memory, name)
        self.bound = bound
        self.initial = initial
        self._value = initial

    @property
    def bits(self) -> int:
        return self.bound.bit_length()

    def read(self) -> Step:
        return (yield Access(self, READ))

    def write(self, v: int) -> Step:
        if not 0 <= v <= self.bound:
            raise ContractViolation(f"{self.name}: write of {v} outside [0, {self.bound}]")
        yield Access(self, WRITE, v)

    def apply(self, op: str, arg: Any) -> Any:
        if op == READ:
            return self._value
        if op == WRITE:
            self._value = arg
            return None
        raise ValueError(f"registers support read/write, not {op!r}")

    def peek(self) -> int:
        return self._value

    def reset(self) -> None:
        self._value = self.initial


class Memory:
    """Arena of shared objects with either a simulated or a native backend.

    In the simulated backend an access only proceeds while the scheduler
    holds a grant (see :meth:`granted`); anything else is a
    :class:`HarnessViolation`.  The native backend performs accesses at
    once; single list-slot loads and stores are atomic under the GIL, and
    the multi-field atomic mocks serialize on :attr:`lock`.
    """

    def __init__(self, backend: str = SIMULATED):
        if backend not in (SIMULATED, NATIVE):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.objects: list[SharedObject] = []
        self.lock = threading.Lock()
        self._grants = 0

    def allocate(self, obj: SharedObject) -> int:
        self.objects.append(obj)
        return len(self.objects) - 1

    @contextmanager
    def granted(self):
        self._grants += 1
        try:
            yield
        finally:
            self._grants -= 1

    def perform(self, access: Access) -> tuple[Any, bool]:
        """Apply one access; return ``(result, changed)``."""
        if self.backend == SIMULATED and not self._grants:
            raise HarnessViolation(f"access to {access.obj.name} outside a granted step")
        obj = access.obj
        before = obj.peek()
        ret = obj.apply(access.op, access.arg)
        return ret, obj.peek() != before

    def registers(self) -> list[Register]:
        return [o for o in self.objects if isinstance(o, Register)]

    def census(self) -> dict[str, int]:
        """Count allocated objects by kind; 1-bit registers are reported apart."""
        out: dict[str, int] = defaultdict(int)
        for o in self.objects:
            out[o.kind] += 1
            if isinstance(o, Register) and o.bound == 1:
                out["bit"] += 1
        return dict(out)


class StepCounter:
    """Base-object accesses tallied per ``(actor, operation)``; never decremented."""

    def __init__(self):
        self.tally: dict[tuple[int, int], int] = defaultdict(int)

    def tick(self, actor: int, op: int) -> None:
        self.tally[(actor, op)] += 1

    def __getitem__(self, key: tuple[int, int]) -> int:
        return self.tally.get(key, 0)

    def total(self) -> int:
        return sum(self.tally.values())


def drive(gen: Step, steps: StepCounter | None = None, actor: int = 0, op: int = 0) -> Any:
    """Run an operation generator to completion, performing accesses at once.

    Under a simulated memory the accesses are wrapped in a grant, which
    makes this the serial (single-actor) driver as well.
    """
    try:
        req = next(gen)
        while True:
            memory = req.obj.memory
            if memory.backend == SIMULATED:
                with memory.granted():
                    ret, _ = memory.perform(req)
            else:
                ret, _ = memory.perform(req)
            if steps is not None:
                steps.tick(actor, op)
            req = gen.send(ret)
    except StopIteration as stop:
        return stop.value


def reg_read(reg: Register, actor: int = 0, steps: StepCounter | None = None) -> int:
    """Read ``reg`` right now on behalf of ``actor``."""
    return drive(reg.read(), steps, actor)


def reg_write(reg: Register, actor: int, v: int, steps: StepCounter | None = None) -> None:
    """Write ``v`` to ``reg`` right now on behalf of ``actor``."""
    drive(reg.write(v), steps, actor)
