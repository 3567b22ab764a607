"""Bounded max registers.

:class:`BoundedMaxRegister` is the recursive construction from 1-bit
registers: a node over ``s`` values owns one switch bit, a left subtree
over the ``ceil(s/2)`` smallest values and a right subtree over the rest.
A subtree over a single value is a leaf and costs nothing.

* ``MaxWrite(v)`` with ``v`` in the left half reads the switch and descends
  only while it is still 0; a value in the right half is written into the
  right subtree first and the switch is set afterwards.
* ``MaxRead`` follows switches from the root, adding the left size each
  time it turns right.

Every access on a path is one step, so both operations take at most
``ceil(log2 s)`` steps.

The externally visible range is ``[initial, h]``; ``initial=-1`` is the
offset encoding the counters use for ``logNumIncrems``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation
from .registers import Access, Memory, Register, SharedObject, Step


def path_steps(size: int) -> int:
    """Worst-case accesses of one MaxRead or MaxWrite over ``size`` values."""
    return (size - 1).bit_length()


@dataclass(slots=True)
class _Node:
    switch: Register
    left: _Node | None
    right: _Node | None
    left_size: int


def _build(memory: Memory, size: int, name: str, path: str = "") -> _Node | None:
    if size <= 1:
        return None
    ls = (size + 1) // 2
    switch = Register(memory, bound=1, name=f"{name}.sw{path or '^'}")
    left = _build(memory, ls, name, path + "0")
    right = _build(memory, size - ls, name, path + "1")
    return _Node(switch, left, right, ls)


def _write(node: _Node | None, v: int) -> Step:
    if node is None:
        return
    if v < node.left_size:
        if (yield from node.switch.read()) == 0:
            yield from _write(node.left, v)
    else:
        yield from _write(node.right, v - node.left_size)
        yield from node.switch.write(1)


def _read(node: _Node | None) -> Step:
    acc = 0
    while node is not None:
        if (yield from node.switch.read()) == 0:
            node = node.left
        else:
            acc += node.left_size
            node = node.right
    return acc


def _peek(node: _Node | None) -> int:
    acc = 0
    while node is not None:
        if node.switch.peek() == 0:
            node = node.left
        else:
            acc += node.left_size
            node = node.right
    return acc


class BoundedMaxRegister:
    """Linearizable max register over ``[initial, h]`` built from 1-bit registers."""

    atomic = False

    def __init__(self, memory: Memory, h: int, initial: int = 0, name: str = "maxreg"):
        if h < initial:
            raise ContractViolation(f"bound {h} below initial value {initial}")
        self.memory = memory
        self.h = h
        self.initial = initial
        self.name = name
        self.size = h - initial + 1
        self.root = _build(memory, self.size, name)

    def max_write(self, actor: int, v: int) -> Step:
        if not self.initial <= v <= self.h:
            raise ContractViolation(f"{self.name}: MaxWrite({v}) outside [{self.initial}, {self.h}]")
        yield from _write(self.root, v - self.initial)

    def max_read(self, actor: int) -> Step:
        return (yield from _read(self.root)) + self.initial

    def peek(self) -> int:
        """Value a solo MaxRead would return now; monitor use only."""
        return _peek(self.root) + self.initial

    def switches(self) -> list[Register]:
        out: list[Register] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is not None:
                out.append(node.switch)
                stack.extend((node.right, node.left))
        return out

    def step_bound(self) -> int:
        return path_steps(self.size)


class AtomicMaxRegister(SharedObject):
    """Max register applied in one indivisible step.

    Stands in for the construction when building blocks are assumed
    instantaneous (exhaustive linearizability runs).  Not a read/write
    register, so it never appears in register-level configurations.
    """

    kind = "atomic_maxreg"
    atomic = True

    def __init__(self, memory: Memory, h: int, initial: int = 0, name: str = "maxreg"):
        if h < initial:
            raise ContractViolation(f"bound {h} below initial value {initial}")
        super().__init__(memory, name)
        self.h = h
        self.initial = initial
        self.size = h - initial + 1
        self._value = initial

    def max_write(self, actor: int, v: int) -> Step:
        if not self.initial <= v <= self.h:
            raise ContractViolation(f"{self.name}: MaxWrite({v}) outside [{self.initial}, {self.h}]")
        yield Access(self, "max_write", v)

    def max_read(self, actor: int) -> Step:
        return (yield Access(self, "max_read"))

    def apply(self, op, arg):
        if op == "max_read":
            return self._value
        if op == "max_write":
            with self.memory.lock:
                if arg > self._value:
                    self._value = arg
            return None
        raise ValueError(f"max registers support max_read/max_write, not {op!r}")

    def peek(self) -> int:
        return self._value

    def step_bound(self) -> int:
        return 1


def make_max_register(memory: Memory, h: int, initial: int = 0, *, atomic: bool = False, name: str = "maxreg"):
    cls = AtomicMaxRegister if atomic else BoundedMaxRegister
    return cls(memory, h, initial, name=name)
