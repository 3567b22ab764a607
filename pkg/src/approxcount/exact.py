"""Bounded exact counters: the buckets of the approximate counters.

:class:`BoundedExactCounter` keeps one single-writer word register per
actor (its own increment count) and a balanced binary tree of max
registers above them, each bounded by ``l``.  An increment bumps the
actor's leaf and then, walking to the root, reads both children of each
node and MaxWrites their sum into it.  A read is one MaxRead of the root.

The tree is padded to a power-of-two width with constant-zero leaves so
its depth is ``ceil(log2 n)``; padding costs neither registers nor steps.
"""

from __future__ import annotations

from .errors import ContractViolation
from .maxreg import BoundedMaxRegister, path_steps
from .registers import Access, Memory, Register, SharedObject, Step


class _Node:
    __slots__ = ("mr", "left", "right")

    def __init__(self, mr: BoundedMaxRegister, left, right):
        self.mr = mr
        self.left = left
        self.right = right


def _child_value(child) -> Step:
    if child is None:
        return 0
    if isinstance(child, Register):
        return (yield from child.read())
    return (yield from child.mr.max_read(-1))


def _child_peek(child) -> int:
    if child is None:
        return 0
    if isinstance(child, Register):
        return child.peek()
    return child.mr.peek()


def increment_steps(n: int, bound: int) -> int:
    """Closed-form worst-case accesses of one register-level increment."""
    depth = (n - 1).bit_length()
    d = path_steps(bound + 1)
    if depth == 0:
        return 1
    return 1 + (2 + d) + (depth - 1) * 3 * d


def read_steps(n: int, bound: int) -> int:
    return 1 if n == 1 else path_steps(bound + 1)


class BoundedExactCounter:
    """Linearizable ``bound``-bounded exact counter for ``n`` actors."""

    atomic = False

    def __init__(self, memory: Memory, n: int, bound: int, name: str = "counter"):
        if n < 1 or bound < 1:
            raise ValueError("need n >= 1 and bound >= 1")
        self.memory = memory
        self.n = n
        self.bound = bound
        self.name = name
        self.leaves = [Register(memory, bound=bound, name=f"{name}.leaf{a}") for a in range(n)]
        self._local = [0] * n
        self.nodes: list[_Node] = []

        width = 1 << (n - 1).bit_length()
        level: list = list(self.leaves) + [None] * (width - n)
        parent: dict[int, _Node] = {}
        depth = 0
        while len(level) > 1:
            nxt = []
            for j in range(0, len(level), 2):
                left, right = level[j], level[j + 1]
                if left is None and right is None:
                    nxt.append(None)
                    continue
                mr = BoundedMaxRegister(memory, bound, 0, name=f"{name}.node{depth}.{j // 2}")
                node = _Node(mr, left, right)
                self.nodes.append(node)
                for child in (left, right):
                    if child is not None:
                        parent[id(child)] = node
                nxt.append(node)
            level = nxt
            depth += 1
        self.root = level[0]
        self.depth = depth
        self.paths: list[list[_Node]] = []
        for leaf in self.leaves:
            path, cur = [], leaf
            while id(cur) in parent:
                cur = parent[id(cur)]
                path.append(cur)
            self.paths.append(path)

    def increment(self, actor: int) -> Step:
        if sum(self._local) >= self.bound:
            raise ContractViolation(f"{self.name}: more than {self.bound} increments")
        self._local[actor] += 1
        yield from self.leaves[actor].write(self._local[actor])
        for node in self.paths[actor]:
            total = (yield from _child_value(node.left)) + (yield from _child_value(node.right))
            yield from node.mr.max_write(actor, total)

    def read(self, actor: int) -> Step:
        return (yield from _child_value(self.root))

    def peek(self) -> int:
        """Number of leaf increments applied so far; monitor use only."""
        return sum(leaf.peek() for leaf in self.leaves)

    def peek_root(self) -> int:
        return _child_peek(self.root)

    def registers(self) -> list[Register]:
        out = list(self.leaves)
        for node in self.nodes:
            out.extend(node.mr.switches())
        return out

    def increment_bound(self) -> int:
        return increment_steps(self.n, self.bound)

    def read_bound(self) -> int:
        return read_steps(self.n, self.bound)


class AtomicExactCounter(SharedObject):
    """Exact counter whose Increment and Read are single indivisible steps.

    Behaves like fetch-and-add behind the counter interface; only used
    when building blocks are assumed instantaneous.
    """

    kind = "atomic_counter"
    atomic = True

    def __init__(self, memory: Memory, n: int, bound: int, name: str = "counter"):
        super().__init__(memory, name)
        self.n = n
        self.bound = bound
        self._value = 0
        self._started = 0

    def increment(self, actor: int) -> Step:
        if self._started >= self.bound:
            raise ContractViolation(f"{self.name}: more than {self.bound} increments")
        self._started += 1
        yield Access(self, "increment")

    def read(self, actor: int) -> Step:
        return (yield Access(self, "read"))

    def apply(self, op, arg):
        if op == "read":
            return self._value
        if op == "increment":
            with self.memory.lock:
                self._value += 1
            return None
        raise ValueError(f"exact counters support increment/read, not {op!r}")

    def peek(self) -> int:
        return self._value

    def increment_bound(self) -> int:
        return 1

    def read_bound(self) -> int:
        return 1


def make_exact_counter(memory: Memory, n: int, bound: int, *, atomic: bool = False, name: str = "counter"):
    cls = AtomicExactCounter if atomic else BoundedExactCounter
    return cls(memory, n, bound, name=name)
