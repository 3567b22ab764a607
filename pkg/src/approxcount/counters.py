"""Wait-free k-multiplicative-accurate m-bounded counters.

Three algorithms share one interface (:class:`ApproxCounter`):

* :class:`PowerOfTwoCounter` (algorithm 1, ``k >= sqrt(2n)``): each actor
  MaxWrites 0, 1, 2, ... into ``logNumIncrems`` after 1, 1, 2, 4, ... local
  increments; a read of ``r`` returns ``k * 2**r``.
* :class:`BucketCounter` (algorithm 2, any ``k > 1``): every increment goes
  through a small exact counter ("bucket"); actors move on once a bucket
  holds ``X*n`` with ``X = 1/(k-1)`` and publish ``floor(log_k(.))`` of their
  estimate; a read of ``r`` returns ``k**(r+1)``.
* :class:`BatchedBucketCounter` (algorithm 3, integer ``k >= 2``): like 2 but
  bucket ``i >= 1`` is only touched every ``(k-1)*k**(i-1)`` local
  increments, so there are logarithmically many buckets of size ``2N``.

Shared building blocks are either register-level (everything down to 1-bit
registers, for step counting) or atomic mocks (for exhaustive
linearizability runs).  Operations are generators; see
:mod:`approxcount.registers` for how they are driven.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ContractViolation, RegimeError
from .exact import make_exact_counter
from .maxreg import make_max_register
from .rational import ceil_fraction, ceil_log_k, floor_log_k, format_rational, parse_k
from .registers import Memory, StepCounter, drive

REGISTERS = "registers"
ATOMIC = "atomic"

_MODE_ALIASES = {
    "registers": REGISTERS,
    "register-level": REGISTERS,
    "atomic": ATOMIC,
    "atomic-blocks": ATOMIC,
}

INC = "inc"
READ = "read"


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown building-block mode {mode!r}") from None


def check_regime(algorithm: int, n: int, k: Fraction) -> None:
    """Reject parameters outside the algorithm's accuracy regime."""
    if n < 1:
        raise RegimeError("n must be at least 1")
    if algorithm == 1:
        if k * k < 2 * n:
            raise RegimeError(f"algorithm 1 needs k >= sqrt(2n): k^2 = {format_rational(k * k)} < 2n = {2 * n}")
    elif algorithm == 2:
        if k <= 1:
            raise RegimeError(f"algorithm 2 needs k > 1, got {format_rational(k)}")
    elif algorithm == 3:
        if k.denominator != 1 or k < 2:
            raise RegimeError(f"algorithm 3 needs k to be an integer >= 2, got {format_rational(k)}")
    else:
        raise RegimeError(f"unknown algorithm {algorithm!r}; expected 1, 2 or 3")


@dataclass
class PowerLocals:
    lcounter: int = 0
    threshold: int = 1
    next_val: int = 0


@dataclass
class BucketLocals:
    index: int = 0


@dataclass
class BatchedLocals:
    lcounter: int = 0
    index: int = 0
    threshold: int = 1


class ApproxCounter:
    """Common plumbing: budget, modes, handles and accounting."""

    algorithm = 0

    def __init__(self, n: int, m: int, k, mode: str = REGISTERS, memory: Memory | None = None):
        self.k = parse_k(k)
        check_regime(self.algorithm, n, self.k)
        if m < 1:
            raise ValueError("m must be at least 1")
        self.n = n
        self.m = m
        self.mode = normalize_mode(mode)
        self.atomic = self.mode == ATOMIC
        self.memory = memory if memory is not None else Memory()
        self.increments_started = 0
        self.buckets: list = []

    def _charge(self) -> None:
        if self.increments_started >= self.m:
            raise ContractViolation(f"increment budget m={self.m} exceeded")
        self.increments_started += 1

    def _publish(self, r: int) -> Fraction:
        raise NotImplementedError

    def read(self, actor: int):
        r = yield from self.log_num.max_read(actor)
        return self._publish(r) if r >= 0 else Fraction(0)

    def increment(self, actor: int):
        raise NotImplementedError

    def start(self, actor: int, op: str, arg=None):
        if op == INC:
            return self.increment(actor)
        if op == READ:
            return self.read(actor)
        raise ValueError(f"counters support {INC!r} and {READ!r}, not {op!r}")

    def handle(self, actor: int, steps: StepCounter | None = None) -> CounterHandle:
        return CounterHandle(self, actor, steps)

    # -- monitoring --------------------------------------------------------

    def final_state(self) -> dict[str, int]:
        state = {"logNumIncrems": self.log_num.peek()}
        for i, b in enumerate(self.buckets):
            state[f"Bucket[{i}]"] = b.peek()
        return state

    def observe(self) -> tuple[int, tuple[int, ...], tuple[int, ...]]:
        """``(logNumIncrems value, bucket contents, per-actor index)``, unscheduled."""
        indexes = tuple(getattr(s, "index", 0) for s in self.locals)
        return self.log_num.peek(), tuple(b.peek() for b in self.buckets), indexes

    # -- accounting --------------------------------------------------------

    def space(self) -> dict[str, int]:
        """Object and register counts of the constructed graph (counted, not derived)."""
        census = self.memory.census()
        return {
            "max_registers": 1,
            "exact_counters": len(self.buckets),
            "bucket_bound": self.bucket_bound if self.buckets else 0,
            "log_bound": self.log_num.h,
            "base_registers": census.get("register", 0),
            "bit_registers": census.get("bit", 0),
            "atomic_objects": census.get("atomic_maxreg", 0) + census.get("atomic_counter", 0),
        }

    def step_bounds(self) -> dict[str, int]:
        """Closed-form worst-case own-step counts per operation."""
        mr = self.log_num.step_bound()
        if not self.buckets:
            return {INC: mr, READ: mr}
        b = self.buckets[0]
        return {INC: b.increment_bound() + b.read_bound() + mr, READ: mr}


class CounterHandle:
    """Per-actor synchronous view of a counter (native use)."""

    def __init__(self, counter: ApproxCounter, actor: int, steps: StepCounter | None = None):
        self.counter = counter
        self.actor = actor
        self.steps = steps
        self._ops = 0

    def _run(self, gen):
        self._ops += 1
        return drive(gen, self.steps, self.actor, self._ops - 1)

    def increment(self) -> None:
        self._run(self.counter.increment(self.actor))

    def read(self) -> Fraction:
        return self._run(self.counter.read(self.actor))


class PowerOfTwoCounter(ApproxCounter):
    """Algorithm 1: batched power-of-two exposure, ``k >= sqrt(2n)``."""

    algorithm = 1

    def __init__(self, n, m, k, mode=REGISTERS, memory=None):
        super().__init__(n, m, k, mode, memory)
        h = ceil_log_k(Fraction(2), m)
        self.log_num = make_max_register(self.memory, h, -1, atomic=self.atomic, name="logNumIncrems")
        self.locals = [PowerLocals() for _ in range(n)]

    def increment(self, actor):
        self._charge()
        s = self.locals[actor]
        s.lcounter += 1
        if s.lcounter == s.threshold:
            yield from self.log_num.max_write(actor, s.next_val)
            s.next_val += 1
            s.lcounter = 0
            if s.next_val >= 2:
                s.threshold *= 2

    def _publish(self, r):
        return self.k * 2**r


class BucketCounter(ApproxCounter):
    """Algorithm 2: one bucket increment per increment, any ``k > 1``."""

    algorithm = 2

    def __init__(self, n, m, k, mode=REGISTERS, memory=None):
        super().__init__(n, m, k, mode, memory)
        self.x = 1 / (self.k - 1)
        self.xn = self.x * n
        self.bucket_bound = ceil_fraction((self.x + 1) * n)
        self.buckets = [
            make_exact_counter(self.memory, n, self.bucket_bound, atomic=self.atomic, name=f"Bucket[{i}]")
            for i in range(ceil_fraction(m / self.xn))
        ]
        h = ceil_log_k(self.k, m)
        self.log_num = make_max_register(self.memory, h, -1, atomic=self.atomic, name="logNumIncrems")
        self.locals = [BucketLocals() for _ in range(n)]

    def increment(self, actor):
        self._charge()
        s = self.locals[actor]
        if s.index >= len(self.buckets):
            raise ContractViolation(f"bucket index {s.index} past the {len(self.buckets)} buckets")
        bucket = self.buckets[s.index]
        yield from bucket.increment(actor)
        val = yield from bucket.read(actor)
        if val < self.xn:
            yield from self.log_num.max_write(actor, floor_log_k(self.k, val + s.index * self.xn))
        else:
            s.index += 1
            yield from self.log_num.max_write(actor, floor_log_k(self.k, s.index * self.xn))

    def _publish(self, r):
        return self.k ** (r + 1)


class BatchedBucketCounter(ApproxCounter):
    """Algorithm 3: silent local batching in front of the buckets, integer ``k >= 2``."""

    algorithm = 3

    def __init__(self, n, m, k, mode=REGISTERS, memory=None):
        super().__init__(n, m, k, mode, memory)
        self.kk = int(self.k)
        self.cln = ceil_log_k(self.k, n)
        self.big_n = self.kk**self.cln
        self.bucket_bound = 2 * self.big_n
        count = max(1, ceil_log_k(self.k, ceil_fraction(Fraction(m, n))) + 1)
        self.buckets = [
            make_exact_counter(self.memory, n, self.bucket_bound, atomic=self.atomic, name=f"Bucket[{i}]")
            for i in range(count)
        ]
        h = ceil_log_k(self.k, m)
        self.log_num = make_max_register(self.memory, h, -1, atomic=self.atomic, name="logNumIncrems")
        self.locals = [BatchedLocals() for _ in range(n)]

    def increment(self, actor):
        self._charge()
        s = self.locals[actor]
        s.lcounter += 1
        if s.lcounter != s.threshold:
            return
        if s.index >= len(self.buckets):
            raise ContractViolation(f"bucket index {s.index} past the {len(self.buckets)} buckets")
        bucket = self.buckets[s.index]
        yield from bucket.increment(actor)
        s.lcounter = 0
        val = yield from bucket.read(actor)
        if s.index == 0 and val < self.big_n:
            yield from self.log_num.max_write(actor, floor_log_k(self.k, val))
        if val >= self.big_n:
            yield from self.log_num.max_write(actor, self.cln + s.index)
            s.index += 1
            if s.index > 1:
                s.threshold *= self.kk
            if s.index == 1:
                s.threshold = self.kk - 1

    def _publish(self, r):
        return self.k ** (r + 1)


ALGORITHMS = {1: PowerOfTwoCounter, 2: BucketCounter, 3: BatchedBucketCounter}


def construct(algorithm: int, n: int, m: int, k, mode: str = REGISTERS, memory: Memory | None = None) -> ApproxCounter:
    """Build the requested counter; rejects parameters outside its regime."""
    try:
        cls = ALGORITHMS[algorithm]
    except KeyError:
        raise RegimeError(f"unknown algorithm {algorithm!r}; expected 1, 2 or 3") from None
    return cls(n, m, k, mode, memory)
