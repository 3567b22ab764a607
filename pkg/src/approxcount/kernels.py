"""Flat-array simulator for register-level counters.

The object graph built by :mod:`approxcount.counters` is compiled into
integer tables (switch bits of every max register node, exact-counter
tree nodes, leaf registers, per-actor leaf-to-root paths), and a step
interpreter replays the same control flow as the generator operations,
one base access per scheduler step.  Register ids are the ones the
reference graph got from its memory arena, and actors are picked with the
rule of :func:`approxcount.harness.run_draws`.  So for equal draws, the
kernel and the harness produce the same accesses, the same event indices
and the same per-operation step counts; this is what the parity tests
check.

Everything below the :class:`CompiledWorkload` wrapper is written for
numba's nopython mode and falls back to plain Python when the JIT is
disabled (see :mod:`approxcount._jit`).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._jit import njit
from .counters import INC, READ, REGISTERS
from .exact import BoundedExactCounter
from .harness import WorkloadSpec
from .maxreg import BoundedMaxRegister
from .registers import Memory, Register, SIMULATED

REQ = 1
DONE = 0

OP_READ = 0
OP_WRITE = 1

K_INC = 0
K_READ = 1

# per-actor state columns
F_OPK = 0
F_SEQ = 1
F_POS = 2
F_PH = 3
F_LC = 4
F_TH = 5
F_NV = 6
F_IDX = 7
F_VAL = 8
F_CK = 9
F_CPH = 10
F_CTR = 11
F_CP = 12
F_CSUM = 13
F_CRES = 14
F_HK = 15
F_HRES = 16
F_MK = 17
F_MREG = 18
F_MNODE = 19
F_MV = 20
F_MACC = 21
F_MSP = 22
F_MPH = 23
F_MRES = 24
F_RQREG = 25
F_RQOP = 26
F_RQARG = 27
F_STEPS = 28
F_INV = 29
F_RES = 30
NFIELDS = 31

# params slots
P_ALG = 0
P_N = 1
P_P = 2
P_Q = 3
P_KK = 4
P_CLN = 5
P_BIGN = 6
P_NB = 7
P_LOG = 8
P_BBOUND = 9
NPARAMS = 10

E_OK = 0
E_INDEX = 1
E_CAPACITY = 2

MSTACK = 64


# -- max registers --------------------------------------------------------------


@njit(cache=True)
def _request(ast, a, reg, op, arg):
    ast[a, F_RQREG] = reg
    ast[a, F_RQOP] = op
    ast[a, F_RQARG] = arg


@njit(cache=True)
def _mr_pop(ast, mstack, mr_nodes, a):
    sp = ast[a, F_MSP]
    if sp == 0:
        ast[a, F_MK] = 0
        return DONE
    sp -= 1
    ast[a, F_MSP] = sp
    ast[a, F_MPH] = 1
    _request(ast, a, mr_nodes[mstack[a, sp], 0], OP_WRITE, 1)
    return REQ


@njit(cache=True)
def _mr_descend(ast, mstack, mr_nodes, a):
    node = ast[a, F_MNODE]
    v = ast[a, F_MV]
    while node >= 0:
        ls = mr_nodes[node, 3]
        if v < ls:
            ast[a, F_MNODE] = node
            ast[a, F_MV] = v
            ast[a, F_MPH] = 0
            _request(ast, a, mr_nodes[node, 0], OP_READ, 0)
            return REQ
        mstack[a, ast[a, F_MSP]] = node
        ast[a, F_MSP] += 1
        v -= ls
        node = mr_nodes[node, 2]
    return _mr_pop(ast, mstack, mr_nodes, a)


@njit(cache=True)
def _mr_read_next(ast, mr_nodes, mregs, a):
    node = ast[a, F_MNODE]
    if node < 0:
        ast[a, F_MRES] = ast[a, F_MACC] + mregs[ast[a, F_MREG], 1]
        ast[a, F_MK] = 0
        return DONE
    _request(ast, a, mr_nodes[node, 0], OP_READ, 0)
    return REQ


@njit(cache=True)
def mr_start_write(ast, mstack, mr_nodes, mregs, a, mreg, v):
    ast[a, F_MK] = 2
    ast[a, F_MREG] = mreg
    ast[a, F_MNODE] = mregs[mreg, 0]
    ast[a, F_MV] = v - mregs[mreg, 1]
    ast[a, F_MSP] = 0
    return _mr_descend(ast, mstack, mr_nodes, a)


@njit(cache=True)
def mr_start_read(ast, mr_nodes, mregs, a, mreg):
    ast[a, F_MK] = 1
    ast[a, F_MREG] = mreg
    ast[a, F_MNODE] = mregs[mreg, 0]
    ast[a, F_MACC] = 0
    return _mr_read_next(ast, mr_nodes, mregs, a)


@njit(cache=True)
def mr_resume(ast, mstack, mr_nodes, mregs, a, ret):
    node = ast[a, F_MNODE]
    if ast[a, F_MK] == 1:
        if ret == 0:
            ast[a, F_MNODE] = mr_nodes[node, 1]
        else:
            ast[a, F_MACC] += mr_nodes[node, 3]
            ast[a, F_MNODE] = mr_nodes[node, 2]
        return _mr_read_next(ast, mr_nodes, mregs, a)
    if ast[a, F_MPH] == 0 and ret == 0:
        ast[a, F_MNODE] = mr_nodes[node, 1]
        return _mr_descend(ast, mstack, mr_nodes, a)
    return _mr_pop(ast, mstack, mr_nodes, a)


@njit(cache=True)
def mr_peek(mem, mr_nodes, mregs, mreg):
    node = mregs[mreg, 0]
    acc = 0
    while node >= 0:
        if mem[mr_nodes[node, 0]] == 0:
            node = mr_nodes[node, 1]
        else:
            acc += mr_nodes[node, 3]
            node = mr_nodes[node, 2]
    return acc + mregs[mreg, 1]


# -- exact counters ---------------------------------------------------------------
# child kinds: 0 constant zero, 1 leaf register (ref = register id), 2 tree node


@njit(cache=True)
def _ch_start(ast, mr_nodes, mregs, cnodes, a, kind, ref):
    if kind == 0:
        ast[a, F_HRES] = 0
        return DONE
    ast[a, F_HK] = kind
    if kind == 1:
        _request(ast, a, ref, OP_READ, 0)
        return REQ
    if mr_start_read(ast, mr_nodes, mregs, a, cnodes[ref, 0]) == DONE:
        ast[a, F_HRES] = ast[a, F_MRES]
        return DONE
    return REQ


@njit(cache=True)
def _ch_resume(ast, mstack, mr_nodes, mregs, a, ret):
    if ast[a, F_HK] == 1:
        ast[a, F_HRES] = ret
        return DONE
    if mr_resume(ast, mstack, mr_nodes, mregs, a, ret) == DONE:
        ast[a, F_HRES] = ast[a, F_MRES]
        return DONE
    return REQ


@njit(cache=True)
def _ctr_advance(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, stage):
    """Walk the leaf-to-root path from ``stage`` (1 left child, 2 right, 3 MaxWrite)."""
    c = ast[a, F_CTR]
    while True:
        cp = ast[a, F_CP]
        if stage == 1:
            if cp >= ctr_path.shape[2] or ctr_path[c, a, cp] < 0:
                ast[a, F_CK] = 0
                return DONE
            node = ctr_path[c, a, cp]
            ast[a, F_CPH] = 1
            if _ch_start(ast, mr_nodes, mregs, cnodes, a, cnodes[node, 1], cnodes[node, 2]) == REQ:
                return REQ
            ast[a, F_CSUM] = ast[a, F_HRES]
            stage = 2
        node = ctr_path[c, a, cp]
        if stage == 2:
            ast[a, F_CPH] = 2
            if _ch_start(ast, mr_nodes, mregs, cnodes, a, cnodes[node, 3], cnodes[node, 4]) == REQ:
                return REQ
            ast[a, F_CSUM] += ast[a, F_HRES]
            stage = 3
        ast[a, F_CPH] = 3
        if mr_start_write(ast, mstack, mr_nodes, mregs, a, cnodes[node, 0], ast[a, F_CSUM]) == REQ:
            return REQ
        ast[a, F_CP] += 1
        stage = 1


@njit(cache=True)
def ctr_start_inc(ast, clocal, ctr_leaf, a, c):
    clocal[c, a] += 1
    ast[a, F_CK] = 1
    ast[a, F_CTR] = c
    ast[a, F_CPH] = 0
    _request(ast, a, ctr_leaf[c, a], OP_WRITE, clocal[c, a])
    return REQ


@njit(cache=True)
def ctr_start_read(ast, mr_nodes, mregs, cnodes, ctrs, a, c):
    ast[a, F_CK] = 2
    ast[a, F_CTR] = c
    if _ch_start(ast, mr_nodes, mregs, cnodes, a, ctrs[c, 0], ctrs[c, 1]) == DONE:
        ast[a, F_CRES] = ast[a, F_HRES]
        ast[a, F_CK] = 0
        return DONE
    return REQ


@njit(cache=True)
def ctr_resume(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, ret):
    if ast[a, F_CK] == 2:
        if _ch_resume(ast, mstack, mr_nodes, mregs, a, ret) == DONE:
            ast[a, F_CRES] = ast[a, F_HRES]
            ast[a, F_CK] = 0
            return DONE
        return REQ
    ph = ast[a, F_CPH]
    if ph == 0:
        ast[a, F_CP] = 0
        return _ctr_advance(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, 1)
    if ph == 1:
        if _ch_resume(ast, mstack, mr_nodes, mregs, a, ret) == REQ:
            return REQ
        ast[a, F_CSUM] = ast[a, F_HRES]
        return _ctr_advance(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, 2)
    if ph == 2:
        if _ch_resume(ast, mstack, mr_nodes, mregs, a, ret) == REQ:
            return REQ
        ast[a, F_CSUM] += ast[a, F_HRES]
        return _ctr_advance(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, 3)
    if mr_resume(ast, mstack, mr_nodes, mregs, a, ret) == REQ:
        return REQ
    ast[a, F_CP] += 1
    return _ctr_advance(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, 1)


# -- the three algorithms ---------------------------------------------------------


@njit(cache=True)
def _floor_log(table, z):
    j = 0
    while j + 1 < table.shape[0] and table[j + 1] <= z:
        j += 1
    return j


@njit(cache=True)
def _alg1_after_write(ast, a):
    ast[a, F_NV] += 1
    ast[a, F_LC] = 0
    if ast[a, F_NV] >= 2:
        ast[a, F_TH] *= 2
    return DONE


@njit(cache=True)
def _alg2_publish(ast, mstack, mr_nodes, mregs, params, table, a):
    n, p, q = params[P_N], params[P_P], params[P_Q]
    val = ast[a, F_VAL]
    if val * (p - q) < n * q:
        arg = _floor_log(table, val * (p - q) + ast[a, F_IDX] * n * q)
    else:
        ast[a, F_IDX] += 1
        arg = _floor_log(table, ast[a, F_IDX] * n * q)
    ast[a, F_PH] = 3
    return mr_start_write(ast, mstack, mr_nodes, mregs, a, params[P_LOG], arg)


@njit(cache=True)
def _alg3_big(ast, mstack, mr_nodes, mregs, params, a):
    if ast[a, F_VAL] >= params[P_BIGN]:
        ast[a, F_PH] = 4
        if mr_start_write(ast, mstack, mr_nodes, mregs, a, params[P_LOG], params[P_CLN] + ast[a, F_IDX]) == REQ:
            return REQ
        return _alg3_advance(ast, params, a)
    return DONE


@njit(cache=True)
def _alg3_advance(ast, params, a):
    ast[a, F_IDX] += 1
    if ast[a, F_IDX] > 1:
        ast[a, F_TH] *= params[P_KK]
    if ast[a, F_IDX] == 1:
        ast[a, F_TH] = params[P_KK] - 1
    return DONE


@njit(cache=True)
def _alg3_after_read(ast, mstack, mr_nodes, mregs, params, table, a):
    ast[a, F_VAL] = ast[a, F_CRES]
    if ast[a, F_IDX] == 0 and ast[a, F_VAL] < params[P_BIGN]:
        ast[a, F_PH] = 3
        if mr_start_write(ast, mstack, mr_nodes, mregs, a, params[P_LOG], _floor_log(table, ast[a, F_VAL])) == REQ:
            return REQ
    return _alg3_big(ast, mstack, mr_nodes, mregs, params, a)


@njit(cache=True)
def op_start(ast, mstack, clocal, mr_nodes, mregs, cnodes, ctrs, ctr_leaf, ctr_path, params, table, a):
    """Run local code of a fresh operation up to its first access request."""
    if ast[a, F_OPK] == K_READ:
        ast[a, F_PH] = 10
        if mr_start_read(ast, mr_nodes, mregs, a, params[P_LOG]) == DONE:
            ast[a, F_RES] = ast[a, F_MRES]
            return DONE
        return REQ
    alg = params[P_ALG]
    if alg == 1:
        ast[a, F_LC] += 1
        if ast[a, F_LC] != ast[a, F_TH]:
            return DONE
        ast[a, F_PH] = 1
        if mr_start_write(ast, mstack, mr_nodes, mregs, a, params[P_LOG], ast[a, F_NV]) == REQ:
            return REQ
        return _alg1_after_write(ast, a)
    if alg == 3:
        ast[a, F_LC] += 1
        if ast[a, F_LC] != ast[a, F_TH]:
            return DONE
    if ast[a, F_IDX] >= params[P_NB]:
        return -E_INDEX
    ast[a, F_PH] = 1
    return ctr_start_inc(ast, clocal, ctr_leaf, a, ast[a, F_IDX])


@njit(cache=True)
def op_resume(ast, mstack, clocal, mr_nodes, mregs, cnodes, ctrs, ctr_leaf, ctr_path, params, table, a, ret):
    """Feed one access result back; run local code up to the next request."""
    ph = ast[a, F_PH]
    if ph == 10:
        if mr_resume(ast, mstack, mr_nodes, mregs, a, ret) == DONE:
            ast[a, F_RES] = ast[a, F_MRES]
            return DONE
        return REQ
    alg = params[P_ALG]
    if alg == 1:
        if mr_resume(ast, mstack, mr_nodes, mregs, a, ret) == REQ:
            return REQ
        return _alg1_after_write(ast, a)
    if ph == 1:
        if ctr_resume(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, ret) == REQ:
            return REQ
        if alg == 3:
            ast[a, F_LC] = 0
        ast[a, F_PH] = 2
        if ctr_start_read(ast, mr_nodes, mregs, cnodes, ctrs, a, ast[a, F_IDX]) == REQ:
            return REQ
        ph = 2
        ret = -1
    if ph == 2:
        if ret >= 0 and ctr_resume(ast, mstack, mr_nodes, mregs, cnodes, ctr_path, a, ret) == REQ:
            return REQ
        if alg == 2:
            ast[a, F_VAL] = ast[a, F_CRES]
            if _alg2_publish(ast, mstack, mr_nodes, mregs, params, table, a) == REQ:
                return REQ
            return DONE
        return _alg3_after_read(ast, mstack, mr_nodes, mregs, params, table, a)
    if mr_resume(ast, mstack, mr_nodes, mregs, a, ret) == REQ:
        return REQ
    if alg == 2:
        return DONE
    if ph == 3:
        return _alg3_big(ast, mstack, mr_nodes, mregs, params, a)
    return _alg3_advance(ast, params, a)


# -- the scheduler loop -------------------------------------------------------------


@njit(cache=True)
def _bucket_total(mem, ctr_leaf, c):
    s = 0
    for a in range(ctr_leaf.shape[1]):
        s += mem[ctr_leaf[c, a]]
    return s


@njit(cache=True)
def simulate(mem, is_log, leaf_ctr, mr_nodes, mregs, cnodes, ctrs, ctr_leaf, ctr_path, params, table,
             scripts, lengths, draws, probe, ops_out, acc_out, logseq, counters):
    """Run one schedule.

    ``ops_out`` rows: actor, seq, kind, invoke index, respond index, steps,
    result (the raw MaxRead value for reads).  ``acc_out`` rows (only if it
    has rows): event index, actor, register, op, arg, ret.  ``counters``
    returns [ops, accesses, events, distinct log values, violations, error].
    """
    n = lengths.shape[0]
    ast = np.zeros((n, NFIELDS), dtype=np.int64)
    mstack = np.zeros((n, MSTACK), dtype=np.int64)
    clocal = np.zeros((max(ctr_leaf.shape[0], 1), n), dtype=np.int64)
    for a in range(n):
        ast[a, F_OPK] = -1
        ast[a, F_TH] = 1
    log_reg = params[P_LOG]
    nops = 0
    nacc = 0
    ev = 0
    nlog = 1
    logseq[0] = mr_peek(mem, mr_nodes, mregs, log_reg)
    viol = 0
    err = E_OK
    enabled = np.zeros(n, dtype=np.int64)
    t = 0
    rounds = 2 if probe else 1
    for rnd in range(rounds):
        if rnd == 1:
            for a in range(n):
                scripts[a, lengths[a]] = K_READ
                lengths[a] += 1
        actor_solo = 0
        while True:
            if rnd == 0:
                ne = 0
                for a in range(n):
                    if ast[a, F_OPK] >= 0 or ast[a, F_POS] < lengths[a]:
                        enabled[ne] = a
                        ne += 1
                if ne == 0:
                    break
                a = enabled[draws[t % draws.shape[0]] % ne]
                t += 1
            else:
                while actor_solo < n and ast[actor_solo, F_OPK] < 0 and ast[actor_solo, F_POS] >= lengths[actor_solo]:
                    actor_solo += 1
                if actor_solo == n:
                    break
                a = actor_solo
            wrote = -1
            if ast[a, F_OPK] < 0:
                if nops >= ops_out.shape[0]:
                    err = E_CAPACITY
                    break
                ast[a, F_SEQ] = ast[a, F_POS]
                ast[a, F_OPK] = scripts[a, ast[a, F_POS]]
                ast[a, F_POS] += 1
                ast[a, F_STEPS] = 0
                ast[a, F_INV] = ev
                ev += 1
                st = op_start(ast, mstack, clocal, mr_nodes, mregs, cnodes, ctrs, ctr_leaf, ctr_path, params, table, a)
            else:
                st = REQ + 1
            if st < 0:
                err = -st
                break
            if st != DONE:
                reg = ast[a, F_RQREG]
                if ast[a, F_RQOP] == OP_READ:
                    ret = mem[reg]
                    arg = -1
                else:
                    arg = ast[a, F_RQARG]
                    mem[reg] = arg
                    ret = -1
                    wrote = reg
                if acc_out.shape[0] > 0:
                    if nacc >= acc_out.shape[0]:
                        err = E_CAPACITY
                        break
                    acc_out[nacc, 0] = ev
                    acc_out[nacc, 1] = a
                    acc_out[nacc, 2] = reg
                    acc_out[nacc, 3] = ast[a, F_RQOP]
                    acc_out[nacc, 4] = arg
                    acc_out[nacc, 5] = ret
                nacc += 1
                ev += 1
                ast[a, F_STEPS] += 1
                st = op_resume(ast, mstack, clocal, mr_nodes, mregs, cnodes, ctrs, ctr_leaf, ctr_path, params,
                               table, a, max(ret, 0))
                if st < 0:
                    err = -st
                    break
            if st == DONE:
                ops_out[nops, 0] = a
                ops_out[nops, 1] = ast[a, F_SEQ]
                ops_out[nops, 2] = ast[a, F_OPK]
                ops_out[nops, 3] = ast[a, F_INV]
                ops_out[nops, 4] = ev
                ops_out[nops, 5] = ast[a, F_STEPS]
                ops_out[nops, 6] = ast[a, F_RES] if ast[a, F_OPK] == K_READ else 0
                nops += 1
                ev += 1
                ast[a, F_OPK] = -1
            if wrote >= 0:
                if is_log[wrote]:
                    value = mr_peek(mem, mr_nodes, mregs, log_reg)
                    last = logseq[nlog - 1]
                    if value != last:
                        if value < last:
                            viol += 1
                        elif params[P_ALG] == 1 and value != last + 1:
                            viol += 1
                        elif params[P_ALG] == 3 and value > params[P_CLN] and value != last + 1:
                            viol += 1
                        if nlog < logseq.shape[0]:
                            logseq[nlog] = value
                            nlog += 1
                c = leaf_ctr[wrote]
                if c >= 0 and _bucket_total(mem, ctr_leaf, c) > params[P_BBOUND]:
                    viol += 1
        if err != E_OK:
            break
    # pending operations (never responded) are reported with respond = -1
    for a in range(n):
        if ast[a, F_OPK] >= 0 and nops < ops_out.shape[0]:
            ops_out[nops, 0] = a
            ops_out[nops, 1] = ast[a, F_SEQ]
            ops_out[nops, 2] = ast[a, F_OPK]
            ops_out[nops, 3] = ast[a, F_INV]
            ops_out[nops, 4] = -1
            ops_out[nops, 5] = ast[a, F_STEPS]
            ops_out[nops, 6] = 0
            nops += 1
    counters[0] = nops
    counters[1] = nacc
    counters[2] = ev
    counters[3] = nlog
    counters[4] = viol
    counters[5] = err


# -- Python side ---------------------------------------------------------------------


@dataclass
class KernelRun:
    """Output of one kernel schedule: numpy tables plus summary counters."""

    ops: np.ndarray  # actor, seq, kind, invoke, respond, steps, raw result
    accesses: np.ndarray  # event, actor, register, op, arg, ret
    log_values: np.ndarray
    memory: np.ndarray
    violations: int
    events: int

    def results(self, workload: WorkloadSpec) -> list[Fraction | None]:
        """Read results as exact rationals (``None`` for increments)."""
        return [decode_read(workload, int(r)) if kind == K_READ and resp >= 0 else None
                for kind, resp, r in zip(self.ops[:, 2], self.ops[:, 4], self.ops[:, 6])]

    def op_table(self, workload: WorkloadSpec) -> dict[tuple[int, int], dict]:
        """Same shape as :meth:`ExecutionTrace.ops`, for parity checks."""
        out = {}
        for row, res in zip(self.ops, self.results(workload)):
            actor, seq, kind, inv, resp, steps, _ = (int(x) for x in row)
            out[(actor, seq)] = {
                "actor": actor, "seq": seq, "op": INC if kind == K_INC else READ, "arg": None,
                "invoke": inv, "respond": None if resp < 0 else resp,
                "result": res if kind == K_READ and resp >= 0 else None, "steps": steps,
            }
        return dict(sorted(out.items(), key=lambda kv: kv[1]["invoke"]))


def decode_read(workload: WorkloadSpec, r: int) -> Fraction:
    if r < 0:
        return Fraction(0)
    k = workload.k
    return k * 2**r if workload.algorithm == 1 else k ** (r + 1)


class CompiledWorkload:
    """Integer tables for one register-level workload, reusable across schedules."""

    def __init__(self, workload: WorkloadSpec):
        if workload.mode != REGISTERS:
            raise ValueError("kernels simulate register-level workloads only")
        self.workload = workload
        memory = Memory(SIMULATED)
        counter = workload.build(memory)
        self.counter = counter
        n = workload.n

        regs = memory.objects
        self.mem0 = np.array([r.initial if isinstance(r, Register) else 0 for r in regs], dtype=np.int64)

        mr_rows: list[list[int]] = []
        mreg_rows: list[list[int]] = []
        mreg_index: dict[int, int] = {}

        def add_mr(mr: BoundedMaxRegister) -> int:
            def walk(node) -> int:
                if node is None:
                    return -1
                idx = len(mr_rows)
                mr_rows.append([node.switch.id, -1, -1, node.left_size])
                mr_rows[idx][1] = walk(node.left)
                mr_rows[idx][2] = walk(node.right)
                return idx

            mreg_index[id(mr)] = len(mreg_rows)
            mreg_rows.append([walk(mr.root), mr.initial])
            return mreg_index[id(mr)]

        log_idx = add_mr(counter.log_num)
        self.is_log = np.zeros(len(regs), dtype=np.int64)
        for sw in counter.log_num.switches():
            self.is_log[sw.id] = 1

        cnode_rows: list[list[int]] = []
        cnode_index: dict[int, int] = {}
        buckets: list[BoundedExactCounter] = counter.buckets
        depth = max((b.depth for b in buckets), default=0)
        self.leaf_ctr = np.full(len(regs), -1, dtype=np.int64)
        ctr_rows = []
        ctr_leaf = np.zeros((len(buckets), n), dtype=np.int64)
        ctr_path = np.full((len(buckets), n, max(depth, 1)), -1, dtype=np.int64)

        def child(ref) -> tuple[int, int]:
            if ref is None:
                return 0, 0
            if isinstance(ref, Register):
                return 1, ref.id
            return 2, cnode_index[id(ref)]

        for c, b in enumerate(buckets):
            for node in b.nodes:  # children are created before parents
                cnode_index[id(node)] = len(cnode_rows)
                cnode_rows.append([add_mr(node.mr), *child(node.left), *child(node.right)])
            ctr_rows.append(list(child(b.root)))
            for a, leaf in enumerate(b.leaves):
                ctr_leaf[c, a] = leaf.id
                self.leaf_ctr[leaf.id] = c
                for d, node in enumerate(b.paths[a]):
                    ctr_path[c, a, d] = cnode_index[id(node)]

        self.mr_nodes = np.array(mr_rows, dtype=np.int64).reshape(-1, 4)
        self.mregs = np.array(mreg_rows, dtype=np.int64).reshape(-1, 2)
        self.cnodes = np.array(cnode_rows, dtype=np.int64).reshape(-1, 5)
        self.ctrs = np.array(ctr_rows, dtype=np.int64).reshape(-1, 2)
        self.ctr_leaf = ctr_leaf
        self.ctr_path = ctr_path

        k = workload.k
        p, q = k.numerator, k.denominator
        params = np.zeros(NPARAMS, dtype=np.int64)
        params[P_ALG] = workload.algorithm
        params[P_N] = n
        params[P_P] = p
        params[P_Q] = q
        params[P_LOG] = log_idx
        params[P_NB] = len(buckets)
        params[P_BBOUND] = getattr(counter, "bucket_bound", 0)
        h = counter.log_num.h
        if workload.algorithm == 2:
            # floor_log_k(A / (p - q)) == largest j with ceil(k**j * (p - q)) <= A
            table = [-((-(p**j) * (p - q)) // q**j) for j in range(h + 2)]
        elif workload.algorithm == 3:
            params[P_KK] = counter.kk
            params[P_CLN] = counter.cln
            params[P_BIGN] = counter.big_n
            table = [counter.kk**j for j in range(h + 2)]
        else:
            table = [1]
        self.table = np.array(table, dtype=np.int64)
        self.params = params

        width = max(len(s) for s in workload.scripts) + 1
        self.scripts = np.zeros((n, width), dtype=np.int64)
        for a, s in enumerate(workload.scripts):
            for j, (name, _) in enumerate(s):
                self.scripts[a, j] = K_INC if name == INC else K_READ
        self.lengths = np.array([len(s) for s in workload.scripts], dtype=np.int64)

        bounds = counter.step_bounds()
        self.step_bounds = bounds
        total_ops = int(self.lengths.sum()) + n
        self.op_capacity = total_ops
        self.access_capacity = sum(bounds[name] for s in workload.scripts for name, _ in s) + n * bounds[READ]
        # same horizon as harness.draw_horizon, without rebuilding the graph
        self.horizon = max(1, sum(max(1, bounds[name]) for s in workload.scripts for name, _ in s))

    def run(self, draws: np.ndarray, *, probe: bool = False, record_accesses: bool = False) -> KernelRun:
        mem = self.mem0.copy()
        ops = np.zeros((self.op_capacity, 7), dtype=np.int64)
        acc = np.zeros((self.access_capacity if record_accesses else 0, 6), dtype=np.int64)
        logseq = np.zeros(self.counter.log_num.size + 1, dtype=np.int64)
        counters = np.zeros(6, dtype=np.int64)
        simulate(mem, self.is_log, self.leaf_ctr, self.mr_nodes, self.mregs, self.cnodes, self.ctrs,
                 self.ctr_leaf, self.ctr_path, self.params, self.table, self.scripts.copy(),
                 self.lengths.copy(), np.asarray(draws, dtype=np.int64), probe, ops, acc, logseq, counters)
        nops, nacc, events, nlog, viol, err = (int(x) for x in counters)
        if err == E_INDEX:
            raise RuntimeError("kernel: bucket index ran past the bucket array")
        if err == E_CAPACITY:
            raise RuntimeError("kernel: output capacity exceeded")
        return KernelRun(ops[:nops], acc[:nacc], logseq[:nlog], mem, viol, events)

    def random_runs(self, seed: int, trials: int, *, probe: bool = False, record_accesses: bool = False):
        """Same draws, in the same order, as :func:`approxcount.harness.explore_random`."""
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            draws = rng.integers(0, 2**31 - 1, size=self.horizon)
            yield self.run(draws, probe=probe, record_accesses=record_accesses)


def compile_workload(workload: WorkloadSpec) -> CompiledWorkload:
    return CompiledWorkload(workload)


__all__ = ["CompiledWorkload", "KernelRun", "compile_workload", "decode_read"]
