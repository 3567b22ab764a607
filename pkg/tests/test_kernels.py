import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxcount import _jit
from approxcount.harness import ACCESS, WorkloadSpec, draw_horizon, explore_random, run_draws
from approxcount.kernels import compile_workload

CASES = [
    (1, 2, "2", [["inc"] * 6 + ["read"], ["inc", "read"] * 3]),
    (1, 4, "3", [["inc", "read", "inc"]] * 4),
    (2, 2, "2", [["inc", "read", "inc", "inc"], ["read", "inc", "inc"]]),
    (2, 3, "3/2", [["inc"] * 5 + ["read"]] * 3),
    (2, 1, "5/4", [["inc"] * 9 + ["read"]]),
    (3, 2, "2", [["inc"] * 9 + ["read"], ["inc"] * 7]),
    (3, 4, "3", [["inc", "inc", "read"] * 3] * 4),
    (3, 3, "2", [["inc"] * 12 + ["read"]] * 3),
]


def _workload(alg, n, k, scripts):
    m = max(1, sum(s.count("inc") for s in scripts))
    return WorkloadSpec(alg, n, m, k, scripts)


def access_rows(trace):
    rows = []
    for e in trace.events:
        if e.kind == ACCESS:
            write = e.op == "write"
            rows.append((e.index, e.actor, e.obj, int(write), e.arg if write else -1, -1 if write else e.ret))
    return rows


@pytest.mark.parametrize("case", CASES, ids=lambda c: f"alg{c[0]}-n{c[1]}-k{c[2]}")
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), probe=st.booleans())
def test_kernel_replays_the_harness_exactly(case, seed, probe):
    w = _workload(*case)
    draws = np.random.default_rng(seed).integers(0, 2**31 - 1, size=draw_horizon(w))
    trace = run_draws(w, draws, probe=probe)
    run = compile_workload(w).run(draws, probe=probe, record_accesses=True)
    assert [tuple(int(x) for x in row) for row in run.accesses] == access_rows(trace)
    assert run.op_table(w) == trace.ops()
    assert run.events == len(trace.events)
    assert run.violations == 0


def test_random_runs_follow_explore_random():
    w = _workload(*CASES[3])
    cw = compile_workload(w)
    harness = [t.ops() for t in explore_random(w, 9, 25, probe=True)]
    kernel = [r.op_table(w) for r in cw.random_runs(9, 25, probe=True)]
    assert harness == kernel


def test_final_memory_matches_the_reference_graph():
    w = _workload(*CASES[5])
    draws = np.random.default_rng(1).integers(0, 2**31 - 1, size=draw_horizon(w))
    cw = compile_workload(w)
    run = cw.run(draws, probe=True)
    trace = run_draws(w, draws, probe=True)
    assert int(run.log_values[-1]) == trace.final["logNumIncrems"]
    for i in range(len(cw.counter.buckets)):
        leaves = cw.ctr_leaf[i]
        assert int(run.memory[leaves].sum()) == trace.final[f"Bucket[{i}]"]


def test_log_values_are_consecutive_for_algorithm_1():
    w = _workload(1, 2, "2", [["inc"] * 40, ["inc"] * 40])
    for run in compile_workload(w).random_runs(3, 20):
        vals = [int(v) for v in run.log_values]
        assert vals == list(range(-1, len(vals) - 1))


def test_register_level_only():
    w = WorkloadSpec(2, 2, 2, 2, [["inc"], ["inc"]], mode="atomic")
    with pytest.raises(ValueError):
        compile_workload(w)


def test_flag_selects_the_fallback_with_identical_output():
    code = (
        "import json, numpy as np\n"
        "from approxcount import _jit\n"
        "from approxcount.harness import WorkloadSpec\n"
        "from approxcount.kernels import compile_workload\n"
        "w = WorkloadSpec(3, 3, 30, 2, [['inc'] * 10 + ['read']] * 3)\n"
        "runs = list(compile_workload(w).random_runs(4, 5, probe=True))\n"
        "print(json.dumps({'jit': _jit.ENABLED, 'ops': [r.ops.tolist() for r in runs]}))\n"
    )
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, APPROXCOUNT_DISABLE_JIT=flag)
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out[flag] = json.loads(proc.stdout)
    assert out["1"]["jit"] is False
    assert out["0"]["jit"] is (_jit.numba is not None)
    assert out["0"]["ops"] == out["1"]["ops"]


def test_identity_decorator_when_disabled(monkeypatch):
    monkeypatch.setattr(_jit, "ENABLED", False)

    def f(x):
        return x + 1

    assert _jit.njit(f) is f
    assert _jit.njit(cache=True)(f) is f
