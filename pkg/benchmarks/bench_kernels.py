"""Time the flat-array kernel with and without numba, and the generator harness.

Each engine runs in a subprocess so the JIT switch (an environment
variable read at import time) really differs between runs.

    python3 benchmarks/bench_kernels.py [--trials 200] [--alg 3 --n 4 --k 2 --m 256]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from approxcount import _jit
from approxcount.harness import WorkloadSpec, explore_random
from approxcount.kernels import compile_workload
from approxcount.bench import bench_scripts

cfg = json.loads(sys.argv[1])
w = WorkloadSpec(cfg["alg"], cfg["n"], cfg["m"], cfg["k"], bench_scripts(cfg["n"], cfg["m"], 8))
out = {"engine": cfg["engine"], "jit": _jit.ENABLED}
if cfg["engine"] == "harness":
    t = time.perf_counter()
    runs = list(explore_random(w, 0, cfg["trials"], probe=True))
    out["seconds"] = time.perf_counter() - t
    out["steps"] = sum(sum(t.steps.values()) for t in runs)
else:
    cw = compile_workload(w)
    t = time.perf_counter()
    next(cw.random_runs(0, 1, probe=True))  # compile or load the cache
    out["warmup"] = time.perf_counter() - t
    t = time.perf_counter()
    runs = list(cw.random_runs(0, cfg["trials"], probe=True))
    out["seconds"] = time.perf_counter() - t
    out["steps"] = int(sum(r.ops[:, 5].sum() for r in runs))
print(json.dumps(out))
"""


def run_engine(engine: str, args) -> dict:
    env = dict(os.environ)
    env.pop("APPROXCOUNT_DISABLE_JIT", None)
    if engine == "numpy":
        env["APPROXCOUNT_DISABLE_JIT"] = "1"
    cfg = {"engine": engine, "alg": args.alg, "n": args.n, "m": args.m, "k": args.k, "trials": args.trials}
    proc = subprocess.run([sys.executable, "-c", WORKER, json.dumps(cfg)], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alg", type=int, default=3)
    parser.add_argument("--n", type=int, default=4)
    parser.add_argument("--k", default="2")
    parser.add_argument("--m", type=int, default=256)
    parser.add_argument("--trials", type=int, default=200)
    args = parser.parse_args(argv)

    results = [run_engine(e, args) for e in ("numba", "numpy", "harness")]
    base = results[0]["seconds"]
    print(f"alg={args.alg} n={args.n} k={args.k} m={args.m} trials={args.trials}")
    print(f"{'engine':<8} {'jit':<5} {'seconds':>9} {'steps/s':>12} {'vs numba':>9}")
    for r in results:
        rate = r["steps"] / r["seconds"] if r["seconds"] else float("inf")
        print(f"{r['engine']:<8} {str(r['jit']):<5} {r['seconds']:9.3f} {rate:12.0f} {r['seconds'] / base:8.1f}x")
    steps = {r["steps"] for r in results}
    if len(steps) != 1:
        print(f"engines disagree on total steps: {sorted(steps)}")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
