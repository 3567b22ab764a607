"""Step-complexity sweeps and their reports.

A sweep runs one workload per ``m``:

* ``m`` increments are split evenly over the ``n`` actors;
* each actor's script has reads spread evenly among its increments;
* each schedule ends with one quiescent probe Read per actor.

Every operation's own steps are tallied under seeded random schedules.
Register-level sweeps run on the flat-array kernel. Atomic-blocks sweeps
run on the generator harness.

Each report row also carries the space census of the constructed graph
and a violation count.  The count sums lemma-monitor hits, step-bound
overruns and inaccurate quiescent reads.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .counters import ATOMIC, INC, READ, REGISTERS, check_regime, normalize_mode
from .harness import WorkloadSpec, explore_random
from .invariants import LemmaMonitor, check_step_bounds, quiescent_reads
from .kernels import K_INC, K_READ, compile_workload, decode_read
from .rational import format_rational, parse_k
from .registers import Memory


@dataclass
class BenchConfig:
    algorithm: int
    n: int
    ms: list[int]
    k: Any
    mode: str = REGISTERS
    seed: int = 0
    trials: int = 10
    reads_per_actor: int = 8

    def __post_init__(self):
        self.k = parse_k(self.k)
        self.mode = normalize_mode(self.mode)
        self.ms = [int(m) for m in self.ms]
        check_regime(self.algorithm, self.n, self.k)
        if not self.ms or min(self.ms) < 1:
            raise ValueError("the m sweep needs at least one m >= 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


COLUMNS = (
    "algorithm", "n", "m", "k", "k_decimal", "mode", "engine", "seed", "trials",
    "read_steps_max", "read_steps_mean", "inc_steps_max", "inc_steps_mean",
    "read_bound", "inc_bound",
    "max_registers", "exact_counters", "bucket_bound", "log_bound",
    "base_registers", "bit_registers", "atomic_objects",
    "quiescent_reads", "max_ratio", "max_ratio_decimal", "violations",
)


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def bench_scripts(n: int, m: int, reads_per_actor: int) -> list[list[str]]:
    scripts = []
    for a in range(n):
        incs = m // n + (1 if a < m % n else 0)
        reads = min(reads_per_actor, incs) if incs else 0
        script: list[str] = []
        # spread reads evenly: one read after every ``incs / reads`` increments
        marks = {((j + 1) * incs) // reads for j in range(reads)} if reads else set()
        for i in range(1, incs + 1):
            script.append(INC)
            if i in marks:
                script.append(READ)
        scripts.append(script)
    return scripts


def _decimal(x: Fraction, digits: int = 6) -> str:
    return f"{float(x):.{digits}g}"


def _accuracy(results, v_done, k: Fraction) -> tuple[int, Fraction]:
    """Inaccurate quiescent reads and the worst ``max(x/v, v/x)`` seen."""
    bad, worst = 0, Fraction(1)
    for x, v in zip(results, v_done):
        if not Fraction(v) / k <= x <= k * v:
            bad += 1
        if v and x:
            worst = max(worst, x / v, v / x)
    return bad, worst


def _kernel_trials(cfg: BenchConfig, workload: WorkloadSpec):
    cw = compile_workload(workload)
    bounds = cw.step_bounds
    read_steps, inc_steps = [], []
    violations = quiescent = 0
    worst = Fraction(1)
    for run in cw.random_runs(cfg.seed, cfg.trials, probe=True):
        ops = run.ops
        kind, inv, resp, steps = ops[:, 2], ops[:, 3], ops[:, 4], ops[:, 5]
        is_read = kind == K_READ
        read_steps.append(steps[is_read])
        inc_steps.append(steps[kind == K_INC])
        violations += run.violations
        violations += int(np.sum(steps[is_read] > bounds[READ]) + np.sum(steps[~is_read] > bounds[INC]))
        inc_inv, inc_resp = inv[~is_read], resp[~is_read]
        xs, vs = [], []
        for row in np.flatnonzero(is_read & (resp >= 0)):
            lo, hi = inv[row], resp[row]
            if np.any((inc_inv < hi) & ((inc_resp < 0) | (inc_resp > lo))):
                continue
            xs.append(decode_read(workload, int(ops[row, 6])))
            vs.append(int(np.sum((inc_resp >= 0) & (inc_resp < lo))))
        bad, w = _accuracy(xs, vs, cfg.k)
        violations += bad
        quiescent += len(xs)
        worst = max(worst, w)
    return cw.counter, bounds, np.concatenate(read_steps), np.concatenate(inc_steps), violations, quiescent, worst


def _harness_trials(cfg: BenchConfig, workload: WorkloadSpec):
    counter = workload.build(Memory())
    bounds = counter.step_bounds()
    read_steps, inc_steps = [], []
    violations = quiescent = 0
    worst = Fraction(1)
    for trace in explore_random(workload, cfg.seed, cfg.trials, probe=True, monitor=LemmaMonitor):
        for o in trace.ops().values():
            (read_steps if o["op"] == READ else inc_steps).append(o["steps"])
        violations += len(trace.violations) + len(check_step_bounds(trace, bounds))
        pairs = quiescent_reads(trace)
        bad, w = _accuracy([x for x, _ in pairs], [v for _, v in pairs], cfg.k)
        violations += bad
        quiescent += len(pairs)
        worst = max(worst, w)
    return counter, bounds, np.array(read_steps), np.array(inc_steps), violations, quiescent, worst


def run_bench(cfg: BenchConfig, *, engine: str | None = None) -> BenchReport:
    """One row per ``m``; deterministic for a fixed seed.

    ``engine`` is ``"kernel"`` (register-level only, the default there) or
    ``"harness"``.
    """
    if engine is None:
        engine = "kernel" if cfg.mode == REGISTERS else "harness"
    if engine == "kernel" and cfg.mode == ATOMIC:
        raise ValueError("the kernel engine simulates register-level building blocks only")
    report = BenchReport()
    for m in cfg.ms:
        workload = WorkloadSpec(cfg.algorithm, cfg.n, m, cfg.k, bench_scripts(cfg.n, m, cfg.reads_per_actor),
                                mode=cfg.mode)
        runner = _kernel_trials if engine == "kernel" else _harness_trials
        counter, bounds, rs, incs, violations, quiescent, worst = runner(cfg, workload)
        space = counter.space()
        report.rows.append({
            "algorithm": cfg.algorithm,
            "n": cfg.n,
            "m": m,
            "k": format_rational(cfg.k),
            "k_decimal": _decimal(cfg.k),
            "mode": cfg.mode,
            "engine": engine,
            "seed": cfg.seed,
            "trials": cfg.trials,
            "read_steps_max": int(rs.max()) if rs.size else 0,
            "read_steps_mean": round(float(rs.mean()), 4) if rs.size else 0.0,
            "inc_steps_max": int(incs.max()) if incs.size else 0,
            "inc_steps_mean": round(float(incs.mean()), 4) if incs.size else 0.0,
            "read_bound": bounds[READ],
            "inc_bound": bounds[INC],
            **{key: space[key] for key in ("max_registers", "exact_counters", "bucket_bound", "log_bound",
                                           "base_registers", "bit_registers", "atomic_objects")},
            "quiescent_reads": quiescent,
            "max_ratio": format_rational(worst),
            "max_ratio_decimal": _decimal(worst),
            "violations": violations,
        })
    return report


def emit_report(report: BenchReport, fmt: str = "csv", path=None) -> str:
    """Render the report as CSV or JSON; also write it to ``path`` if given."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.rows:
            writer.writerow({c: row[c] for c in COLUMNS})
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps({"columns": list(COLUMNS), "rows": [{c: row[c] for c in COLUMNS} for row in report.rows]},
                          indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}; expected csv or json")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(text)
    return text
